#include "mpt/io.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "mpt/error.hpp"

namespace mpt::io {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kInvalidInput, msg); }

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    fail(what + ": malformed JSON: " + e.what());
  }
}

const json& field(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) fail(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing field '" + key + "'");
  return *it;
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) fail(where + ": expected a number");
  return v.get<double>();
}

double number_field(const json& obj, const std::string& key, const std::string& where) {
  return number(field(obj, key, where), where + "." + key);
}

template <std::size_t N>
std::array<double, N> numbers(const json& v, const std::string& where) {
  if (!v.is_array() || v.size() != N) fail(where + ": expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = number(v[i], where + "[" + std::to_string(i) + "]");
  return out;
}

SymmetricTensor3 tensor_field(const json& obj, const std::string& key, const std::string& where) {
  return SymmetricTensor3(numbers<6>(field(obj, key, where), where + "." + key));
}

Vec3 vec_field(const json& obj, const std::string& key, const std::string& where) {
  const auto a = numbers<3>(field(obj, key, where), where + "." + key);
  return {a[0], a[1], a[2]};
}

json tensor_json(const SymmetricTensor3& t) {
  const auto& c = t.coefficients();
  return json(std::vector<double>(c.begin(), c.end()));
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    out.push_back(line);
  }
  return out;
}

constexpr const char* kCoeff[6] = {"c11", "c22", "c33", "c12", "c13", "c23"};

std::string signature_header() {
  std::string h = "omega_rad_per_s";
  for (const char* part : {"Rt_", "I_"})
    for (const char* c : kCoeff) h += std::string(",") + part + c;
  return h;
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

double parse_double(const std::string& text, const std::string& what) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  while (first < last && *first == ' ') ++first;
  while (last > first && last[-1] == ' ') --last;
  if (first < last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last || first == last)
    fail(what + ": cannot parse '" + text + "' as a number");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) fail("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    fail("cannot move output into '" + path.string() + "'");
  }
}

ModelFile parse_model(const std::string& json_text) {
  const json j = parse_json(json_text, "model");
  const std::string w = "model";
  std::string label;
  if (j.is_object() && j.contains("label")) {
    if (!j["label"].is_string()) fail("model.label: expected a string");
    label = j["label"].get<std::string>();
  }
  const double alpha = number_field(j, "alpha_m", w);
  const double sigma = number_field(j, "sigma_star_S_per_m", w);
  const double mu_r = number_field(j, "mu_r", w);
  const SymmetricTensor3 n0 = tensor_field(j, "n0_m3", w);
  const json& modes_json = field(j, "modes", w);
  if (!modes_json.is_array()) fail("model.modes: expected an array");
  std::vector<Mode> modes;
  for (std::size_t n = 0; n < modes_json.size(); ++n) {
    const std::string wm = "model.modes[" + std::to_string(n) + "]";
    const double lambda = number_field(modes_json[n], "lambda", wm);
    modes.push_back({lambda, tensor_field(modes_json[n], "weights", wm)});
  }
  std::optional<double> limit;
  if (j.contains("omega_limit_rad_per_s")) limit = number_field(j, "omega_limit_rad_per_s", w);
  try {
    return {ModalModel(alpha, sigma, mu_r, n0, std::move(modes), label), limit};
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kInvalidInput) throw;
    throw Error(ErrorCode::kInvalidInput, std::string("model: ") + e.what());
  }
}

std::string format_model(const ModalModel& model, std::optional<double> omega_limit) {
  json j;
  j["label"] = model.label();
  j["alpha_m"] = model.alpha();
  j["sigma_star_S_per_m"] = model.sigma_star();
  j["mu_r"] = model.mu_r();
  j["n0_m3"] = tensor_json(model.n0());
  j["modes"] = json::array();
  for (const auto& m : model.modes()) j["modes"].push_back({{"lambda", m.lambda}, {"weights", tensor_json(m.weight)}});
  if (omega_limit) j["omega_limit_rad_per_s"] = *omega_limit;
  return j.dump(2) + "\n";
}

CoilLayout parse_layout(const std::string& json_text) {
  const json j = parse_json(json_text, "layout");
  CoilLayout layout;
  layout.z = vec_field(j, "object_position_m", "layout");
  const json& ex = field(j, "exciters", "layout");
  if (!ex.is_array()) fail("layout.exciters: expected an array");
  for (std::size_t m = 0; m < ex.size(); ++m)
    layout.exciters.push_back(vec_field(ex[m], "h0_A_per_m", "layout.exciters[" + std::to_string(m) + "]"));
  const json& rx = field(j, "receivers", "layout");
  if (!rx.is_array()) fail("layout.receivers: expected an array");
  for (std::size_t n = 0; n < rx.size(); ++n) {
    const std::string w = "layout.receivers[" + std::to_string(n) + "]";
    ReceiverCoil c;
    c.center = vec_field(rx[n], "center_m", w);
    c.normal = vec_field(rx[n], "normal", w);
    if (rx[n].contains("radius_m")) c.radius = number_field(rx[n], "radius_m", w);
    if (rx[n].contains("quadrature_order")) {
      const json& q = rx[n]["quadrature_order"];
      if (!q.is_number_integer()) fail(w + ".quadrature_order: expected an integer");
      c.quadrature_order = q.get<int>();
    }
    layout.receivers.push_back(c);
  }
  validate_layout(layout);
  return layout;
}

std::string format_signature(const MptSignature& sig) {
  if (sig.label.find_first_of("\r\n") != std::string::npos) fail("signature label must be a single line");
  std::string out;
  out += "# alpha_m=" + format_double(sig.alpha) + "\n";
  out += "# sigma_star_S_per_m=" + format_double(sig.sigma_star) + "\n";
  out += "# mu_r=" + format_double(sig.mu_r) + "\n";
  out += "# label=" + sig.label + "\n";
  if (sig.omega_limit) out += "# omega_limit_rad_per_s=" + format_double(*sig.omega_limit) + "\n";
  out += signature_header() + "\n";
  for (const auto& s : sig.samples) {
    out += format_double(s.omega);
    for (int k = 0; k < 6; ++k) out += "," + format_double(s.r_tilde[k]);
    for (int k = 0; k < 6; ++k) out += "," + format_double(s.i_part[k]);
    out += "\n";
  }
  return out;
}

MptSignature parse_signature(const std::string& csv_text) {
  MptSignature sig;
  bool have_alpha = false, have_sigma = false, have_mu = false, header = false;
  const auto lines = lines_of(csv_text);
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string& line = lines[ln];
    const std::string where = "signature line " + std::to_string(ln + 1);
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (header) fail(where + ": metadata after the header");
      const auto eq = line.find('=');
      if (eq == std::string::npos) fail(where + ": metadata needs key=value");
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(' '));
      const std::string value = line.substr(eq + 1);
      if (key == "alpha_m") sig.alpha = parse_double(value, where + " alpha_m"), have_alpha = true;
      else if (key == "sigma_star_S_per_m") sig.sigma_star = parse_double(value, where + " sigma_star_S_per_m"), have_sigma = true;
      else if (key == "mu_r") sig.mu_r = parse_double(value, where + " mu_r"), have_mu = true;
      else if (key == "label") sig.label = value;
      else if (key == "omega_limit_rad_per_s") sig.omega_limit = parse_double(value, where + " omega_limit_rad_per_s");
      else fail(where + ": unknown metadata key '" + key + "'");
      continue;
    }
    if (!header) {
      if (line != signature_header()) fail(where + ": expected header '" + signature_header() + "'");
      header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 13) fail(where + ": expected 13 columns, found " + std::to_string(cols.size()));
    const auto names = split(signature_header(), ',');
    MptSample s;
    s.omega = parse_double(cols[0], where + " " + names[0]);
    for (int k = 0; k < 6; ++k) {
      s.r_tilde[k] = parse_double(cols[1 + k], where + " " + names[1 + k]);
      s.i_part[k] = parse_double(cols[7 + k], where + " " + names[7 + k]);
    }
    if (!sig.samples.empty() && !(s.omega > sig.samples.back().omega))
      fail(where + ": omega must increase strictly");
    sig.samples.push_back(s);
  }
  if (!have_alpha) fail("signature: missing metadata 'alpha_m'");
  if (!have_sigma) fail("signature: missing metadata 'sigma_star_S_per_m'");
  if (!have_mu) fail("signature: missing metadata 'mu_r'");
  if (!header) fail("signature: missing header line");
  if (sig.samples.empty()) fail("signature: no rows");
  return sig;
}

std::string format_dataset(const LabeledDataset& data) {
  const int f = data.layout().size();
  std::string out;
  for (int j = 0; j < f; ++j) out += (j ? "," : "") + feature_name(data.layout(), j);
  for (const auto& c : data.class_names()) out += ",t_" + c;
  out += "\n";
  for (std::size_t p = 0; p < data.size(); ++p) {
    for (int j = 0; j < f; ++j) out += (j ? "," : "") + format_double(data.x(p).values[j]);
    for (double t : data.t(p).t) out += t == 1.0 ? ",1" : ",0";
    out += "\n";
  }
  return out;
}

std::string format_dataset_sidecar(const LabeledDataset& data, const std::string& extra_json) {
  json j = parse_json(extra_json, "sidecar extras");
  if (!j.is_object()) fail("sidecar extras: expected an object");
  j["variant"] = to_string(data.layout().variant);
  j["frequencies"] = data.layout().frequencies;
  j["with_commutator"] = data.layout().with_commutator;
  j["feature_count"] = data.layout().size();
  j["classes"] = data.class_names();
  j["rows"] = data.size();
  return j.dump(2) + "\n";
}

LabeledDataset parse_dataset(const std::string& csv_text, const std::string& sidecar_json) {
  const json j = parse_json(sidecar_json, "dataset sidecar");
  const std::string w = "dataset sidecar";
  const json& variant = field(j, "variant", w);
  if (!variant.is_string()) fail(w + ".variant: expected a string");
  const json& freq = field(j, "frequencies", w);
  if (!freq.is_number_integer()) fail(w + ".frequencies: expected an integer");
  const json& comm = field(j, "with_commutator", w);
  if (!comm.is_boolean()) fail(w + ".with_commutator: expected a boolean");
  const json& classes = field(j, "classes", w);
  if (!classes.is_array() || classes.empty()) fail(w + ".classes: expected a non-empty array");
  std::vector<std::string> names;
  for (const auto& c : classes) {
    if (!c.is_string()) fail(w + ".classes: expected strings");
    names.push_back(c.get<std::string>());
  }
  const FeatureLayout layout{parse_variant(variant.get<std::string>()), freq.get<int>(), comm.get<bool>()};
  LabeledDataset data(layout, names);

  const int f = layout.size();
  const int k = static_cast<int>(names.size());
  std::string expected;
  for (int i = 0; i < f; ++i) expected += (i ? "," : "") + feature_name(layout, i);
  for (const auto& c : names) expected += ",t_" + c;

  const auto lines = lines_of(csv_text);
  bool header = false;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    const std::string where = "dataset line " + std::to_string(ln + 1);
    if (lines[ln].empty()) continue;
    if (!header) {
      if (lines[ln] != expected) throw Error(ErrorCode::kIncompatibleFeatures, where + ": header does not match the sidecar layout");
      header = true;
      continue;
    }
    const auto cols = split(lines[ln], ',');
    if (static_cast<int>(cols.size()) != f + k) fail(where + ": expected " + std::to_string(f + k) + " columns");
    FeatureVector x{layout, std::vector<double>(f)};
    for (int i = 0; i < f; ++i) x.values[i] = parse_double(cols[i], where + " " + feature_name(layout, i));
    int hot = -1, ones = 0;
    for (int c = 0; c < k; ++c) {
      const std::string& v = cols[f + c];
      if (v == "1") hot = c, ++ones;
      else if (v != "0") fail(where + ": class column t_" + names[c] + " must be 0 or 1");
    }
    if (ones != 1) fail(where + ": exactly one class column must be 1");
    data.add(std::move(x), one_of_k(hot, k));
  }
  if (!header) fail("dataset: missing header line");
  return data;
}

std::filesystem::path sidecar_path(const std::filesystem::path& csv_path) {
  auto p = csv_path;
  p += ".json";
  return p;
}

}  // namespace mpt::io
