#include <filesystem>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "mpt/cli.hpp"
#include "mpt/ellipsoid.hpp"
#include "mpt/io.hpp"

using namespace mpt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out, err;
};

Outcome mpt_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(args, out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

class TempDir {
 public:
  TempDir() : path_(fs::temp_directory_path() / ("mpt_cli_" + std::to_string(std::random_device{}()))) {
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  std::string file(const std::string& name, const std::string& content = {}) const {
    const auto p = path_ / name;
    if (!content.empty()) io::write_file_atomic(p, content);
    return p.string();
  }

 private:
  fs::path path_;
};

const char* kModel = R"({"label": "ring", "alpha_m": 0.01, "sigma_star_S_per_m": 5.96e6, "mu_r": 2,
  "n0_m3": [2e-6, 1e-6, 1.5e-6, 1e-7, 0, 2e-7],
  "modes": [{"lambda": 3, "weights": [1, 0.5, 0.8, 0.1, 0.05, 0]},
            {"lambda": 80, "weights": [0.3, 0.6, 0.2, 0, 0.02, 0.01]}]})";

const char* kDiagonalModel = R"({"alpha_m": 0.01, "sigma_star_S_per_m": 5.96e6, "mu_r": 2,
  "n0_m3": [2e-6, 1e-6, 1.5e-6, 0, 0, 0],
  "modes": [{"lambda": 3, "weights": [1, 0.5, 0.8, 0, 0, 0]}]})";

// Three orthogonal exciters and eight receivers on the cube diagonals.
std::string cube_layout(int exciters = 3, int receivers = 8) {
  json j;
  j["object_position_m"] = {0.01, -0.02, 0.03};
  j["exciters"] = json::array();
  for (int m = 0; m < exciters; ++m) {
    std::vector<double> h(3, 0.0);
    h[m] = 1e3;
    j["exciters"].push_back({{"h0_A_per_m", h}});
  }
  j["receivers"] = json::array();
  for (int n = 0; n < receivers; ++n) {
    const std::vector<double> dir{n & 1 ? -1.0 : 1.0, n & 2 ? -1.0 : 1.0, n & 4 ? -1.0 : 1.0};
    const double s = 0.2 / std::sqrt(3.0);
    j["receivers"].push_back({{"center_m", {0.01 + s * dir[0], -0.02 + s * dir[1], 0.03 + s * dir[2]}},
                              {"normal", dir},
                              {"radius_m", 0.02}});
  }
  return j.dump();
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string c;
    while (std::getline(ls, c, ',')) cols.push_back(c);
    rows.push_back(cols);
  }
  return rows;
}

}  // namespace

TEST_CASE("synth writes one row per frequency") {
  TempDir dir;
  const auto model = dir.file("model.json", kModel);
  const auto sig = dir.file("sig.csv");
  const auto r = mpt_cli({"synth", "--model", model, "--num", "21", "--out", sig});
  REQUIRE(r.code == 0);
  const auto rows = csv_rows(io::read_file(sig));
  CHECK(rows.size() == 22);
  CHECK(rows[0][0] == "omega_rad_per_s");
  CHECK(io::parse_signature(io::read_file(sig)).samples.size() == 21);

  const auto lin = mpt_cli({"synth", "--model", model, "--num", "5", "--linear", "--omega-min", "10",
                            "--omega-max", "50"});
  REQUIRE(lin.code == 0);
  const auto lin_sig = io::parse_signature(lin.out);
  CHECK(lin_sig.samples[1].omega == 20.0);
  CHECK(lin_sig.label == "ring");
}

TEST_CASE("synth from zero frequency starts at N0") {
  TempDir dir;
  const auto model = dir.file("model.json", kModel);
  const auto r = mpt_cli({"synth", "--model", model, "--num", "6", "--omega-min", "0"});
  REQUIRE(r.code == 0);
  const auto sig = io::parse_signature(r.out);
  REQUIRE(sig.samples.size() == 6);
  CHECK(sig.samples[0].omega == 0.0);
  CHECK(sig.samples[0].i_part == SymmetricTensor3::zero());
  CHECK(sig.samples[0].r_tilde == SymmetricTensor3(2e-6, 1e-6, 1.5e-6, 1e-7, 0, 2e-7));
  CHECK(sig.samples[5].omega == 1e8);
}

TEST_CASE("synth is deterministic") {
  TempDir dir;
  const auto model = dir.file("model.json", kModel);
  const auto a = dir.file("a.csv"), b = dir.file("b.csv");
  REQUIRE(mpt_cli({"synth", "--model", model, "--out", a}).code == 0);
  REQUIRE(mpt_cli({"--threads", "3", "synth", "--model", model, "--out", b}).code == 0);
  CHECK(io::read_file(a) == io::read_file(b));
}

TEST_CASE("malformed input exits 2 and names the field") {
  TempDir dir;
  const auto bad = dir.file("bad.json", R"({"alpha_m": 0.01, "sigma_star_S_per_m": 1e6, "mu_r": 2,
      "n0_m3": [1e-6, 1e-6, 1e-6, 0, 0, 0], "modes": [{"lambda": 1}]})");
  const auto r = mpt_cli({"synth", "--model", bad});
  CHECK(r.code == 2);
  CHECK(r.err.find("model.modes[0]: missing field 'weights'") != std::string::npos);
  const auto partial = mpt_cli({"synth", "--model", dir.file("partial.json", R"({"alpha_m": 0.01})")});
  CHECK(partial.code == 2);
  CHECK(partial.err.find("sigma_star_S_per_m") != std::string::npos);
  CHECK(mpt_cli({"synth", "--model", dir.file("absent.json")}).code == 2);
  CHECK(mpt_cli({"synth"}).code == 2);
  CHECK(mpt_cli({}).code == 2);
  CHECK(mpt_cli({"frobnicate"}).code == 2);
  CHECK(mpt_cli({"--help"}).code == 0);
}

TEST_CASE("invariants columns") {
  TempDir dir;
  const auto sig = dir.file("sig.csv");
  REQUIRE(mpt_cli({"synth", "--model", dir.file("m.json", kModel), "--num", "7", "--out", sig}).code == 0);

  const auto pri = mpt_cli({"invariants", "--signature", sig, "--set", "principal"});
  REQUIRE(pri.code == 0);
  auto rows = csv_rows(pri.out);
  REQUIRE(rows.size() == 8);
  CHECK(rows[0] == std::vector<std::string>{"omega_rad_per_s", "Rt_I1", "Rt_I2", "Rt_I3", "I_I1", "I_I2", "I_I3"});
  const auto parsed = io::parse_signature(io::read_file(sig));
  const auto p = principal_invariants(parsed.samples[3].r_tilde);
  CHECK(io::parse_double(rows[4][2], "I2") == p.i2);

  const auto alt = csv_rows(mpt_cli({"invariants", "--signature", sig, "--set", "alternative"}).out);
  CHECK(alt[0][5] == "I_J2");
  const auto eig = csv_rows(mpt_cli({"invariants", "--signature", sig, "--set", "eig"}).out);
  CHECK(eig[0][1] == "Rt_l1");
  CHECK(io::parse_double(eig[1][1], "l1") >= io::parse_double(eig[1][2], "l2"));

  const auto comm = csv_rows(mpt_cli({"invariants", "--signature", sig, "--set", "commutator"}).out);
  CHECK(comm[0] == std::vector<std::string>{"omega_rad_per_s", "commutator"});
  CHECK(comm[1].size() == 2);

  const auto diag = dir.file("diag.csv");
  REQUIRE(mpt_cli({"synth", "--model", dir.file("d.json", kDiagonalModel), "--num", "9", "--out", diag}).code == 0);
  const auto zero = csv_rows(mpt_cli({"invariants", "--signature", diag, "--set", "commutator"}).out);
  for (std::size_t k = 1; k < zero.size(); ++k) CHECK(io::parse_double(zero[k][1], "z") == 0.0);

  const auto tall = csv_rows(mpt_cli({"invariants", "--signature", sig, "--set", "principal", "--long"}).out);
  REQUIRE(tall.size() == 1 + 7 * 6);
  CHECK(tall[0] == std::vector<std::string>{"omega_rad_per_s", "quantity", "value"});
  CHECK(tall[1 + 3 * 6 + 1][1] == "Rt_I2");
  CHECK(tall[1 + 3 * 6 + 1][2] == rows[4][2]);

  CHECK(mpt_cli({"invariants", "--signature", sig, "--set", "bogus"}).code == 2);
  CHECK(mpt_cli({"invariants", "--signature", sig, "--ordering", "bogus"}).code == 2);
}

TEST_CASE("equiv-ellipsoid round trips the operating points") {
  struct Case {
    double k;
    std::array<double, 3> radii;
  };
  for (const auto& c : {Case{2.0, {1.4426, 1.8797, 2.4243}}, Case{0.0, {1.3693, 1.9090, 2.9404}}}) {
    const Ellipsoid e(c.radii[0], c.radii[1], c.radii[2]);
    const auto t = polya_szego(0.01, e, Contrast(c.k));
    std::vector<std::string> args{"equiv-ellipsoid", "--alpha", "0.01", "--contrast", io::format_double(c.k), "--eigs"};
    for (int i = 0; i < 3; ++i) args.push_back(io::format_double(t[i]));
    const auto r = mpt_cli(args);
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    const double got[3] = {j["root_finding"]["a"], j["root_finding"]["b"], j["root_finding"]["c"]};
    for (int i = 0; i < 3; ++i) CHECK(std::abs(got[i] - e.radii()[i]) <= 1e-6 * e.radii()[i]);
    CHECK(j["agree"] == true);
    for (double d : j["relative_discrepancy"]) CHECK(d <= 1e-5);
  }
}

TEST_CASE("equiv-ellipsoid of a sphere and of unrealisable input") {
  const auto t = polya_szego(0.02, Ellipsoid(1.3, 1.3, 1.3), Contrast(5.0));
  const std::string v = io::format_double(t[0]);
  const auto r = mpt_cli({"equiv-ellipsoid", "--alpha", "0.02", "--contrast", "5", "--eigs", v, v, v});
  REQUIRE(r.code == 0);
  const auto j = json::parse(r.out);
  CHECK(double(j["root_finding"]["a"]) == doctest::Approx(1.3).epsilon(1e-10));
  CHECK(double(j["root_finding"]["a"]) == double(j["root_finding"]["c"]));

  const auto bad = mpt_cli({"equiv-ellipsoid", "--alpha", "0.01", "--contrast", "2", "--eigs", "1e-6", "2e-6", "3e-6"});
  CHECK(bad.code == 3);
  CHECK(bad.err.find("A_1") != std::string::npos);
  CHECK(mpt_cli({"equiv-ellipsoid", "--alpha", "0.01", "--contrast", "1", "--eigs", "1", "1", "1"}).code == 3);
  CHECK(mpt_cli({"equiv-ellipsoid", "--alpha", "0.01", "--contrast", "2", "--eigs", "1", "1"}).code == 2);
}

TEST_CASE("measure-roundtrip") {
  TempDir dir;
  const auto sig = dir.file("sig.csv");
  REQUIRE(mpt_cli({"synth", "--model", dir.file("m.json", kModel), "--num", "21", "--out", sig}).code == 0);
  const auto layout = dir.file("layout.json", cube_layout());

  // 1e5 is a grid point of the default 21-point grid.
  const auto clean = mpt_cli({"measure-roundtrip", "--layout", layout, "--signature", sig, "--omega", "1e5"});
  REQUIRE(clean.code == 0);
  const auto j = json::parse(clean.out);
  CHECK(j["interpolated"] == false);
  CHECK(j["rank"] == 6);
  CHECK(j["rows"] == 24);
  CHECK(double(j["relative_error"]["max"]) < 1e-8);

  const auto between = json::parse(
      mpt_cli({"measure-roundtrip", "--layout", layout, "--signature", sig, "--omega", "3e4"}).out);
  CHECK(between["interpolated"] == true);
  CHECK(double(between["relative_error"]["max"]) < 1e-8);

  const std::vector<std::string> noisy{"measure-roundtrip", "--layout", layout, "--signature", sig,
                                       "--omega", "1e5", "--noise", "0.01", "--trials", "100", "--seed", "9"};
  const auto n1 = mpt_cli(noisy);
  REQUIRE(n1.code == 0);
  const auto jn = json::parse(n1.out);
  const double cond = jn["condition_number"];
  const double mean = jn["relative_error"]["mean"];
  CHECK(mean > 0.01 * cond / 10.0);
  CHECK(mean < 0.01 * cond * 3.0);
  CHECK(mpt_cli(noisy).out == n1.out);

  CHECK(mpt_cli({"measure-roundtrip", "--layout", layout, "--signature", sig, "--omega", "1e5", "--trials", "0"})
            .code == 2);
  CHECK(mpt_cli({"measure-roundtrip", "--layout", layout, "--signature", sig, "--omega", "1e9"}).code == 3);
  const auto under = mpt_cli({"measure-roundtrip", "--layout", dir.file("u.json", cube_layout(1, 6)),
                              "--signature", sig, "--omega", "1e5"});
  CHECK(under.code == 3);
  CHECK(under.err.find("M_eM_r > 6") != std::string::npos);
}

TEST_CASE("dataset and classify") {
  TempDir dir;
  const std::string shared = R"("sigma_star_S_per_m": 5.96e6, "mu_r": 2, "alpha_m": 0.01,
      "n0_m3": [1e-6, 1e-6, 1e-6, 0, 0, 0],)";
  const std::string second = R"({"lambda": 200, "weights": [0.3, 0.6, 0.2, 0, 0.02, 0.01]})";
  dir.file("high.json", "{" + shared + R"("modes": [{"lambda": 30, "weights": [1, 0.5, 0.8, 0.1, 0.05, 0]}, )" +
                            second + "]}");
  auto config = [&](const std::string& variant) {
    return R"({"classes": ["low", "high"], "objects": [
      {"class": "low", "model": {)" + shared + R"("modes": [{"lambda": 3, "weights": [1, 0.5, 0.8, 0.1, 0.05, 0]}, )" +
           second + R"(]}},
      {"class": "high", "model_file": "high.json"}],
      "omega": {"min": 1e2, "max": 1e8, "num": 10},
      "variant": ")" + variant + R"(", "with_commutator": true, "noise": 0.01, "replicates": 20, "seed": 17})";
  };
  const auto cfg = dir.file("cfg.json", config("eig"));
  const auto data = dir.file("data.csv");
  const auto r = mpt_cli({"dataset", "--config", cfg, "--out", data});
  REQUIRE(r.code == 0);
  CHECK(csv_rows(io::read_file(data)).size() == 41);
  const auto side = json::parse(io::read_file(data + ".json"));
  CHECK(side["feature_count"] == 70);
  CHECK(side["seed"] == 17);

  const auto again = dir.file("again.csv");
  REQUIRE(mpt_cli({"dataset", "--config", cfg, "--out", again}).code == 0);
  CHECK(io::read_file(again) == io::read_file(data));
  const auto reseeded = dir.file("reseeded.csv");
  REQUIRE(mpt_cli({"--seed", "5", "dataset", "--config", cfg, "--out", reseeded}).code == 0);
  CHECK(io::read_file(reseeded) != io::read_file(data));

  for (const char* seed : {"1", "2", "3"}) {
    const auto c = mpt_cli({"classify", "--dataset", data, "--seed", seed});
    REQUIRE(c.code == 0);
    const auto j = json::parse(c.out);
    CHECK(double(j["accuracy"]) == 1.0);
    CHECK(j["confusion"][0][1] == 0);
    CHECK(j["confusion"][1][0] == 0);
    CHECK(double(j["per_class_accuracy"]["low"]) == 1.0);
  }
  const auto query = dir.file("query.csv");
  REQUIRE(mpt_cli({"dataset", "--config", dir.file("q.json", config("principal")), "--out", query}).code == 0);
  CHECK(mpt_cli({"classify", "--dataset", data, "--query", query}).code == 3);
  CHECK(mpt_cli({"classify", "--dataset", data, "--query", again}).code == 0);

  CHECK(mpt_cli({"dataset", "--config", dir.file("bad.json", R"({"classes": ["a"]})"), "--out", data}).code == 2);
}
