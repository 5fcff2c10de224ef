#include "mpt/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "CLI11.hpp"
#include "json.hpp"
#include "mpt/ellipsoid.hpp"
#include "mpt/features.hpp"
#include "mpt/io.hpp"
#include "mpt/measurement.hpp"
#include "mpt/spectral.hpp"

namespace mpt::cli {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

[[noreturn]] void fail(const std::string& msg) { throw Error(ErrorCode::kInvalidInput, msg); }

struct Globals {
  std::uint64_t seed = 0;
  int threads = 1;
  double tol = 1e-5;
};

void emit(std::ostream& out, const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") out << content;
  else io::write_file_atomic(path, content);
}

json tensor_json(const SymmetricTensor3& t) {
  const auto& c = t.coefficients();
  return json(std::vector<double>(c.begin(), c.end()));
}

json sample_json(const MptSample& s) {
  return {{"omega_rad_per_s", s.omega}, {"Rt", tensor_json(s.r_tilde)}, {"I", tensor_json(s.i_part)}};
}

// A log grid starting at zero keeps the zero row and spreads the remaining
// points over the six decades below omega_max.
std::vector<double> make_grid(double lo, double hi, int num, bool linear) {
  if (num < 1) fail("--num must be at least 1");
  if (!(std::isfinite(lo) && std::isfinite(hi) && lo >= 0.0 && hi >= lo))
    fail("frequency range needs 0 <= omega-min <= omega-max");
  if (linear) return lin_spaced(lo, hi, num);
  if (lo > 0.0) return log_spaced(lo, hi, num);
  if (num < 2 || hi == 0.0) fail("a log grid from omega-min = 0 needs --num >= 2 and omega-max > 0");
  std::vector<double> grid{0.0};
  const auto rest = log_spaced(hi * 1e-6, hi, num - 1);
  grid.insert(grid.end(), rest.begin(), rest.end());
  return grid;
}

EigenOrdering parse_ordering(const std::string& s) {
  if (s == "sorted") return EigenOrdering::kSortedDescending;
  if (s == "tracked") return EigenOrdering::kContinuityTracked;
  fail("unknown ordering '" + s + "' (expected sorted or tracked)");
}

// ---- synth

struct SynthArgs {
  std::string model, out;
  double omega_min = 1e2, omega_max = 1e8;
  int num = 21;
  bool linear = false;
};

int cmd_synth(const SynthArgs& a, const Globals& g, std::ostream& out) {
  const auto file = io::parse_model(io::read_file(a.model));
  const auto grid = make_grid(a.omega_min, a.omega_max, a.num, a.linear);
  MptSignature sig = synthesize(file.model, grid, g.threads);
  sig.omega_limit = file.omega_limit;
  emit(out, a.out, io::format_signature(sig));
  return kExitOk;
}

// ---- invariants

struct InvariantArgs {
  std::string signature, set = "principal", ordering = "sorted", out;
  bool long_format = false;
};

int cmd_invariants(const InvariantArgs& a, std::ostream& out) {
  const bool comm = a.set == "commutator";
  const FeatureVariant variant = comm ? FeatureVariant::kEig : parse_variant(a.set);
  const auto sig = io::parse_signature(io::read_file(a.signature));
  const auto f = features_from_signature(sig, variant, comm, parse_ordering(a.ordering));
  const int m_total = f.layout.frequencies;

  // Column labels such as Rt_I2, I_l1 or commutator, one per value per row.
  std::vector<FeatureSlot> slots;
  std::vector<std::string> labels;
  if (comm) {
    slots.push_back({FeatureBlock::kCommutator, 0, 0});
    labels.push_back("commutator");
  } else {
    for (auto block : {FeatureBlock::kRealPart, FeatureBlock::kImagPart})
      for (int q = 0; q < 3; ++q) {
        const auto name = feature_name(f.layout, feature_index(f.layout, {block, q, 0}));
        const auto first = name.find('_') + 1;
        slots.push_back({block, q, 0});
        labels.push_back(name.substr(first, name.rfind("_m") - first));
      }
  }
  std::string csv = a.long_format ? "omega_rad_per_s,quantity,value\n" : "omega_rad_per_s";
  if (!a.long_format) {
    for (const auto& l : labels) csv += "," + l;
    csv += "\n";
  }
  for (int m = 0; m < m_total; ++m) {
    const std::string omega = io::format_double(sig.samples[m].omega);
    if (!a.long_format) csv += omega;
    for (std::size_t c = 0; c < slots.size(); ++c) {
      FeatureSlot slot = slots[c];
      slot.frequency = m;
      const std::string v = io::format_double(f.values[feature_index(f.layout, slot)]);
      if (a.long_format) csv += omega + "," + labels[c] + "," + v + "\n";
      else csv += "," + v;
    }
    if (!a.long_format) csv += "\n";
  }
  emit(out, a.out, csv);
  return kExitOk;
}

// ---- equiv-ellipsoid

struct EquivArgs {
  std::vector<double> eigs;
  double alpha = 0.0, contrast = 0.0;
};

int cmd_equiv(const EquivArgs& a, const Globals& g, std::ostream& out) {
  if (a.eigs.size() != 3) fail("--eigs needs three values");
  const std::array<double, 3> eigs{a.eigs[0], a.eigs[1], a.eigs[2]};
  const Contrast k(a.contrast);
  const auto eq = equivalent_ellipsoid(eigs, a.alpha, k);

  // The minimisation starts from the sphere matching the mean eigenvalue.
  const double mean = (eigs[0] + eigs[1] + eigs[2]) / 3.0;
  const double vol = mean * (2.0 + k.value()) / (3.0 * std::pow(a.alpha, 3) * (k.value() - 1.0));
  const double r0 = vol > 0.0 && std::isfinite(vol) ? std::cbrt(3.0 * vol / (4.0 * std::numbers::pi)) : 1.0;
  const auto mn = equivalent_ellipsoid_minimisation(eigs, a.alpha, k, Ellipsoid(r0, r0, r0));

  json report;
  const auto& r = eq.ellipsoid.radii();
  report["root_finding"] = {{"a", r[0]}, {"b", r[1]}, {"c", r[2]}, {"volume", eq.volume},
                            {"A1", eq.factors.a1}, {"A2", eq.factors.a2}, {"A3", eq.factors.a3},
                            {"residual", eq.residual}, {"iterations", eq.iterations}};
  const auto& s = mn.ellipsoid.radii();
  report["minimisation"] = {{"a", s[0]}, {"b", s[1]}, {"c", s[2]}, {"volume", mn.ellipsoid.volume()},
                            {"objective", mn.objective}, {"iterations", mn.iterations}};
  std::vector<double> gap(3);
  for (int i = 0; i < 3; ++i) gap[i] = std::abs(s[i] - r[i]) / r[i];
  report["relative_discrepancy"] = gap;
  report["agree"] = *std::max_element(gap.begin(), gap.end()) <= g.tol;
  report["tolerance"] = g.tol;
  out << report.dump(2) << "\n";
  return kExitOk;
}

// ---- measure-roundtrip

struct RoundTripArgs {
  std::string layout, signature, out;
  double omega = 0.0, noise = 0.0;
  int trials = 1;
};

int cmd_roundtrip(const RoundTripArgs& a, const Globals& g, std::ostream& out) {
  if (a.trials < 1) fail("--trials must be at least 1");
  const CoilLayout layout = io::parse_layout(io::read_file(a.layout));
  const auto sig = io::parse_signature(io::read_file(a.signature));
  MptSample truth;
  bool interpolated = false;
  const auto hit = std::find_if(sig.samples.begin(), sig.samples.end(), [&](const MptSample& s) {
    return std::abs(s.omega - a.omega) <= 1e-12 * std::max(std::abs(a.omega), 1.0);
  });
  if (hit != sig.samples.end()) {
    truth = *hit;
  } else {
    SnapshotOptions opt;
    opt.rational_fit_tol = g.tol;
    const std::array<double, 1> target{a.omega};
    truth = snapshot_interpolate(sig, target, opt).signature.samples.at(0);
    interpolated = true;
  }
  const auto sys = assemble_system(layout);
  const auto stats = measurement_round_trip(layout, truth, a.noise, a.trials, g.seed);

  json report;
  report["omega_rad_per_s"] = truth.omega;
  report["interpolated"] = interpolated;
  report["noise"] = a.noise;
  report["trials"] = stats.trials;
  report["seed"] = g.seed;
  report["rows"] = sys.a.rows();
  report["rank"] = sys.rank;
  report["condition_number"] = stats.condition_number;
  report["true"] = sample_json(truth);
  report["recovered"] = sample_json(stats.first.mpt);
  report["relative_error"] = {{"mean", stats.mean_error}, {"max", stats.max_error}};
  report["mean_residual"] = stats.mean_residual;
  emit(out, a.out, report.dump(2) + "\n");
  return kExitOk;
}

// ---- dataset

struct DatasetArgs {
  std::string config, out;
};

const json& need(const json& obj, const std::string& key, const std::string& where) {
  if (!obj.is_object()) fail(where + ": expected an object");
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where + ": missing field '" + key + "'");
  return *it;
}

template <class T>
T get(const json& obj, const std::string& key, const std::string& where, T fallback, bool required = false) {
  if (!obj.contains(key)) {
    if (required) fail(where + ": missing field '" + key + "'");
    return fallback;
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception&) {
    fail(where + "." + key + ": wrong type");
  }
}

int cmd_dataset(const DatasetArgs& a, const Globals& g, bool seed_given, std::ostream& out) {
  if (a.out.empty() || a.out == "-") fail("dataset needs --out with a file path");
  json cfg;
  try {
    cfg = json::parse(io::read_file(a.config));
  } catch (const json::parse_error& e) {
    fail(std::string("config: malformed JSON: ") + e.what());
  }
  const std::string w = "config";
  if (!cfg.is_object()) fail("config: expected an object");
  const auto names = get<std::vector<std::string>>(cfg, "classes", w, {}, true);
  if (names.empty()) fail("config.classes: needs at least one class");

  const json& objs = need(cfg, "objects", w);
  if (!objs.is_array() || objs.empty()) fail("config.objects: expected a non-empty array");
  const fs::path base = fs::path(a.config).parent_path();
  std::vector<ClassifiedModel> objects;
  for (std::size_t i = 0; i < objs.size(); ++i) {
    const std::string wo = "config.objects[" + std::to_string(i) + "]";
    const auto cls = get<std::string>(objs[i], "class", wo, "", true);
    const auto it = std::find(names.begin(), names.end(), cls);
    if (it == names.end()) fail(wo + ".class: '" + cls + "' is not listed in classes");
    std::string text;
    if (objs[i].contains("model")) text = objs[i]["model"].dump();
    else if (objs[i].contains("model_file")) text = io::read_file(base / get<std::string>(objs[i], "model_file", wo, ""));
    else fail(wo + ": needs 'model' or 'model_file'");
    try {
      objects.push_back({io::parse_model(text).model, static_cast<int>(it - names.begin())});
    } catch (const Error& e) {
      fail(wo + ": " + e.what());
    }
  }

  const json& om = need(cfg, "omega", w);
  const std::string spacing = get<std::string>(om, "spacing", "config.omega", "log");
  if (spacing != "log" && spacing != "linear") fail("config.omega.spacing: expected log or linear");
  const auto grid = make_grid(get<double>(om, "min", "config.omega", 0, true),
                              get<double>(om, "max", "config.omega", 0, true),
                              get<int>(om, "num", "config.omega", 0, true), spacing == "linear");

  DatasetOptions opt;
  opt.variant = parse_variant(get<std::string>(cfg, "variant", w, "eig"));
  opt.with_commutator = get<bool>(cfg, "with_commutator", w, true);
  const std::string ordering = get<std::string>(cfg, "ordering", w, "sorted");
  opt.ordering = parse_ordering(ordering);
  opt.noise_level = get<double>(cfg, "noise", w, 0.0);
  opt.replicates = get<int>(cfg, "replicates", w, 1);
  opt.seed = seed_given ? g.seed : get<std::uint64_t>(cfg, "seed", w, g.seed);
  opt.threads = g.threads;

  const auto data = build_dataset(objects, names, grid, opt);
  json extra = {{"omegas_rad_per_s", grid},   {"noise_level", opt.noise_level},
                {"replicates", opt.replicates}, {"seed", opt.seed},
                {"ordering", ordering}};
  io::write_file_atomic(a.out, io::format_dataset(data));
  io::write_file_atomic(io::sidecar_path(a.out), io::format_dataset_sidecar(data, extra.dump()));
  out << json{{"rows", data.size()}, {"features", data.layout().size()}, {"classes", names}}.dump(2) << "\n";
  return kExitOk;
}

// ---- classify

struct ClassifyArgs {
  std::string dataset, query, out;
  int k = 3;
  double test_fraction = 0.3;
  bool no_zscore = false;
};

LabeledDataset load_dataset(const std::string& path) {
  return io::parse_dataset(io::read_file(path), io::read_file(io::sidecar_path(path)));
}

int cmd_classify(const ClassifyArgs& a, const Globals& g, std::ostream& out) {
  const auto data = load_dataset(a.dataset);
  LabeledDataset train = data, test = data;
  if (!a.query.empty()) {
    test = load_dataset(a.query);
    if (test.class_names() != data.class_names())
      throw Error(ErrorCode::kIncompatibleFeatures, "query classes differ from the dataset classes");
  } else {
    const auto split = stratified_split(data, a.test_fraction, g.seed);
    train = data.subset(split.train);
    test = data.subset(split.test);
  }
  const auto r = evaluate_knn(train, test, a.k, !a.no_zscore);
  json report;
  report["k"] = a.k;
  report["z_score"] = !a.no_zscore;
  report["seed"] = g.seed;
  report["split"] = a.query.empty() ? "held_out" : "query";
  report["train_rows"] = train.size();
  report["test_rows"] = test.size();
  report["classes"] = data.class_names();
  report["accuracy"] = r.accuracy;
  json per = json::object();
  for (int c = 0; c < data.classes(); ++c) per[data.class_names()[c]] = r.per_class_accuracy[c];
  report["per_class_accuracy"] = per;
  report["confusion"] = r.confusion;
  emit(out, a.out, report.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput:
    case ErrorCode::kInvalidModel:
      return kExitInput;
    case ErrorCode::kConvergence:
      return kExitNonConvergence;
    case ErrorCode::kDegenerateContrast:
    case ErrorCode::kNoEquivalentEllipsoid:
    case ErrorCode::kSingularity:
    case ErrorCode::kUnderdetermined:
    case ErrorCode::kRankDeficient:
    case ErrorCode::kExtrapolation:
    case ErrorCode::kIncompatibleFeatures:
      return kExitInfeasible;
  }
  return kExitInput;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Magnetic polarizability tensor toolkit", "mpt"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  auto* seed_opt = app.add_option("--seed", g.seed, "seed for every random draw");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--tol", g.tol, "agreement / acceptance tolerance")->check(CLI::PositiveNumber);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "synthesize a spectral signature from a modal model");
  s->add_option("--model", synth.model, "model JSON")->required();
  s->add_option("--omega-min", synth.omega_min, "rad/s");
  s->add_option("--omega-max", synth.omega_max, "rad/s");
  s->add_option("--num", synth.num, "number of frequencies");
  s->add_flag("--linear", synth.linear, "linear instead of log spacing");
  s->add_flag("--log", [&](std::int64_t) { synth.linear = false; }, "log spacing (default)");
  s->add_option("--out", synth.out, "output CSV (stdout when omitted)");

  InvariantArgs inv;
  auto* i = app.add_subcommand("invariants", "invariants of a signature against frequency");
  i->add_option("--signature", inv.signature, "signature CSV")->required();
  i->add_option("--set", inv.set, "eig, principal, alternative or commutator");
  i->add_option("--ordering", inv.ordering, "eigenvalue pairing: sorted or tracked");
  i->add_flag("--long", inv.long_format, "one (omega, quantity, value) row per value");
  i->add_option("--out", inv.out, "output CSV (stdout when omitted)");

  EquivArgs eq;
  auto* e = app.add_subcommand("equiv-ellipsoid", "equivalent ellipsoid of three eigenvalues");
  e->add_option("--eigs", eq.eigs, "three eigenvalues, m^3")->expected(3)->required();
  e->add_option("--alpha", eq.alpha, "object size, m")->required();
  e->add_option("--contrast", eq.contrast, "mu_r, or 0 for the perfectly conducting limit")->required();

  RoundTripArgs rt;
  auto* m = app.add_subcommand("measure-roundtrip", "simulate voltages and recover the tensor");
  m->add_option("--layout", rt.layout, "coil layout JSON")->required();
  m->add_option("--signature", rt.signature, "signature CSV")->required();
  m->add_option("--omega", rt.omega, "rad/s")->required();
  m->add_option("--noise", rt.noise, "relative voltage noise");
  m->add_option("--trials", rt.trials, "noise realisations");
  m->add_option("--out", rt.out, "output JSON (stdout when omitted)");

  DatasetArgs ds;
  auto* d = app.add_subcommand("dataset", "build a labelled feature dataset");
  d->add_option("--config", ds.config, "dataset config JSON")->required();
  d->add_option("--out", ds.out, "dataset CSV; the sidecar goes to <out>.json")->required();

  ClassifyArgs cl;
  auto* c = app.add_subcommand("classify", "k nearest neighbour classification report");
  c->add_option("--dataset", cl.dataset, "dataset CSV")->required();
  c->add_option("--query", cl.query, "labelled query dataset; held-out split when omitted");
  c->add_option("--k", cl.k, "neighbours");
  c->add_option("--test-fraction", cl.test_fraction, "held-out fraction per class");
  c->add_flag("--no-zscore", cl.no_zscore, "use raw feature distances");
  c->add_option("--out", cl.out, "output JSON (stdout when omitted)");

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (s->parsed()) return cmd_synth(synth, g, out);
    if (i->parsed()) return cmd_invariants(inv, out);
    if (e->parsed()) return cmd_equiv(eq, g, out);
    if (m->parsed()) return cmd_roundtrip(rt, g, out);
    if (d->parsed()) return cmd_dataset(ds, g, seed_opt->count() > 0, out);
    if (c->parsed()) return cmd_classify(cl, g, out);
  } catch (const Error& ex) {
    err << "error (" << to_string(ex.code()) << "): " << ex.what() << "\n";
    return exit_code(ex.code());
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace mpt::cli
