#include "mpt/features.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <exception>
#include <numeric>
#include <random>
#include <thread>

#include "mpt/error.hpp"
#include "mpt/measurement.hpp"
#include "mpt/random.hpp"

namespace mpt {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

constexpr std::array<std::array<int, 3>, 6> kPermutations{{
    {0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0},
}};

// Pairs the eigenvalues of each frequency with those of the previous one by
// maximal eigenvector overlap. Sorted order wins unless another permutation
// is clearly better.
class ContinuityTracker {
 public:
  std::array<double, 3> next(const SymmetricTensor3& t) {
    const auto e = eig_sym3(t);
    std::array<int, 3> best = kPermutations[0];
    if (started_) {
      double best_score = -1.0;
      for (const auto& p : kPermutations) {
        double score = 0.0;
        for (int j = 0; j < 3; ++j) {
          const double c = basis_.col(j).dot(e.basis.col(p[j]));
          score += c * c;
        }
        if (score > best_score + 1e-12) {
          best_score = score;
          best = p;
        }
      }
    }
    std::array<double, 3> out{};
    for (int j = 0; j < 3; ++j) {
      out[j] = e.eigenvalues[best[j]];
      basis_.col(j) = e.basis.col(best[j]);
    }
    started_ = true;
    return out;
  }

 private:
  bool started_ = false;
  Mat3 basis_ = Mat3::Identity();
};

std::array<double, 3> part_quantities(const SymmetricTensor3& t, FeatureVariant v) {
  switch (v) {
    case FeatureVariant::kEig:
      return eig_sym3(t).eigenvalues;
    case FeatureVariant::kPrincipal: {
      const auto p = principal_invariants(t);
      return {p.i1, p.i2, p.i3};
    }
    case FeatureVariant::kAlternative: {
      const auto a = alternative_invariants(t);
      return {a.i1, a.j2, a.j3};
    }
  }
  return {};
}

const char* quantity_name(FeatureVariant v, int j) {
  static constexpr const char* kEig[] = {"l1", "l2", "l3"};
  static constexpr const char* kPrincipal[] = {"I1", "I2", "I3"};
  static constexpr const char* kAlternative[] = {"I1", "J2", "J3"};
  switch (v) {
    case FeatureVariant::kEig: return kEig[j];
    case FeatureVariant::kPrincipal: return kPrincipal[j];
    case FeatureVariant::kAlternative: return kAlternative[j];
  }
  return "";
}

// Runs body(i) for i in [0, n) over up to `threads` workers and rethrows the
// first failure.
template <class F>
void parallel_for(std::size_t n, int threads, F body) {
  const std::size_t workers = std::clamp<std::size_t>(threads < 1 ? 1 : threads, 1, std::max<std::size_t>(n, 1));
  std::vector<std::exception_ptr> errors(workers);
  auto run = [&](std::size_t w) {
    try {
      for (std::size_t i = w * n / workers; i < (w + 1) * n / workers; ++i) body(i);
    } catch (...) {
      errors[w] = std::current_exception();
    }
  };
  if (workers == 1) {
    run(0);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

const char* to_string(FeatureVariant v) {
  switch (v) {
    case FeatureVariant::kEig: return "eig";
    case FeatureVariant::kPrincipal: return "principal";
    case FeatureVariant::kAlternative: return "alternative";
  }
  return "";
}

FeatureVariant parse_variant(const std::string& name) {
  if (name == "eig") return FeatureVariant::kEig;
  if (name == "principal") return FeatureVariant::kPrincipal;
  if (name == "alternative") return FeatureVariant::kAlternative;
  throw Error(ErrorCode::kInvalidInput, "unknown feature variant '" + name + "'");
}

FeatureSlot feature_slot(const FeatureLayout& layout, int index) {
  const int m = layout.frequencies;
  require(index >= 0 && index < layout.size(), ErrorCode::kInvalidInput, "feature index out of range");
  if (index < 3 * m) return {FeatureBlock::kRealPart, index % 3, index / 3};
  if (index < 6 * m) return {FeatureBlock::kImagPart, (index - 3 * m) % 3, (index - 3 * m) / 3};
  return {FeatureBlock::kCommutator, 0, index - 6 * m};
}

int feature_index(const FeatureLayout& layout, const FeatureSlot& slot) {
  const int m = layout.frequencies;
  require(slot.frequency >= 0 && slot.frequency < m, ErrorCode::kInvalidInput, "frequency out of range");
  switch (slot.block) {
    case FeatureBlock::kRealPart:
    case FeatureBlock::kImagPart: {
      require(slot.quantity >= 0 && slot.quantity < 3, ErrorCode::kInvalidInput, "quantity out of range");
      const int base = slot.block == FeatureBlock::kRealPart ? 0 : 3 * m;
      return base + 3 * slot.frequency + slot.quantity;
    }
    case FeatureBlock::kCommutator:
      require(layout.with_commutator && slot.quantity == 0, ErrorCode::kInvalidInput,
              "layout has no such commutator feature");
      return 6 * m + slot.frequency;
  }
  return -1;
}

std::string feature_name(const FeatureLayout& layout, int index) {
  const auto s = feature_slot(layout, index);
  const std::string freq = "_m" + std::to_string(s.frequency);
  if (s.block == FeatureBlock::kCommutator) return "commutator" + freq;
  const std::string part = s.block == FeatureBlock::kRealPart ? "Rt" : "I";
  return std::string(to_string(layout.variant)) + "_" + part + "_" +
         quantity_name(layout.variant, s.quantity) + freq;
}

FeatureVector features_from_signature(const MptSignature& sig, FeatureVariant variant,
                                      bool with_commutator, EigenOrdering ordering) {
  require(!sig.samples.empty(), ErrorCode::kInvalidInput, "signature has no samples");
  const int m_total = static_cast<int>(sig.samples.size());
  FeatureVector f;
  f.layout = {variant, m_total, with_commutator};
  f.values.assign(f.layout.size(), 0.0);
  const bool track = variant == FeatureVariant::kEig && ordering == EigenOrdering::kContinuityTracked;
  ContinuityTracker real_tracker, imag_tracker;
  for (int m = 0; m < m_total; ++m) {
    const auto& s = sig.samples[m];
    require(s.r_tilde.is_finite() && s.i_part.is_finite(), ErrorCode::kInvalidInput,
            "signature sample " + std::to_string(m) + " is not finite");
    const auto r = track ? real_tracker.next(s.r_tilde) : part_quantities(s.r_tilde, variant);
    const auto i = track ? imag_tracker.next(s.i_part) : part_quantities(s.i_part, variant);
    for (int j = 0; j < 3; ++j) {
      f.values[3 * m + j] = r[j];
      f.values[3 * m_total + 3 * m + j] = i[j];
    }
    if (with_commutator)
      f.values[6 * m_total + m] = commutator_invariant(commutator(s.r_tilde, s.i_part));
  }
  return f;
}

int ClassTarget::class_index() const {
  return static_cast<int>(std::max_element(t.begin(), t.end()) - t.begin());
}

ClassTarget one_of_k(int class_index, int k_total) {
  require(k_total >= 1 && class_index >= 0 && class_index < k_total, ErrorCode::kInvalidInput,
          "class index " + std::to_string(class_index) + " outside [0, " + std::to_string(k_total) + ")");
  ClassTarget c;
  c.t.assign(k_total, 0.0);
  c.t[class_index] = 1.0;
  return c;
}

LabeledDataset::LabeledDataset(FeatureLayout layout, std::vector<std::string> class_names)
    : layout_(layout), class_names_(std::move(class_names)) {
  require(layout_.frequencies >= 1, ErrorCode::kInvalidInput, "layout needs at least one frequency");
  require(!class_names_.empty(), ErrorCode::kInvalidInput, "dataset needs at least one class");
}

void LabeledDataset::add(FeatureVector x, ClassTarget t) {
  require(x.layout == layout_ && static_cast<int>(x.values.size()) == layout_.size(),
          ErrorCode::kIncompatibleFeatures, "feature vector layout does not match the dataset");
  require(static_cast<int>(t.t.size()) == classes(), ErrorCode::kInvalidInput,
          "target length does not match the class count");
  x_.push_back(std::move(x));
  t_.push_back(std::move(t));
}

LabeledDataset LabeledDataset::subset(std::span<const std::size_t> rows) const {
  LabeledDataset out(layout_, class_names_);
  for (auto p : rows) {
    require(p < size(), ErrorCode::kInvalidInput, "row index out of range");
    out.add(x_[p], t_[p]);
  }
  return out;
}

KnnPrediction knn_classify(const LabeledDataset& train, const FeatureVector& query, int k,
                           bool z_score) {
  require(query.layout == train.layout() &&
              static_cast<int>(query.values.size()) == train.layout().size(),
          ErrorCode::kIncompatibleFeatures, "query layout does not match the training set");
  const std::size_t n = train.size();
  require(n > 0, ErrorCode::kInvalidInput, "training set is empty");
  require(k >= 1 && static_cast<std::size_t>(k) <= n, ErrorCode::kInvalidInput,
          "k must lie in [1, training size]");
  const std::size_t f = query.values.size();

  std::vector<double> mean(f, 0.0), scale(f, 1.0);
  if (z_score) {
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t j = 0; j < f; ++j) mean[j] += train.x(p).values[j];
    for (auto& v : mean) v /= static_cast<double>(n);
    std::vector<double> var(f, 0.0);
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t j = 0; j < f; ++j) {
        const double d = train.x(p).values[j] - mean[j];
        var[j] += d * d;
      }
    for (std::size_t j = 0; j < f; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      scale[j] = sd > 0.0 ? sd : 1.0;
    }
  }

  std::vector<double> dist(n);
  for (std::size_t p = 0; p < n; ++p) {
    double s = 0.0;
    for (std::size_t j = 0; j < f; ++j) {
      const double d = (train.x(p).values[j] - query.values[j]) / scale[j];
      s += d * d;
    }
    dist[p] = std::sqrt(s);
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dist[a] < dist[b]; });

  const int kc = train.classes();
  std::vector<int> votes(kc, 0);
  std::vector<double> total(kc, 0.0);
  for (int q = 0; q < k; ++q) {
    const int c = train.label(order[q]);
    ++votes[c];
    total[c] += dist[order[q]];
  }
  KnnPrediction out;
  out.probabilities.resize(kc);
  for (int c = 0; c < kc; ++c) out.probabilities[c] = static_cast<double>(votes[c]) / k;
  int best = -1;
  for (int c = 0; c < kc; ++c) {
    if (votes[c] == 0) continue;
    if (best < 0 || votes[c] > votes[best] ||
        (votes[c] == votes[best] && total[c] / votes[c] < total[best] / votes[best]))
      best = c;
  }
  out.predicted = best;
  return out;
}

LabeledDataset build_dataset(const std::vector<ClassifiedModel>& objects,
                             const std::vector<std::string>& class_names,
                             std::span<const double> omegas, const DatasetOptions& options) {
  require(!objects.empty(), ErrorCode::kInvalidInput, "dataset needs at least one object");
  require(!omegas.empty(), ErrorCode::kInvalidInput, "frequency grid is empty");
  require(std::is_sorted(omegas.begin(), omegas.end()), ErrorCode::kInvalidInput,
          "frequencies must be sorted ascending");
  require(options.replicates >= 1, ErrorCode::kInvalidInput, "replicates must be at least 1");
  require(std::isfinite(options.noise_level) && options.noise_level >= 0.0, ErrorCode::kInvalidInput,
          "noise level must be finite and non-negative");
  const int kc = static_cast<int>(class_names.size());
  for (const auto& o : objects)
    require(o.class_index >= 0 && o.class_index < kc, ErrorCode::kInvalidInput,
            "object class index outside the class list");

  std::vector<MptSignature> sigs(objects.size());
  parallel_for(objects.size(), options.threads,
               [&](std::size_t i) { sigs[i] = synthesize(objects[i].model, omegas); });

  const std::size_t reps = options.replicates;
  const std::size_t rows = objects.size() * reps;
  std::vector<FeatureVector> x(rows);
  parallel_for(rows, options.threads, [&](std::size_t p) {
    MptSignature s = sigs[p / reps];
    if (options.noise_level > 0.0) {
      const std::uint64_t row_seed = derive_seed(options.seed, p);
      for (std::size_t m = 0; m < s.samples.size(); ++m)
        s.samples[m] = add_noise(s.samples[m], options.noise_level, derive_seed(row_seed, m));
    }
    x[p] = features_from_signature(s, options.variant, options.with_commutator, options.ordering);
  });

  LabeledDataset data(FeatureLayout{options.variant, static_cast<int>(omegas.size()), options.with_commutator},
                      class_names);
  for (std::size_t p = 0; p < rows; ++p)
    data.add(std::move(x[p]), one_of_k(objects[p / reps].class_index, kc));
  return data;
}

Split stratified_split(const LabeledDataset& data, double test_fraction, std::uint64_t seed) {
  require(test_fraction > 0.0 && test_fraction < 1.0, ErrorCode::kInvalidInput,
          "test fraction must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  Split s;
  for (int c = 0; c < data.classes(); ++c) {
    std::vector<std::size_t> rows;
    for (std::size_t p = 0; p < data.size(); ++p)
      if (data.label(p) == c) rows.push_back(p);
    std::shuffle(rows.begin(), rows.end(), rng);
    const std::size_t n = rows.size();
    std::size_t hold = static_cast<std::size_t>(std::lround(test_fraction * static_cast<double>(n)));
    if (n >= 2) hold = std::clamp<std::size_t>(hold, 1, n - 1);
    else hold = 0;
    s.test.insert(s.test.end(), rows.begin(), rows.begin() + hold);
    s.train.insert(s.train.end(), rows.begin() + hold, rows.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

ClassificationReport evaluate_knn(const LabeledDataset& train, const LabeledDataset& test, int k,
                                  bool z_score) {
  require(train.layout() == test.layout(), ErrorCode::kIncompatibleFeatures,
          "training and test layouts differ");
  require(train.classes() == test.classes(), ErrorCode::kIncompatibleFeatures,
          "training and test class counts differ");
  const int kc = train.classes();
  ClassificationReport r;
  r.confusion.assign(kc, std::vector<int>(kc, 0));
  std::size_t correct = 0;
  for (std::size_t p = 0; p < test.size(); ++p) {
    const int truth = test.label(p);
    const int guess = knn_classify(train, test.x(p), k, z_score).predicted;
    ++r.confusion[truth][guess];
    if (truth == guess) ++correct;
  }
  r.tested = test.size();
  r.accuracy = r.tested ? static_cast<double>(correct) / r.tested : NAN;
  r.per_class_accuracy.resize(kc);
  for (int c = 0; c < kc; ++c) {
    const int n = std::accumulate(r.confusion[c].begin(), r.confusion[c].end(), 0);
    r.per_class_accuracy[c] = n ? static_cast<double>(r.confusion[c][c]) / n : NAN;
  }
  return r;
}

}  // namespace mpt
