#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mpt/spectral.hpp"

namespace mpt {

enum class FeatureVariant { kEig, kPrincipal, kAlternative };

// How eigenvalues are paired across frequency in the eig variant.
enum class EigenOrdering {
  kSortedDescending,
  // Frequency m + 1 reuses the permutation of its eigenpairs whose
  // eigenvectors best overlap those of frequency m.
  kContinuityTracked,
};

const char* to_string(FeatureVariant v);
FeatureVariant parse_variant(const std::string& name);

// Index map for M frequencies:
//   [0, 3M)    R~ quantity j at frequency m -> 3m + j
//   [3M, 6M)   I  quantity j at frequency m -> 3M + 3m + j
//   [6M, 7M)   commutator invariant at frequency m -> 6M + m
struct FeatureLayout {
  FeatureVariant variant = FeatureVariant::kEig;
  int frequencies = 0;
  bool with_commutator = false;

  int size() const { return (with_commutator ? 7 : 6) * frequencies; }
  friend bool operator==(const FeatureLayout&, const FeatureLayout&) = default;
};

enum class FeatureBlock { kRealPart, kImagPart, kCommutator };

struct FeatureSlot {
  FeatureBlock block = FeatureBlock::kRealPart;
  int quantity = 0;   // 0..2 within a part, 0 for the commutator
  int frequency = 0;  // 0..M-1
};

FeatureSlot feature_slot(const FeatureLayout& layout, int index);
int feature_index(const FeatureLayout& layout, const FeatureSlot& slot);
// Column name such as "eig_Rt_l1_m0", "alternative_I_J2_m3" or "commutator_m2".
std::string feature_name(const FeatureLayout& layout, int index);

struct FeatureVector {
  FeatureLayout layout;
  std::vector<double> values;
};

FeatureVector features_from_signature(const MptSignature& sig, FeatureVariant variant,
                                      bool with_commutator,
                                      EigenOrdering ordering = EigenOrdering::kSortedDescending);

struct ClassTarget {
  std::vector<double> t;
  int class_index() const;
};

ClassTarget one_of_k(int class_index, int k_total);

class LabeledDataset {
 public:
  LabeledDataset(FeatureLayout layout, std::vector<std::string> class_names);

  // Throws kIncompatibleFeatures on a layout mismatch and kInvalidInput when
  // the target does not have one entry per class.
  void add(FeatureVector x, ClassTarget t);

  const FeatureLayout& layout() const { return layout_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  int classes() const { return static_cast<int>(class_names_.size()); }
  std::size_t size() const { return x_.size(); }
  const FeatureVector& x(std::size_t p) const { return x_[p]; }
  const ClassTarget& t(std::size_t p) const { return t_[p]; }
  int label(std::size_t p) const { return t_[p].class_index(); }

  LabeledDataset subset(std::span<const std::size_t> rows) const;

 private:
  FeatureLayout layout_;
  std::vector<std::string> class_names_;
  std::vector<FeatureVector> x_;
  std::vector<ClassTarget> t_;
};

struct KnnPrediction {
  std::vector<double> probabilities;  // class frequencies among the k neighbours
  int predicted = 0;  // most votes, then smaller mean distance, then lower index
};

// Euclidean k nearest neighbours. With `z_score`, features are standardised by
// the training mean and standard deviation; constant features keep scale 1.
// Equidistant neighbours are taken in dataset order.
KnnPrediction knn_classify(const LabeledDataset& train, const FeatureVector& query, int k,
                           bool z_score = true);

struct ClassifiedModel {
  ModalModel model;
  int class_index = 0;
};

struct DatasetOptions {
  FeatureVariant variant = FeatureVariant::kEig;
  bool with_commutator = true;
  EigenOrdering ordering = EigenOrdering::kSortedDescending;
  double noise_level = 0.0;
  int replicates = 1;
  std::uint64_t seed = 0;
  int threads = 1;
};

// Row p = object * replicates + r. Sample m of row p is perturbed by add_noise
// with seed derive_seed(derive_seed(seed, p), m).
LabeledDataset build_dataset(const std::vector<ClassifiedModel>& objects,
                             const std::vector<std::string>& class_names,
                             std::span<const double> omegas, const DatasetOptions& options);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Shuffles each class independently and holds out round(test_fraction * n_c)
// rows of it, at least one when the class has two or more rows.
Split stratified_split(const LabeledDataset& data, double test_fraction, std::uint64_t seed);

struct ClassificationReport {
  std::vector<std::vector<int>> confusion;  // [true][predicted]
  std::vector<double> per_class_accuracy;   // NaN for classes absent from the test rows
  double accuracy = 0.0;
  std::size_t tested = 0;
};

ClassificationReport evaluate_knn(const LabeledDataset& train, const LabeledDataset& test, int k,
                                  bool z_score = true);

}  // namespace mpt
