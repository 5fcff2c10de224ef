#pragma once

#include <complex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpt/tensor.hpp"

namespace mpt {

inline constexpr double kMu0 = 4.0e-7 * 3.14159265358979323846;  // H/m

struct Mode {
  double lambda = 1.0;    // eigenvalue of the modal problem, > 0
  SymmetricTensor3 weight;  // positive semidefinite modal weight
};

// Truncated modal expansion of an object's MPT. Construction validates and
// sorts the modes ascending in lambda.
class ModalModel {
 public:
  ModalModel(double alpha, double sigma_star, double mu_r, SymmetricTensor3 n0,
             std::vector<Mode> modes, std::string label = {});

  double alpha() const { return alpha_; }
  double sigma_star() const { return sigma_star_; }
  double mu_r() const { return mu_r_; }
  const SymmetricTensor3& n0() const { return n0_; }
  const std::vector<Mode>& modes() const { return modes_; }
  const std::string& label() const { return label_; }

  // Same material and size, with N0 and every weight rotated by r.
  ModalModel rotated(const Mat3& r) const;

 private:
  double alpha_;
  double sigma_star_;
  double mu_r_;
  SymmetricTensor3 n0_;
  std::vector<Mode> modes_;
  std::string label_;
};

struct MptSignature {
  double alpha = 0.0;       // m
  double sigma_star = 0.0;  // S/m
  double mu_r = 1.0;
  std::string label;
  std::optional<double> omega_limit;  // rad/s
  std::vector<MptSample> samples;     // ascending in omega
};

// nu = alpha^2 omega mu0 sigma_star.
double nu(double alpha, double omega, double sigma_star);

// -nu^2 / (nu^2 + l^2) + i nu l / (nu^2 + l^2).
std::complex<double> beta(double nu, double lambda_n);

// Samples M = N0 + R + iI at each omega; omega = 0 returns (N0, 0) exactly.
// Frequencies are evaluated on up to `threads` workers; output order and
// values do not depend on the thread count.
MptSignature synthesize(const ModalModel& model, std::span<const double> omegas, int threads = 1);
MptSample synthesize_at(const ModalModel& model, double omega);

// Analytic omega -> infinity limit (N0 - alpha^3/4 sum_n w_n, 0).
MptSample high_frequency_limit(const ModalModel& model);

struct EddyLimitParams {
  double c1 = 1.0;
  double c2 = 1.0;
  double eps_max = 8.854e-12;  // F/m
  double mu_max = kMu0;        // H/m
  double sigma_min = 1.0;      // S/m
  double d = 0.01;             // m
  double threshold = 0.01;     // what "much less than 1" means
};

// Largest omega for which both eddy-current validity inequalities stay below
// the threshold.
double eddy_limit(const EddyLimitParams& p);

std::vector<double> log_spaced(double lo, double hi, int n);
std::vector<double> lin_spaced(double lo, double hi, int n);

enum class InterpolationScheme {
  kAuto,           // rational if it validates on held-out snapshots, else monotone cubic
  kRational,       // common-denominator barycentric rational in omega
  kMonotoneCubic,  // piecewise cubic Hermite (Fritsch-Carlson) over log omega
};

struct SnapshotOptions {
  double truncation_tol = 1e-12;  // drop singular values with s_k / s_1 below this
  InterpolationScheme scheme = InterpolationScheme::kAuto;
  double rational_fit_tol = 1e-5;  // leave-one-out residual needed to accept the rational fit
};

struct SnapshotFit {
  MptSignature signature;
  int retained_modes = 0;
  InterpolationScheme scheme_used = InterpolationScheme::kMonotoneCubic;
  double held_out_residual = 0.0;  // rational leave-one-out residual at interior snapshots
};

// Predicts the signature at `targets` from snapshots at N >= 4 frequencies
// (all > 0). Throws kExtrapolation for targets outside the snapshot band.
SnapshotFit snapshot_interpolate(const MptSignature& snapshots, std::span<const double> targets,
                                 const SnapshotOptions& options = {});

// Relative error at each interior snapshot when it is left out of the fit,
// normalised per coefficient by its largest magnitude over the snapshots.
std::vector<double> leave_one_out_error(const MptSignature& snapshots,
                                        const SnapshotOptions& options = {});

}  // namespace mpt
