#pragma once

#include <array>

#include "mpt/tensor.hpp"

namespace mpt {

// Unit-scale ellipsoid with semi-axes sorted so that a >= b >= c > 0.
class Ellipsoid {
 public:
  // Sorts the radii descending; throws kInvalidInput on non-positive radii.
  Ellipsoid(double r1, double r2, double r3);

  double a() const { return r_[0]; }
  double b() const { return r_[1]; }
  double c() const { return r_[2]; }
  const std::array<double, 3>& radii() const { return r_; }
  double volume() const;

 private:
  std::array<double, 3> r_;
};

struct DemagFactors {
  double a1 = 0, a2 = 0, a3 = 0;
  // Set when the aspect ratio exceeds 1e6 or the quadrature error estimate
  // is above 1e-10; the values are still returned.
  bool accuracy_warning = false;
  double sum() const { return a1 + a2 + a3; }
};

enum class DemagBackend {
  kQuadrature,  // adaptive Gauss-Kronrod after mapping t in [1, inf) to s = 1/t
  kCarlson,     // closed form through the symmetric integral R_D
};

DemagFactors demag_factors(const Ellipsoid& e, DemagBackend backend = DemagBackend::kQuadrature);

// Demagnetisation factors of the ellipsoid with semi-axes (1, b_over_a,
// c_over_a). No ordering is assumed; a1 always belongs to the unit axis.
DemagFactors demag_factors_from_ratios(double b_over_a, double c_over_a,
                                       DemagBackend backend = DemagBackend::kQuadrature);

// Carlson's symmetric elliptic integral of the second kind,
// R_D(x, y, z) = 3/2 int_0^inf dt / ((t+z) sqrt((t+x)(t+y)(t+z))).
double carlson_rd(double x, double y, double z);

// Material contrast k >= 0 (mu_r for the magnetostatic limit, 0 for the
// perfectly conducting limit).
class Contrast {
 public:
  explicit Contrast(double k);
  double value() const { return k_; }

 private:
  double k_;
};

// Diagonal Polya-Szego tensor alpha^3 (k-1) |E| / (1 - A_i + k A_i) of the
// scaled ellipsoid; throws kDegenerateContrast for k == 1.
SymmetricTensor3 polya_szego(double alpha, const Ellipsoid& e, Contrast k,
                             DemagBackend backend = DemagBackend::kQuadrature);

struct EquivalentEllipsoid {
  Ellipsoid ellipsoid{1, 1, 1};
  double volume = 0.0;       // |E| recovered from the eigenvalues
  DemagFactors factors;      // A_i recovered from the eigenvalues
  double residual = 0.0;     // max_i |T_ii - Lambda_i| / |Lambda_i|
  int iterations = 0;
};

// Inverts three eigenvalues of N0 (k = mu_r) or of the high-frequency limit
// (k = 0) to the unique ellipsoid with the same Polya-Szego tensor.
// Throws kNoEquivalentEllipsoid when the eigenvalues are not realisable and
// ConvergenceError if the axis-ratio solve stalls.
EquivalentEllipsoid equivalent_ellipsoid(std::array<double, 3> eigs, double alpha, Contrast k);

struct MinimisationResult {
  Ellipsoid ellipsoid{1, 1, 1};
  double objective = 0.0;  // sum_i ((T_ii - Lambda_i) / Lambda_i)^2
  int iterations = 0;
};

// Levenberg-Marquardt fit of the radii to the eigenvalues, starting from
// `start`. Shares only the forward Polya-Szego map with equivalent_ellipsoid.
MinimisationResult equivalent_ellipsoid_minimisation(std::array<double, 3> eigs, double alpha,
                                                     Contrast k, const Ellipsoid& start);

}  // namespace mpt
