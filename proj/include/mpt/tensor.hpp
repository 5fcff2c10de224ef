#pragma once

#include <array>

#include <Eigen/Dense>

namespace mpt {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

// Real symmetric rank-2 tensor stored as its six independent coefficients in
// the order c11, c22, c33, c12, c13, c23. Symmetry is structural.
class SymmetricTensor3 {
 public:
  static constexpr int kSize = 6;

  constexpr SymmetricTensor3() = default;
  constexpr SymmetricTensor3(double c11, double c22, double c33, double c12,
                             double c13, double c23)
      : c_{c11, c22, c33, c12, c13, c23} {}
  explicit constexpr SymmetricTensor3(const std::array<double, kSize>& c) : c_(c) {}

  static constexpr SymmetricTensor3 zero() { return {}; }
  static constexpr SymmetricTensor3 identity() { return {1, 1, 1, 0, 0, 0}; }
  static constexpr SymmetricTensor3 diagonal(double d1, double d2, double d3) {
    return {d1, d2, d3, 0, 0, 0};
  }
  // Builds from the upper triangle of `m`; throws kInvalidInput when `m` is
  // not symmetric to `rel_tol` relative to its largest entry.
  static SymmetricTensor3 from_matrix(const Mat3& m, double rel_tol = 1e-12);

  double c11() const { return c_[0]; }
  double c22() const { return c_[1]; }
  double c33() const { return c_[2]; }
  double c12() const { return c_[3]; }
  double c13() const { return c_[4]; }
  double c23() const { return c_[5]; }

  // (i, j) access with zero-based indices in [0, 3).
  double operator()(int i, int j) const;

  const std::array<double, kSize>& coefficients() const { return c_; }
  double& operator[](int k) { return c_[k]; }
  double operator[](int k) const { return c_[k]; }

  Mat3 to_matrix() const;
  double trace() const { return c_[0] + c_[1] + c_[2]; }
  double frobenius_norm() const;
  double max_abs() const;
  bool is_finite() const;
  bool is_diagonal() const { return c_[3] == 0.0 && c_[4] == 0.0 && c_[5] == 0.0; }

  SymmetricTensor3& operator+=(const SymmetricTensor3& o);
  SymmetricTensor3& operator-=(const SymmetricTensor3& o);
  SymmetricTensor3& operator*=(double s);

  friend SymmetricTensor3 operator+(SymmetricTensor3 a, const SymmetricTensor3& b) { return a += b; }
  friend SymmetricTensor3 operator-(SymmetricTensor3 a, const SymmetricTensor3& b) { return a -= b; }
  friend SymmetricTensor3 operator*(SymmetricTensor3 a, double s) { return a *= s; }
  friend SymmetricTensor3 operator*(double s, SymmetricTensor3 a) { return a *= s; }
  friend bool operator==(const SymmetricTensor3&, const SymmetricTensor3&) = default;

 private:
  std::array<double, kSize> c_{};
};

// One point of a spectral signature: Re M and Im M at angular frequency omega.
struct MptSample {
  double omega = 0.0;  // rad/s
  SymmetricTensor3 r_tilde;
  SymmetricTensor3 i_part;
};

struct EigenDecomposition {
  std::array<double, 3> eigenvalues{};  // descending
  Mat3 basis = Mat3::Identity();        // columns are unit eigenvectors
};

struct PrincipalInvariants {
  double i1 = 0, i2 = 0, i3 = 0;
};

struct AlternativeInvariants {
  double i1 = 0, j2 = 0, j3 = 0;
};

struct InvariantTriple {
  double i1 = 0, i2 = 0, i3 = 0;
  double j2 = 0, j3 = 0;
};

// Closed-form trigonometric solve; switches to cyclic Jacobi when two
// eigenvalues are closer than 1e-8 * ||t||_F. Eigenvectors have their
// largest-magnitude component positive (lowest index wins ties).
EigenDecomposition eig_sym3(const SymmetricTensor3& t);
EigenDecomposition eig_sym3_jacobi(const SymmetricTensor3& t);

PrincipalInvariants principal_invariants(const SymmetricTensor3& t);
AlternativeInvariants alternative_invariants(const SymmetricTensor3& t);
InvariantTriple invariants(const SymmetricTensor3& t);

// max_k |l^3 - i1 l^2 + i2 l - i3| over the eigenvalues, divided by the sum of
// the magnitudes of the four terms.
double characteristic_residual(const SymmetricTensor3& t);

// Z = R I - I R, skew by construction with an exactly zero diagonal.
Mat3 commutator(const SymmetricTensor3& r_tilde, const SymmetricTensor3& i_part);
// sqrt(Z12^2 + Z13^2 + Z23^2); rejects z whose symmetric part exceeds 1e-12
// of its largest entry.
double commutator_invariant(const Mat3& z);

// Throws kInvalidInput unless r is orthogonal with det +1 to 1e-10.
void check_rotation(const Mat3& r);
SymmetricTensor3 rotate(const SymmetricTensor3& t, const Mat3& r);
MptSample rotate(const MptSample& s, const Mat3& r);
Mat3 axis_angle_rotation(const Vec3& axis, double angle);

struct OffDiagonalBoundReport {
  bool real_holds = true;
  bool imag_holds = true;
  double worst_real_ratio = 0.0;  // max |R~_ij| / (|tr(R~ - N0)| + |tr N0|)
  double worst_imag_ratio = 0.0;  // max I_ij / tr I
  bool holds() const { return real_holds && imag_holds; }
};

// Off-diagonal trace bounds for a sample generated from nonnegative modal
// weights. Returns a report rather than throwing; arbitrary measured data may
// legitimately fail it.
OffDiagonalBoundReport check_offdiagonal_bounds(const SymmetricTensor3& r_tilde,
                                                const SymmetricTensor3& i_part,
                                                const SymmetricTensor3& n0,
                                                double rel_slack = 1e-12);

struct PerturbationReport {
  double eigenvalue_shift_sq = 0.0;  // sum_i (l_i(A+E) - l_i(A))^2
  double frobenius_sq = 0.0;         // ||E||_F^2
  double reference_norm_sq = 0.0;    // ||A||_F^2, sets the rounding floor
  double min_gap = 0.0;              // smallest eigenvalue gap of A
  std::array<double, 3> eigenvector_distance{};  // sqrt(1 - (q_i . q_i')^2)
  // Bound checked with a relative slack of 1e-12 plus a rounding floor.
  bool bound_holds() const {
    return eigenvalue_shift_sq <=
           frobenius_sq * (1.0 + 1e-12) + 1e-28 * reference_norm_sq;
  }
};

PerturbationReport perturbation_diagnostics(const SymmetricTensor3& a,
                                            const SymmetricTensor3& e);

}  // namespace mpt
