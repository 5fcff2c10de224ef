#include "mpt/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mpt/error.hpp"

namespace mpt {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidInput: return "invalid input";
    case ErrorCode::kInvalidModel: return "invalid model";
    case ErrorCode::kDegenerateContrast: return "degenerate contrast";
    case ErrorCode::kNoEquivalentEllipsoid: return "no equivalent ellipsoid";
    case ErrorCode::kConvergence: return "convergence failure";
    case ErrorCode::kSingularity: return "singularity";
    case ErrorCode::kUnderdetermined: return "underdetermined";
    case ErrorCode::kRankDeficient: return "rank deficient";
    case ErrorCode::kExtrapolation: return "extrapolation";
    case ErrorCode::kIncompatibleFeatures: return "incompatible features";
  }
  return "unknown";
}

namespace {

constexpr int kRow[6] = {0, 1, 2, 0, 0, 1};
constexpr int kCol[6] = {0, 1, 2, 1, 2, 2};

void require_finite(const SymmetricTensor3& t) {
  if (!t.is_finite()) {
    throw Error(ErrorCode::kInvalidInput, "tensor has non-finite coefficients");
  }
}

// Largest-magnitude component positive; the first index wins ties.
void canonical_sign(Mat3& basis) {
  for (int k = 0; k < 3; ++k) {
    int best = 0;
    for (int i = 1; i < 3; ++i) {
      if (std::abs(basis(i, k)) > std::abs(basis(best, k))) best = i;
    }
    if (basis(best, k) < 0.0) basis.col(k) = -basis.col(k);
  }
}

EigenDecomposition finish(std::array<double, 3> values, Mat3 basis) {
  std::array<int, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  EigenDecomposition out;
  for (int k = 0; k < 3; ++k) {
    out.eigenvalues[k] = values[order[k]];
    out.basis.col(k) = basis.col(order[k]);
  }
  canonical_sign(out.basis);
  return out;
}

std::array<double, 3> closed_form_eigenvalues(const SymmetricTensor3& t) {
  const double q = t.trace() / 3.0;
  const double p1 = t.c12() * t.c12() + t.c13() * t.c13() + t.c23() * t.c23();
  const double d1 = t.c11() - q, d2 = t.c22() - q, d3 = t.c33() - q;
  const double p2 = d1 * d1 + d2 * d2 + d3 * d3 + 2.0 * p1;
  if (p2 == 0.0) return {q, q, q};
  const double p = std::sqrt(p2 / 6.0);
  const Mat3 b = (t.to_matrix() - q * Mat3::Identity()) / p;
  const double r = std::clamp(b.determinant() / 2.0, -1.0, 1.0);
  const double phi = std::acos(r) / 3.0;
  const double l1 = q + 2.0 * p * std::cos(phi);
  const double l3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
  return {l1, 3.0 * q - l1 - l3, l3};
}

// Unit null vector of (A - lambda I) from the best-conditioned row cross product.
Vec3 null_vector(const Mat3& a, double lambda) {
  const Mat3 m = a - lambda * Mat3::Identity();
  const Vec3 r0 = m.row(0), r1 = m.row(1), r2 = m.row(2);
  const Vec3 c[3] = {r0.cross(r1), r0.cross(r2), r1.cross(r2)};
  int best = 0;
  for (int i = 1; i < 3; ++i) {
    if (c[i].squaredNorm() > c[best].squaredNorm()) best = i;
  }
  return c[best].normalized();
}

void orthonormal_complement(const Vec3& w, Vec3& u, Vec3& v) {
  if (std::abs(w.x()) > std::abs(w.y())) {
    u = Vec3(-w.z(), 0.0, w.x()) / std::hypot(w.x(), w.z());
  } else {
    u = Vec3(0.0, w.z(), -w.y()) / std::hypot(w.y(), w.z());
  }
  v = w.cross(u);
}

}  // namespace

SymmetricTensor3 SymmetricTensor3::from_matrix(const Mat3& m, double rel_tol) {
  const double scale = m.cwiseAbs().maxCoeff();
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= rel_tol * scale)) {
    throw Error(ErrorCode::kInvalidInput, "matrix is not symmetric");
  }
  return {m(0, 0), m(1, 1), m(2, 2), m(0, 1), m(0, 2), m(1, 2)};
}

double SymmetricTensor3::operator()(int i, int j) const {
  if (i == j) return c_[i];
  const int lo = std::min(i, j), hi = std::max(i, j);
  if (lo == 0) return hi == 1 ? c_[3] : c_[4];
  return c_[5];
}

Mat3 SymmetricTensor3::to_matrix() const {
  Mat3 m;
  for (int k = 0; k < kSize; ++k) {
    m(kRow[k], kCol[k]) = c_[k];
    m(kCol[k], kRow[k]) = c_[k];
  }
  return m;
}

double SymmetricTensor3::frobenius_norm() const {
  double s = 0.0;
  for (int k = 0; k < kSize; ++k) s += (k < 3 ? 1.0 : 2.0) * c_[k] * c_[k];
  return std::sqrt(s);
}

double SymmetricTensor3::max_abs() const {
  double m = 0.0;
  for (double c : c_) m = std::max(m, std::abs(c));
  return m;
}

bool SymmetricTensor3::is_finite() const {
  return std::all_of(c_.begin(), c_.end(), [](double c) { return std::isfinite(c); });
}

SymmetricTensor3& SymmetricTensor3::operator+=(const SymmetricTensor3& o) {
  for (int k = 0; k < kSize; ++k) c_[k] += o.c_[k];
  return *this;
}

SymmetricTensor3& SymmetricTensor3::operator-=(const SymmetricTensor3& o) {
  for (int k = 0; k < kSize; ++k) c_[k] -= o.c_[k];
  return *this;
}

SymmetricTensor3& SymmetricTensor3::operator*=(double s) {
  for (double& c : c_) c *= s;
  return *this;
}

EigenDecomposition eig_sym3_jacobi(const SymmetricTensor3& t) {
  require_finite(t);
  Mat3 a = t.to_matrix();
  Mat3 v = Mat3::Identity();
  const double norm = t.frobenius_norm();
  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::sqrt(a(0, 1) * a(0, 1) + a(0, 2) * a(0, 2) + a(1, 2) * a(1, 2));
    if (off <= 1e-17 * norm || off == 0.0) break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double tn = (theta >= 0 ? 1.0 : -1.0) /
                          (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(tn * tn + 1.0);
        const double s = tn * c;
        Mat3 j = Mat3::Identity();
        j(p, p) = c;
        j(q, q) = c;
        j(p, q) = s;
        j(q, p) = -s;
        a = j.transpose() * a * j;
        a(p, q) = a(q, p) = 0.0;
        v = v * j;
      }
    }
  }
  return finish({a(0, 0), a(1, 1), a(2, 2)}, v);
}

EigenDecomposition eig_sym3(const SymmetricTensor3& t) {
  require_finite(t);
  const double norm = t.frobenius_norm();
  if (norm == 0.0) return finish({0.0, 0.0, 0.0}, Mat3::Identity());
  const auto l = closed_form_eigenvalues(t);
  const double gap12 = l[0] - l[1], gap23 = l[1] - l[2];
  if (std::min(gap12, gap23) < 1e-8 * norm) return eig_sym3_jacobi(t);

  // Solve for the best-separated eigenvalue directly, then diagonalise the
  // 2x2 restriction to its orthogonal complement.
  const Mat3 a = t.to_matrix();
  const Vec3 w = null_vector(a, gap12 >= gap23 ? l[0] : l[2]);
  Vec3 u, v;
  orthonormal_complement(w, u, v);
  const double m00 = u.dot(a * u), m01 = u.dot(a * v), m11 = v.dot(a * v);
  double c = 1.0, s = 0.0;
  if (m01 != 0.0) {
    const double theta = (m11 - m00) / (2.0 * m01);
    const double tn = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
    c = 1.0 / std::sqrt(tn * tn + 1.0);
    s = tn * c;
  }
  const Vec3 e1 = c * u - s * v;
  const Vec3 e2 = s * u + c * v;
  Mat3 basis;
  basis.col(0) = w;
  basis.col(1) = e1;
  basis.col(2) = e2;
  return finish({w.dot(a * w), e1.dot(a * e1), e2.dot(a * e2)}, basis);
}

PrincipalInvariants principal_invariants(const SymmetricTensor3& t) {
  require_finite(t);
  const Mat3 m = t.to_matrix();
  const double tr = t.trace();
  return {tr, 0.5 * (tr * tr - (m * m).trace()), m.determinant()};
}

AlternativeInvariants alternative_invariants(const SymmetricTensor3& t) {
  require_finite(t);
  const double i1 = t.trace();
  SymmetricTensor3 dev = t;
  for (int k = 0; k < 3; ++k) dev[k] -= i1 / 3.0;
  const Mat3 s = dev.to_matrix();
  return {i1, 0.5 * (s * s).trace(), s.determinant()};
}

InvariantTriple invariants(const SymmetricTensor3& t) {
  const auto p = principal_invariants(t);
  const auto a = alternative_invariants(t);
  return {p.i1, p.i2, p.i3, a.j2, a.j3};
}

double characteristic_residual(const SymmetricTensor3& t) {
  const auto inv = principal_invariants(t);
  const auto eig = eig_sym3(t);
  double worst = 0.0;
  for (double l : eig.eigenvalues) {
    const double terms[4] = {l * l * l, -inv.i1 * l * l, inv.i2 * l, -inv.i3};
    double sum = 0.0, mag = 0.0;
    for (double x : terms) {
      sum += x;
      mag += std::abs(x);
    }
    if (mag > 0.0) worst = std::max(worst, std::abs(sum) / mag);
  }
  return worst;
}

Mat3 commutator(const SymmetricTensor3& r_tilde, const SymmetricTensor3& i_part) {
  require_finite(r_tilde);
  require_finite(i_part);
  // For symmetric R and I, I R = (R I)^T.
  const Mat3 p = r_tilde.to_matrix() * i_part.to_matrix();
  Mat3 z = Mat3::Zero();
  for (int i = 0; i < 3; ++i) {
    for (int j = i + 1; j < 3; ++j) {
      z(i, j) = p(i, j) - p(j, i);
      z(j, i) = -z(i, j);
    }
  }
  return z;
}

double commutator_invariant(const Mat3& z) {
  if (!z.allFinite()) throw Error(ErrorCode::kInvalidInput, "commutator has non-finite entries");
  const double scale = z.cwiseAbs().maxCoeff();
  const double sym = (z + z.transpose()).cwiseAbs().maxCoeff();
  if (sym > 1e-12 * scale) {
    throw Error(ErrorCode::kInvalidInput, "commutator invariant requires a skew-symmetric matrix");
  }
  return std::sqrt(z(0, 1) * z(0, 1) + z(0, 2) * z(0, 2) + z(1, 2) * z(1, 2));
}

void check_rotation(const Mat3& r) {
  if (!r.allFinite() || (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-10 ||
      std::abs(r.determinant() - 1.0) > 1e-10) {
    throw Error(ErrorCode::kInvalidInput, "matrix is not a proper rotation");
  }
}

SymmetricTensor3 rotate(const SymmetricTensor3& t, const Mat3& r) {
  check_rotation(r);
  const Mat3 m = r * t.to_matrix() * r.transpose();
  // Average the two triangles so the result is symmetric to the last bit.
  return {m(0, 0), m(1, 1), m(2, 2), 0.5 * (m(0, 1) + m(1, 0)), 0.5 * (m(0, 2) + m(2, 0)),
          0.5 * (m(1, 2) + m(2, 1))};
}

MptSample rotate(const MptSample& s, const Mat3& r) {
  return {s.omega, rotate(s.r_tilde, r), rotate(s.i_part, r)};
}

Mat3 axis_angle_rotation(const Vec3& axis, double angle) {
  if (!(axis.norm() > 0.0)) throw Error(ErrorCode::kInvalidInput, "rotation axis must be non-zero");
  return Eigen::AngleAxisd(angle, axis.normalized()).toRotationMatrix();
}

OffDiagonalBoundReport check_offdiagonal_bounds(const SymmetricTensor3& r_tilde,
                                                const SymmetricTensor3& i_part,
                                                const SymmetricTensor3& n0,
                                                double rel_slack) {
  OffDiagonalBoundReport rep;
  const double real_bound = std::abs((r_tilde - n0).trace()) + std::abs(n0.trace());
  const double imag_bound = i_part.trace();
  for (int k = 3; k < 6; ++k) {
    const double re = std::abs(r_tilde[k]);
    const double im = i_part[k];
    if (real_bound > 0.0) {
      rep.worst_real_ratio = std::max(rep.worst_real_ratio, re / real_bound);
    } else if (re > 0.0) {
      rep.worst_real_ratio = INFINITY;
    }
    if (imag_bound > 0.0) {
      rep.worst_imag_ratio = std::max(rep.worst_imag_ratio, im / imag_bound);
    } else if (im > 0.0) {
      rep.worst_imag_ratio = INFINITY;
    }
  }
  rep.real_holds = rep.worst_real_ratio <= 1.0 + rel_slack;
  rep.imag_holds = rep.worst_imag_ratio <= 1.0 + rel_slack;
  return rep;
}

PerturbationReport perturbation_diagnostics(const SymmetricTensor3& a, const SymmetricTensor3& e) {
  const auto ea = eig_sym3(a);
  const auto eb = eig_sym3(a + e);
  PerturbationReport rep;
  for (int i = 0; i < 3; ++i) {
    const double d = eb.eigenvalues[i] - ea.eigenvalues[i];
    rep.eigenvalue_shift_sq += d * d;
    const double c = std::min(1.0, std::abs(ea.basis.col(i).dot(eb.basis.col(i))));
    rep.eigenvector_distance[i] = std::sqrt(std::max(0.0, 1.0 - c * c));
  }
  const double fe = e.frobenius_norm();
  const double fa = a.frobenius_norm();
  rep.frobenius_sq = fe * fe;
  rep.reference_norm_sq = fa * fa;
  rep.min_gap = std::min(ea.eigenvalues[0] - ea.eigenvalues[1], ea.eigenvalues[1] - ea.eigenvalues[2]);
  return rep;
}

}  // namespace mpt
