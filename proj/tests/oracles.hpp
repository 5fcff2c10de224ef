// Independent reference implementations used only by the tests.
#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <random>

#include "mpt/spectral.hpp"
#include "mpt/tensor.hpp"

namespace oracle {

using mpt::Mat3;
using mpt::SymmetricTensor3;
using mpt::Vec3;

inline SymmetricTensor3 random_symmetric(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, scale);
  return {n(rng), n(rng), n(rng), n(rng), n(rng), n(rng)};
}

inline SymmetricTensor3 random_psd(std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Matrix3d b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = n(rng);
  Eigen::Matrix3d m = scale * (b * b.transpose());
  m = 0.5 * (m + m.transpose()).eval();
  return {m(0, 0), m(1, 1), m(2, 2), m(0, 1), m(0, 2), m(1, 2)};
}

// Haar-distributed rotation from the QR factors of a Gaussian matrix.
inline Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Mat3 g;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) g(i, j) = n(rng);
  Eigen::HouseholderQR<Mat3> qr(g);
  Mat3 q = qr.householderQ();
  Mat3 r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < 3; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  if (q.determinant() < 0) q.col(0) *= -1.0;
  return q;
}

inline std::array<std::array<double, 3>, 3> full(const SymmetricTensor3& t) {
  return {{{t.c11(), t.c12(), t.c13()}, {t.c12(), t.c22(), t.c23()}, {t.c13(), t.c23(), t.c33()}}};
}

inline std::array<std::array<double, 3>, 3> matmul(const std::array<std::array<double, 3>, 3>& a,
                                                   const std::array<std::array<double, 3>, 3>& b) {
  std::array<std::array<double, 3>, 3> c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Roots of det(T - l I) = -l^3 + i1 l^2 - i2 l + i3 from the companion
// matrix, with coefficients expanded by cofactors. Works on t / max|t_ij| so
// the companion solve does not see badly scaled coefficients.
inline std::array<double, 3> char_poly_roots(const SymmetricTensor3& t_in) {
  const double scale = t_in.max_abs();
  if (scale == 0.0) return {0.0, 0.0, 0.0};
  const SymmetricTensor3 t = t_in * (1.0 / scale);
  const auto a = full(t);
  const double i1 = a[0][0] + a[1][1] + a[2][2];
  const double i2 = a[0][0] * a[1][1] - a[0][1] * a[1][0] + a[0][0] * a[2][2] - a[0][2] * a[2][0] +
                    a[1][1] * a[2][2] - a[1][2] * a[2][1];
  const double i3 = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                    a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                    a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  Eigen::Matrix3d comp;
  comp << i1, -i2, i3, 1, 0, 0, 0, 1, 0;
  Eigen::EigenSolver<Eigen::Matrix3d> es(comp, false);
  std::array<double, 3> r{};
  for (int k = 0; k < 3; ++k) r[k] = es.eigenvalues()(k).real();
  // Polish each root with Newton steps on the cubic.
  for (double& x : r) {
    for (int it = 0; it < 4; ++it) {
      const double p = ((x - i1) * x + i2) * x - i3;
      const double dp = (3 * x - 2 * i1) * x + i2;
      if (dp == 0.0) break;
      x -= p / dp;
    }
  }
  std::sort(r.begin(), r.end(), std::greater<>());
  for (double& x : r) x *= scale;
  return r;
}

// Adaptive Simpson on [a, b].
inline double simpson(const std::function<double(double)>& f, double a, double b, double tol,
                      int depth = 50) {
  std::function<double(double, double, double, double, double, double, double, int)> rec =
      [&](double lo, double hi, double flo, double fmid, double fhi, double whole, double eps,
          int d) -> double {
    const double mid = 0.5 * (lo + hi);
    const double lm = 0.5 * (lo + mid), rm = 0.5 * (mid + hi);
    const double flm = f(lm), frm = f(rm);
    const double left = (mid - lo) / 6 * (flo + 4 * flm + fmid);
    const double right = (hi - mid) / 6 * (fmid + 4 * frm + fhi);
    if (d <= 0 || std::abs(left + right - whole) <= 15 * eps)
      return left + right + (left + right - whole) / 15;
    return rec(lo, mid, flo, flm, fmid, left, eps / 2, d - 1) +
           rec(mid, hi, fmid, frm, fhi, right, eps / 2, d - 1);
  };
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  return rec(a, b, fa, fm, fb, (b - a) / 6 * (fa + 4 * fm + fb), tol, depth);
}

// Demagnetisation factor along semi-axis `axis` from
// A_i = abc/2 int_0^inf dt / ((t + r_i^2) sqrt((t+a^2)(t+b^2)(t+c^2))),
// with t = a^2 u / (1 - u).
inline double demag(double a, double b, double c, int axis) {
  const double r[3] = {a, b, c};
  const double s = a * a;
  auto f = [&](double u) {
    if (u >= 1.0) return 0.0;
    const double t = s * u / (1.0 - u);
    const double dt = s / ((1.0 - u) * (1.0 - u));
    const double g = std::sqrt((t + a * a) * (t + b * b) * (t + c * c));
    return 0.5 * a * b * c * dt / ((t + r[axis] * r[axis]) * g);
  };
  return simpson(f, 0.0, 1.0, 1e-13);
}

// Closed form along the long axis of a prolate spheroid (a > b = c).
inline double prolate_long_axis(double a, double b) {
  const double e = std::sqrt(1.0 - (b * b) / (a * a));
  return (1.0 - e * e) / (e * e * e) * (std::atanh(e) - e);
}

// Closed form along the short axis of an oblate spheroid (a = b > c).
inline double oblate_short_axis(double a, double c) {
  const double e = std::sqrt(1.0 - (c * c) / (a * a));
  return (1.0 - std::sqrt(1.0 - e * e) * std::asin(e) / e) / (e * e);
}

// Modal sum with beta written as -nu / (nu + i lambda).
inline mpt::MptSample direct_synthesis(const mpt::ModalModel& m, double omega) {
  const double nu = m.alpha() * m.alpha() * omega * 4e-7 * M_PI * m.sigma_star();
  const double pre = std::pow(m.alpha(), 3) / 4.0;
  mpt::MptSample s;
  s.omega = omega;
  for (int k = 0; k < 6; ++k) {
    std::complex<double> acc = 0.0;
    for (const auto& mode : m.modes()) acc += -nu / std::complex<double>(nu, mode.lambda) * mode.weight[k];
    s.r_tilde[k] = m.n0()[k] + pre * acc.real();
    s.i_part[k] = pre * acc.imag();
  }
  return s;
}

inline double rel_diff(double a, double b, double scale) { return std::abs(a - b) / scale; }

}  // namespace oracle
