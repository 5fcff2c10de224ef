#include "mpt/ellipsoid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mpt/error.hpp"

namespace mpt {

namespace {

constexpr double kPi = std::numbers::pi;

// Ratios below this are treated as accuracy-limited.
constexpr double kExtremeRatio = 1e-6;

struct QuadratureResult {
  double value;
  double error;
};

template <typename F>
QuadratureResult integrate_unit(F f) {
  double error = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
      f, 0.0, kPi / 2, 15, 1e-12, &error);
  return {value, error};
}

DemagFactors quadrature_factors(double beta, double gamma) {
  // With t = 1/s the integrals over [1, inf) become integrals over [0, 1];
  // s = sin(theta) then keeps p = cos^2 + beta^2 sin^2 and
  // q = cos^2 + gamma^2 sin^2 bounded away from zero without a sharp peak.
  const double b2 = beta * beta;
  const double g2 = gamma * gamma;
  struct Terms {
    double w, p, q;
  };
  auto terms = [b2, g2](double th) {
    const double s = std::sin(th), c = std::cos(th);
    const double p = c * c + b2 * s * s;
    const double q = c * c + g2 * s * s;
    return Terms{s * s * c / std::sqrt(p * q), p, q};
  };
  const auto r1 = integrate_unit([&](double th) { return terms(th).w; });
  const auto r2 = integrate_unit([&](double th) {
    const auto t = terms(th);
    return t.w / t.p;
  });
  const auto r3 = integrate_unit([&](double th) {
    const auto t = terms(th);
    return t.w / t.q;
  });
  const double pre = beta * gamma;
  DemagFactors f{pre * r1.value, pre * r2.value, pre * r3.value, false};
  const double err = pre * std::max({r1.error, r2.error, r3.error});
  f.accuracy_warning = err > 1e-10;
  return f;
}

DemagFactors carlson_factors(double beta, double gamma) {
  const double b2 = beta * beta, g2 = gamma * gamma;
  const double pre = beta * gamma / 3.0;
  return {pre * carlson_rd(b2, g2, 1.0), pre * carlson_rd(g2, 1.0, b2),
          pre * carlson_rd(1.0, b2, g2), false};
}

void require_finite_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw Error(ErrorCode::kInvalidInput, std::string(what) + " must be finite and positive");
  }
}

}  // namespace

Ellipsoid::Ellipsoid(double r1, double r2, double r3) : r_{r1, r2, r3} {
  for (double r : r_) require_finite_positive(r, "ellipsoid radius");
  std::sort(r_.begin(), r_.end(), std::greater<>());
}

double Ellipsoid::volume() const { return 4.0 / 3.0 * kPi * r_[0] * r_[1] * r_[2]; }

double carlson_rd(double x, double y, double z) {
  if (!(x >= 0.0 && y >= 0.0 && z > 0.0) || x + y == 0.0) {
    throw Error(ErrorCode::kInvalidInput, "carlson_rd requires x, y >= 0, x + y > 0, z > 0");
  }
  constexpr double c1 = 3.0 / 14.0, c2 = 1.0 / 6.0, c3 = 9.0 / 22.0, c4 = 3.0 / 26.0;
  constexpr double c5 = 0.25 * c3, c6 = 1.5 * c4;
  double sum = 0.0, fac = 1.0;
  double ave = 0.0, dx = 0.0, dy = 0.0, dz = 0.0;
  for (int it = 0; it < 100; ++it) {
    const double sx = std::sqrt(x), sy = std::sqrt(y), sz = std::sqrt(z);
    const double lambda = sx * (sy + sz) + sy * sz;
    sum += fac / (sz * (z + lambda));
    fac *= 0.25;
    x = 0.25 * (x + lambda);
    y = 0.25 * (y + lambda);
    z = 0.25 * (z + lambda);
    ave = 0.2 * (x + y + 3.0 * z);
    dx = (ave - x) / ave;
    dy = (ave - y) / ave;
    dz = (ave - z) / ave;
    if (std::max({std::abs(dx), std::abs(dy), std::abs(dz)}) < 1e-4) break;
  }
  const double ea = dx * dy, eb = dz * dz;
  const double ec = ea - eb, ed = ea - 6.0 * eb, ee = ed + ec + ec;
  return 3.0 * sum +
         fac * (1.0 + ed * (-c1 + c5 * ed - c6 * dz * ee) +
                dz * (c2 * ee + dz * (-c3 * ec + dz * c4 * ea))) /
             (ave * std::sqrt(ave));
}

DemagFactors demag_factors_from_ratios(double b_over_a, double c_over_a, DemagBackend backend) {
  require_finite_positive(b_over_a, "b/a");
  require_finite_positive(c_over_a, "c/a");
  DemagFactors f = backend == DemagBackend::kCarlson ? carlson_factors(b_over_a, c_over_a)
                                                     : quadrature_factors(b_over_a, c_over_a);
  const double lo = std::min({1.0, b_over_a, c_over_a});
  const double hi = std::max({1.0, b_over_a, c_over_a});
  if (lo / hi < kExtremeRatio) f.accuracy_warning = true;
  return f;
}

DemagFactors demag_factors(const Ellipsoid& e, DemagBackend backend) {
  return demag_factors_from_ratios(e.b() / e.a(), e.c() / e.a(), backend);
}

Contrast::Contrast(double k) : k_(k) {
  if (!std::isfinite(k) || k < 0.0) {
    throw Error(ErrorCode::kInvalidInput, "contrast must be finite and non-negative");
  }
}

SymmetricTensor3 polya_szego(double alpha, const Ellipsoid& e, Contrast k, DemagBackend backend) {
  require_finite_positive(alpha, "alpha");
  const double kv = k.value();
  if (kv == 1.0) {
    throw Error(ErrorCode::kDegenerateContrast, "contrast k = 1 gives a vanishing Polya-Szego tensor");
  }
  const auto f = demag_factors(e, backend);
  const double scale = alpha * alpha * alpha * (kv - 1.0) * e.volume();
  auto entry = [&](double ai) { return scale / (1.0 - ai + kv * ai); };
  return SymmetricTensor3::diagonal(entry(f.a1), entry(f.a2), entry(f.a3));
}

namespace {

// Log-space images of the forward map (b/a, c/a) -> (A2/A1, A3/A1).
struct RatioImage {
  double x, y;    // ln(b/a), ln(c/a)
  double u, v;    // ln(A2/A1), ln(A3/A1)
};

constexpr int kGridSize = 64;
constexpr double kGridLogMin = -9.0;  // b/a, c/a down to ~1.2e-4

const std::vector<RatioImage>& lookup_grid() {
  static const std::vector<RatioImage> grid = [] {
    std::vector<RatioImage> g;
    g.reserve(kGridSize * kGridSize);
    for (int i = 0; i < kGridSize; ++i) {
      for (int j = 0; j < kGridSize; ++j) {
        const double x = kGridLogMin * i / (kGridSize - 1);
        const double y = kGridLogMin * j / (kGridSize - 1);
        const auto f = demag_factors_from_ratios(std::exp(x), std::exp(y), DemagBackend::kCarlson);
        g.push_back({x, y, std::log(f.a2 / f.a1), std::log(f.a3 / f.a1)});
      }
    }
    return g;
  }();
  return grid;
}

std::array<double, 2> ratio_residual(double x, double y, double tu, double tv) {
  const auto f = demag_factors_from_ratios(std::exp(x), std::exp(y));
  return {std::log(f.a2 / f.a1) - tu, std::log(f.a3 / f.a1) - tv};
}

struct AxisRatios {
  double b_over_a, c_over_a;
  int iterations;
};

// Damped Newton on (ln b/a, ln c/a) with a central-difference Jacobian.
AxisRatios solve_axis_ratios(double target_u, double target_v) {
  const auto& grid = lookup_grid();
  const RatioImage* best = &grid.front();
  for (const auto& g : grid) {
    if (std::hypot(g.u - target_u, g.v - target_v) < std::hypot(best->u - target_u, best->v - target_v)) {
      best = &g;
    }
  }
  double x = best->x, y = best->y;
  auto res = ratio_residual(x, y, target_u, target_v);
  double norm = std::hypot(res[0], res[1]);
  constexpr double kTol = 1e-13;
  constexpr double kLogMax = 0.0;
  constexpr double kLogMin = -30.0;
  constexpr double h = 1e-6;
  int it = 0;
  for (; it < 100 && norm > kTol; ++it) {
    const auto rxp = ratio_residual(x + h, y, target_u, target_v);
    const auto rxm = ratio_residual(x - h, y, target_u, target_v);
    const auto ryp = ratio_residual(x, y + h, target_u, target_v);
    const auto rym = ratio_residual(x, y - h, target_u, target_v);
    const double j00 = (rxp[0] - rxm[0]) / (2 * h), j10 = (rxp[1] - rxm[1]) / (2 * h);
    const double j01 = (ryp[0] - rym[0]) / (2 * h), j11 = (ryp[1] - rym[1]) / (2 * h);
    const double det = j00 * j11 - j01 * j10;
    if (!(std::abs(det) > 0.0)) break;
    double dx = -(j11 * res[0] - j01 * res[1]) / det;
    double dy = -(-j10 * res[0] + j00 * res[1]) / det;
    const double len = std::hypot(dx, dy);
    if (len > 1.0) {
      dx /= len;
      dy /= len;
    }
    // Backtrack until the residual decreases, keeping iterates in (0, 1]^2.
    double step = 1.0;
    bool accepted = false;
    for (int k = 0; k < 40; ++k, step *= 0.5) {
      const double nx = std::clamp(x + step * dx, kLogMin, kLogMax);
      const double ny = std::clamp(y + step * dy, kLogMin, kLogMax);
      const auto nr = ratio_residual(nx, ny, target_u, target_v);
      const double nn = std::hypot(nr[0], nr[1]);
      if (nn < norm) {
        x = nx;
        y = ny;
        res = nr;
        norm = nn;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  if (!(norm <= 1e-10)) {
    throw ConvergenceError("axis-ratio solve did not converge", norm);
  }
  return {std::exp(x), std::exp(y), it};
}

void check_eigen_signs(const std::array<double, 3>& eigs, double k) {
  for (double l : eigs) {
    if (!std::isfinite(l)) throw Error(ErrorCode::kInvalidInput, "eigenvalues must be finite");
    if (k > 1.0 ? !(l > 0.0) : !(l < 0.0)) {
      throw Error(ErrorCode::kNoEquivalentEllipsoid,
                  k > 1.0 ? "eigenvalues must all be positive for contrast k > 1"
                          : "eigenvalues must all be negative for contrast 0 <= k < 1");
    }
  }
}

}  // namespace

EquivalentEllipsoid equivalent_ellipsoid(std::array<double, 3> eigs, double alpha, Contrast k) {
  require_finite_positive(alpha, "alpha");
  const double kv = k.value();
  if (kv == 1.0) throw Error(ErrorCode::kDegenerateContrast, "contrast k = 1 has no equivalent ellipsoid");
  check_eigen_signs(eigs, kv);
  std::sort(eigs.begin(), eigs.end(), std::greater<>());

  const double alpha3 = alpha * alpha * alpha;
  double inv_sum = 0.0;
  for (double l : eigs) inv_sum += 1.0 / l;
  const double volume = (1.0 + 3.0 / (kv - 1.0)) / (alpha3 * inv_sum);
  std::array<double, 3> a{};
  for (int i = 0; i < 3; ++i) a[i] = alpha3 * volume / eigs[i] - 1.0 / (kv - 1.0);

  for (int i = 0; i < 3; ++i) {
    if (!(a[i] > 0.0 && a[i] < 1.0)) {
      throw Error(ErrorCode::kNoEquivalentEllipsoid,
                  "recovered A_" + std::to_string(i + 1) + " = " + std::to_string(a[i]) +
                      " lies outside (0, 1)");
    }
  }
  if (std::abs(a[0] + a[1] + a[2] - 1.0) > 1e-6) {
    throw Error(ErrorCode::kNoEquivalentEllipsoid, "recovered A_1 + A_2 + A_3 differs from 1");
  }

  const auto ratios = solve_axis_ratios(std::log(a[1] / a[0]), std::log(a[2] / a[0]));
  const double major = std::cbrt(3.0 * volume / (4.0 * kPi * ratios.b_over_a * ratios.c_over_a));

  EquivalentEllipsoid out;
  out.ellipsoid = Ellipsoid(major, major * ratios.b_over_a, major * ratios.c_over_a);
  out.volume = volume;
  out.factors = {a[0], a[1], a[2], false};
  out.iterations = ratios.iterations;
  const auto t = polya_szego(alpha, out.ellipsoid, k);
  for (int i = 0; i < 3; ++i) {
    out.residual = std::max(out.residual, std::abs(t[i] - eigs[i]) / std::abs(eigs[i]));
  }
  return out;
}

MinimisationResult equivalent_ellipsoid_minimisation(std::array<double, 3> eigs, double alpha,
                                                     Contrast k, const Ellipsoid& start) {
  require_finite_positive(alpha, "alpha");
  const double kv = k.value();
  if (kv == 1.0) throw Error(ErrorCode::kDegenerateContrast, "contrast k = 1 has no equivalent ellipsoid");
  check_eigen_signs(eigs, kv);
  std::sort(eigs.begin(), eigs.end(), std::greater<>());

  // The diagonal of T for radii (a, b, c) in that order; the largest radius
  // carries the largest entry for every admissible k, so no sorting is needed.
  using V3 = Eigen::Vector3d;
  auto residual = [&](const V3& logr) {
    const double ra = std::exp(logr[0]), rb = std::exp(logr[1]), rc = std::exp(logr[2]);
    const auto f = demag_factors_from_ratios(rb / ra, rc / ra);
    const double scale = alpha * alpha * alpha * (kv - 1.0) * 4.0 / 3.0 * kPi * ra * rb * rc;
    const double ai[3] = {f.a1, f.a2, f.a3};
    V3 r;
    for (int i = 0; i < 3; ++i) r[i] = (scale / (1.0 - ai[i] + kv * ai[i]) - eigs[i]) / std::abs(eigs[i]);
    return r;
  };

  V3 p(std::log(start.a()), std::log(start.b()), std::log(start.c()));
  V3 r = residual(p);
  double obj = r.squaredNorm();
  double damping = 1e-3;
  constexpr double h = 1e-7;
  int it = 0;
  for (; it < 500 && obj > 1e-26; ++it) {
    Eigen::Matrix3d jac;
    for (int c = 0; c < 3; ++c) {
      V3 dp = V3::Zero();
      dp[c] = h;
      jac.col(c) = (residual(p + dp) - residual(p - dp)) / (2 * h);
    }
    const Eigen::Matrix3d jtj = jac.transpose() * jac;
    const V3 g = jac.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 30; ++tries) {
      Eigen::Matrix3d lhs = jtj;
      lhs.diagonal() += damping * jtj.diagonal().cwiseMax(1e-12);
      V3 step = -lhs.ldlt().solve(g);
      if (step.norm() > 1.0) step *= 1.0 / step.norm();
      const V3 np = p + step;
      const V3 nr = residual(np);
      const double nobj = nr.squaredNorm();
      if (nobj < obj) {
        p = np;
        r = nr;
        obj = nobj;
        damping = std::max(damping * 0.1, 1e-12);
        improved = true;
        break;
      }
      damping *= 10.0;
    }
    if (!improved) break;
  }
  if (!(obj <= 1e-16)) {
    throw ConvergenceError("equivalent-ellipsoid minimisation did not converge", obj);
  }
  return {Ellipsoid(std::exp(p[0]), std::exp(p[1]), std::exp(p[2])), obj, it};
}

}  // namespace mpt
