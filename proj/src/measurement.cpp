#include "mpt/measurement.hpp"

#include <boost/math/special_functions/legendre.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "mpt/error.hpp"
#include "mpt/random.hpp"

namespace mpt {

namespace {

constexpr double kPi = std::numbers::pi;

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

GaussRule gauss_legendre(int order) {
  GaussRule rule;
  for (double x : boost::math::legendre_p_zeros<double>(order)) {
    const double dp = boost::math::legendre_p_prime(order, x);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes.push_back(x);
    rule.weights.push_back(w);
    if (x != 0.0) {
      rule.nodes.push_back(-x);
      rule.weights.push_back(w);
    }
  }
  return rule;
}

bool finite(const Vec3& v) { return v.allFinite(); }

// Orthonormal pair spanning the plane with normal n.
std::pair<Vec3, Vec3> plane_basis(const Vec3& n) {
  Eigen::Index k;
  n.cwiseAbs().minCoeff(&k);
  const Vec3 u = n.cross(Vec3::Unit(k)).normalized();
  return {u, n.cross(u)};
}

// Matrix M = re + i im applied to a real vector.
Vec3c apply(const MptSample& m, const Vec3& h) {
  return m.r_tilde.to_matrix() * h + std::complex<double>(0, 1) * (m.i_part.to_matrix() * h);
}

}  // namespace

void validate_layout(const CoilLayout& layout) {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::kInvalidInput, msg); };
  if (layout.exciters.empty()) fail("layout has no exciters");
  if (layout.receivers.empty()) fail("layout has no receivers");
  if (!finite(layout.z)) fail("object position must be finite");
  for (std::size_t m = 0; m < layout.exciters.size(); ++m)
    if (!finite(layout.exciters[m])) fail("exciter " + std::to_string(m) + ": field must be finite");
  for (std::size_t n = 0; n < layout.receivers.size(); ++n) {
    const auto& c = layout.receivers[n];
    const std::string where = "receiver " + std::to_string(n) + ": ";
    if (!finite(c.center) || !finite(c.normal)) fail(where + "center and normal must be finite");
    if (c.normal.norm() == 0.0) fail(where + "normal must be non-zero");
    if (!(std::isfinite(c.radius) && c.radius > 0.0)) fail(where + "radius must be positive");
    if (c.quadrature_order < 1) fail(where + "quadrature order must be at least 1");
    if ((c.center - layout.z).norm() <= c.radius) fail(where + "coil contains the object position");
  }
}

Mat3 green_hessian(const Vec3& x, const Vec3& z) {
  const Vec3 r = x - z;
  const double d = r.norm();
  if (!(d >= 1e-12)) throw Error(ErrorCode::kSingularity, "field point coincides with the object position");
  const double d2 = d * d;
  const double scale = 1.0 / (4.0 * kPi * d2 * d2 * d);
  Mat3 h;
  for (int i = 0; i < 3; ++i) {
    h(i, i) = (3.0 * r(i) * r(i) - d2) * scale;
    for (int j = i + 1; j < 3; ++j) h(i, j) = h(j, i) = 3.0 * r(i) * r(j) * scale;
  }
  return h;
}

Vec3c forward_perturbation(const MptSample& mpt, const Vec3& h0_at_z, const Vec3& x, const Vec3& z) {
  return green_hessian(x, z).cast<std::complex<double>>() * apply(mpt, h0_at_z);
}

Vec3 coil_moment(const ReceiverCoil& coil, const Vec3& z) {
  if (coil.quadrature_order < 1 || !(coil.radius > 0.0) || coil.normal.norm() == 0.0)
    throw Error(ErrorCode::kInvalidInput, "receiver coil is not valid");
  const Vec3 n = coil.normal.normalized();
  const auto [u, v] = plane_basis(n);
  // Gauss-Legendre in the radius; in the angle the equally spaced rule is
  // the Gaussian rule for trigonometric polynomials.
  const GaussRule rule = gauss_legendre(coil.quadrature_order);
  const int angles = 2 * coil.quadrature_order;
  const double wt = 2.0 * kPi / angles;
  Vec3 acc = Vec3::Zero();
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) {
    const double rho = 0.5 * coil.radius * (rule.nodes[i] + 1.0);
    const double wr = 0.5 * coil.radius * rule.weights[i] * rho;
    for (int j = 0; j < angles; ++j) {
      const double theta = wt * j;
      const Vec3 x = coil.center + rho * (std::cos(theta) * u + std::sin(theta) * v);
      acc += wr * wt * (green_hessian(x, z) * n);
    }
  }
  return acc;
}

std::complex<double> induced_voltage(const ReceiverCoil& coil, const MptSample& mpt, const Vec3& h0_at_z,
                                     const Vec3& z) {
  // n . (D2G M H0) = (D2G n) . (M H0) because D2G is symmetric.
  return coil_moment(coil, z).cast<std::complex<double>>().dot(apply(mpt, h0_at_z));
}

VoltageSet simulate_voltages(const CoilLayout& layout, const MptSample& mpt) {
  validate_layout(layout);
  VoltageSet v;
  v.omega = mpt.omega;
  v.receivers = static_cast<int>(layout.receivers.size());
  v.exciters = static_cast<int>(layout.exciters.size());
  v.values.resize(static_cast<std::size_t>(v.receivers) * v.exciters);
  for (int n = 0; n < v.receivers; ++n) {
    const Vec3c g = coil_moment(layout.receivers[n], layout.z).cast<std::complex<double>>();
    for (int m = 0; m < v.exciters; ++m) v.at(n, m) = g.dot(apply(mpt, layout.exciters[m]));
  }
  return v;
}

RecoverySystem assemble_system(const CoilLayout& layout) {
  validate_layout(layout);
  const int me = static_cast<int>(layout.exciters.size());
  const int mr = static_cast<int>(layout.receivers.size());
  if (me * mr <= 6) {
    throw Error(ErrorCode::kUnderdetermined,
                "layout gives " + std::to_string(me * mr) + " coil pairs; recovery needs M_eM_r > 6");
  }
  RecoverySystem sys;
  sys.exciters = me;
  sys.receivers = mr;
  sys.a.resize(me * mr, 6);
  for (int n = 0; n < mr; ++n) {
    const Vec3 g = coil_moment(layout.receivers[n], layout.z);
    for (int m = 0; m < me; ++m) {
      const Vec3& h = layout.exciters[m];
      auto row = sys.a.row(n * me + m);
      row(0) = g(0) * h(0);
      row(1) = g(1) * h(1);
      row(2) = g(2) * h(2);
      row(3) = g(0) * h(1) + g(1) * h(0);
      row(4) = g(0) * h(2) + g(2) * h(0);
      row(5) = g(1) * h(2) + g(2) * h(1);
    }
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(sys.a);
  const auto& s = svd.singularValues();
  const double tol = s(0) * 1e-10;
  sys.rank = 0;
  for (Eigen::Index k = 0; k < s.size(); ++k)
    if (s(k) > tol) ++sys.rank;
  sys.condition_number = sys.rank == 6 ? s(0) / s(5) : INFINITY;
  return sys;
}

Recovery recover_mpt(const RecoverySystem& system, const VoltageSet& voltages) {
  const Eigen::Index rows = system.a.rows();
  if (voltages.receivers != system.receivers || voltages.exciters != system.exciters ||
      static_cast<Eigen::Index>(voltages.values.size()) != rows) {
    throw Error(ErrorCode::kInvalidInput, "voltage grid does not match the recovery system");
  }
  if (system.rank < 6) {
    throw RankDeficiencyError("design matrix has rank " + std::to_string(system.rank) + " < 6",
                              6 - system.rank);
  }
  Eigen::MatrixXd b(rows, 2);
  for (Eigen::Index i = 0; i < rows; ++i) {
    b(i, 0) = voltages.values[i].real();
    b(i, 1) = voltages.values[i].imag();
  }
  if (!b.allFinite()) throw Error(ErrorCode::kInvalidInput, "voltages must be finite");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(system.a);
  qr.setThreshold(1e-10);
  if (qr.rank() < 6) {
    throw RankDeficiencyError("design matrix has rank " + std::to_string(qr.rank()) + " < 6",
                              static_cast<int>(6 - qr.rank()));
  }
  const Eigen::MatrixXd u = qr.solve(b);
  Recovery out;
  out.mpt.omega = voltages.omega;
  for (int k = 0; k < 6; ++k) {
    out.mpt.r_tilde[k] = u(k, 0);
    out.mpt.i_part[k] = u(k, 1);
  }
  out.residual = (system.a * u - b).norm();
  return out;
}

MptSample add_noise(const MptSample& mpt, double level, std::uint64_t seed) {
  if (!(std::isfinite(level) && level >= 0.0))
    throw Error(ErrorCode::kInvalidInput, "noise level must be finite and non-negative");
  MptSample out = mpt;
  if (level == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  const double sr = level * mpt.r_tilde.frobenius_norm() / 3.0;
  const double si = level * mpt.i_part.frobenius_norm() / 3.0;
  for (int k = 0; k < 6; ++k) out.r_tilde[k] += sr * xi(rng);
  for (int k = 0; k < 6; ++k) out.i_part[k] += si * xi(rng);
  return out;
}

VoltageSet add_voltage_noise(const VoltageSet& v, double level, std::uint64_t seed) {
  if (!(std::isfinite(level) && level >= 0.0))
    throw Error(ErrorCode::kInvalidInput, "noise level must be finite and non-negative");
  VoltageSet out = v;
  if (level == 0.0) return out;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> xi(0.0, 1.0);
  for (auto& x : out.values) {
    const double re = x.real() * (1.0 + level * xi(rng));
    const double im = x.imag() * (1.0 + level * xi(rng));
    x = {re, im};
  }
  return out;
}

double relative_error(const MptSample& a, const MptSample& b) {
  const double num = std::hypot((a.r_tilde - b.r_tilde).frobenius_norm(), (a.i_part - b.i_part).frobenius_norm());
  const double den = std::hypot(b.r_tilde.frobenius_norm(), b.i_part.frobenius_norm());
  return den > 0.0 ? num / den : num;
}

RoundTripStats measurement_round_trip(const CoilLayout& layout, const MptSample& mpt, double noise,
                                      int trials, std::uint64_t seed) {
  if (trials < 1) throw Error(ErrorCode::kInvalidInput, "at least one trial is required");
  const RecoverySystem sys = assemble_system(layout);
  const VoltageSet clean = simulate_voltages(layout, mpt);
  RoundTripStats stats;
  stats.trials = trials;
  stats.condition_number = sys.condition_number;
  for (int t = 0; t < trials; ++t) {
    const auto rec = recover_mpt(sys, add_voltage_noise(clean, noise, derive_seed(seed, t)));
    const double e = relative_error(rec.mpt, mpt);
    stats.mean_error += e / trials;
    stats.max_error = std::max(stats.max_error, e);
    stats.mean_residual += rec.residual / trials;
    if (t == 0) stats.first = rec;
  }
  return stats;
}

}  // namespace mpt
