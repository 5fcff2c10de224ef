#include "mpt/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "mpt/error.hpp"

namespace mpt {

namespace {

void require(bool ok, ErrorCode code, const std::string& msg) {
  if (!ok) throw Error(code, msg);
}

bool is_psd(const SymmetricTensor3& w) {
  const auto eig = eig_sym3(w);
  return eig.eigenvalues[2] >= -1e-10 * std::max(1.0, std::abs(eig.eigenvalues[0]));
}

}  // namespace

ModalModel::ModalModel(double alpha, double sigma_star, double mu_r, SymmetricTensor3 n0,
                       std::vector<Mode> modes, std::string label)
    : alpha_(alpha),
      sigma_star_(sigma_star),
      mu_r_(mu_r),
      n0_(n0),
      modes_(std::move(modes)),
      label_(std::move(label)) {
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::kInvalidModel, "alpha must be positive");
  require(std::isfinite(sigma_star) && sigma_star >= 0.0, ErrorCode::kInvalidModel,
          "sigma_star must be non-negative");
  require(std::isfinite(mu_r) && mu_r >= 1.0, ErrorCode::kInvalidModel, "mu_r must be >= 1");
  require(n0_.is_finite(), ErrorCode::kInvalidModel, "n0 must be finite");
  require(!modes_.empty(), ErrorCode::kInvalidModel, "model has no modes");
  for (std::size_t n = 0; n < modes_.size(); ++n) {
    const auto& m = modes_[n];
    const std::string where = "mode " + std::to_string(n);
    require(std::isfinite(m.lambda) && m.lambda > 0.0, ErrorCode::kInvalidModel,
            where + ": lambda must be positive");
    require(m.weight.is_finite(), ErrorCode::kInvalidModel, where + ": weight must be finite");
    require(is_psd(m.weight), ErrorCode::kInvalidModel, where + ": weight must be positive semidefinite");
  }
  if (mu_r == 1.0) {
    const double a3 = alpha * alpha * alpha;
    require(n0_.max_abs() <= 1e-12 * a3, ErrorCode::kInvalidModel, "n0 must vanish when mu_r = 1");
  }
  std::stable_sort(modes_.begin(), modes_.end(),
                   [](const Mode& a, const Mode& b) { return a.lambda < b.lambda; });
}

ModalModel ModalModel::rotated(const Mat3& r) const {
  std::vector<Mode> modes = modes_;
  for (auto& m : modes) m.weight = rotate(m.weight, r);
  return ModalModel(alpha_, sigma_star_, mu_r_, rotate(n0_, r), std::move(modes), label_);
}

double nu(double alpha, double omega, double sigma_star) {
  return alpha * alpha * omega * kMu0 * sigma_star;
}

std::complex<double> beta(double nu_value, double lambda_n) {
  const double d = nu_value * nu_value + lambda_n * lambda_n;
  return {-nu_value * nu_value / d, nu_value * lambda_n / d};
}

MptSample synthesize_at(const ModalModel& model, double omega) {
  require(std::isfinite(omega) && omega >= 0.0, ErrorCode::kInvalidInput,
          "omega must be finite and non-negative");
  MptSample s;
  s.omega = omega;
  s.r_tilde = model.n0();
  if (omega == 0.0) return s;
  const double v = nu(model.alpha(), omega, model.sigma_star());
  const double a = model.alpha();
  const double pre = a * a * a / 4.0;
  SymmetricTensor3 r, i;
  for (const auto& m : model.modes()) {
    const auto b = beta(v, m.lambda);
    r += b.real() * m.weight;
    i += b.imag() * m.weight;
  }
  s.r_tilde += pre * r;
  s.i_part = pre * i;
  return s;
}

MptSignature synthesize(const ModalModel& model, std::span<const double> omegas, int threads) {
  for (std::size_t k = 0; k < omegas.size(); ++k) {
    require(std::isfinite(omegas[k]) && omegas[k] >= 0.0, ErrorCode::kInvalidInput,
            "omegas must be finite and non-negative");
    require(k == 0 || omegas[k] >= omegas[k - 1], ErrorCode::kInvalidInput,
            "omegas must be sorted ascending");
  }
  MptSignature sig;
  sig.alpha = model.alpha();
  sig.sigma_star = model.sigma_star();
  sig.mu_r = model.mu_r();
  sig.label = model.label();
  sig.samples.resize(omegas.size());

  const std::size_t n = omegas.size();
  const std::size_t workers = std::clamp<std::size_t>(threads, 1, std::max<std::size_t>(n, 1));
  auto run = [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) sig.samples[k] = synthesize_at(model, omegas[k]);
  };
  if (workers == 1) {
    run(0, n);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run, w * n / workers, (w + 1) * n / workers);
  }
  return sig;
}

MptSample high_frequency_limit(const ModalModel& model) {
  const double a = model.alpha();
  SymmetricTensor3 sum;
  for (const auto& m : model.modes()) sum += m.weight;
  MptSample s;
  s.omega = INFINITY;
  s.r_tilde = model.n0() - (a * a * a / 4.0) * sum;
  return s;
}

double eddy_limit(const EddyLimitParams& p) {
  for (double v : {p.c1, p.c2, p.eps_max, p.mu_max, p.sigma_min, p.d}) {
    require(std::isfinite(v) && v > 0.0, ErrorCode::kInvalidInput,
            "eddy-limit parameters must be finite and positive");
  }
  require(p.threshold > 0.0 && p.threshold < 1.0, ErrorCode::kInvalidInput,
          "eddy-limit threshold must lie in (0, 1)");
  const double quasi_static = std::sqrt(p.threshold / (p.c1 * p.eps_max * p.mu_max * p.d * p.d));
  const double conduction = p.threshold * p.sigma_min / (p.c2 * p.eps_max);
  return std::min(quasi_static, conduction);
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  require(n >= 1 && lo > 0.0 && hi >= lo, ErrorCode::kInvalidInput,
          "log grid needs n >= 1 and 0 < lo <= hi");
  std::vector<double> out(n);
  const double l0 = std::log10(lo), l1 = std::log10(hi);
  for (int k = 0; k < n; ++k) out[k] = n == 1 ? lo : std::pow(10.0, l0 + (l1 - l0) * k / (n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

std::vector<double> lin_spaced(double lo, double hi, int n) {
  require(n >= 1 && lo >= 0.0 && hi >= lo, ErrorCode::kInvalidInput,
          "linear grid needs n >= 1 and 0 <= lo <= hi");
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) out[k] = n == 1 ? lo : lo + (hi - lo) * k / (n - 1);
  out.back() = hi;
  return out;
}

}  // namespace mpt
