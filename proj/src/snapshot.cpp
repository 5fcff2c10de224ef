#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <optional>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mpt/error.hpp"
#include "mpt/spectral.hpp"

namespace mpt {

namespace {

constexpr int kCoeffs = 12;
constexpr double kGreedyTarget = 1e-12;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

Eigen::Matrix<double, 1, kCoeffs> pack(const MptSample& s) {
  Eigen::Matrix<double, 1, kCoeffs> row;
  for (int k = 0; k < 6; ++k) {
    row(k) = s.r_tilde[k];
    row(6 + k) = s.i_part[k];
  }
  return row;
}

MptSample unpack(double omega, const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  MptSample s;
  s.omega = omega;
  for (int k = 0; k < 6; ++k) {
    s.r_tilde[k] = row(k);
    s.i_part[k] = row(6 + k);
  }
  return s;
}

// Barycentric rational r(z) = sum_j w_j f_j / (z - z_j) / sum_j w_j / (z - z_j)
// sharing one denominator across every column of f.
struct Rational {
  Vector support;   // z_j
  Vector weights;   // w_j
  Matrix values;    // f_j, one row per support point
  double residual = 0.0;
  bool pole_free = true;

  Eigen::RowVectorXd operator()(double z) const {
    Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(values.cols());
    double den = 0.0;
    for (Eigen::Index j = 0; j < support.size(); ++j) {
      const double d = z - support(j);
      if (d == 0.0) return values.row(j);
      const double c = weights(j) / d;
      num += c * values.row(j);
      den += c;
    }
    return num / den;
  }
};

// Poles of the barycentric form are the zeros of d(z) = sum_j w_j / (z - z_j).
// With D = diag(z_j - s) and P = I - w 1^T / (1^T w), the eigenvalues of
// P D are 0 and the zeros of d shifted by -s; s is placed below the band so
// the extra eigenvalue never lands inside it.
std::vector<double> real_poles_in_band(const Rational& r, double lo, double hi) {
  std::vector<double> out;
  const Eigen::Index m = r.support.size();
  if (m < 2) return out;
  const double span = hi - lo;
  const double total = r.weights.sum();
  if (std::abs(total) <= 1e-14 * r.weights.cwiseAbs().sum()) return out;
  const double shift = lo - span;
  const Vector d = r.support.array() - shift;
  Matrix pd = Matrix::Identity(m, m) - r.weights * Vector::Ones(m).transpose() / total;
  pd = pd * d.asDiagonal();
  Eigen::EigenSolver<Matrix> es(pd, false);
  for (Eigen::Index k = 0; k < m; ++k) {
    const auto pole = es.eigenvalues()(k) + shift;
    if (std::abs(pole.imag()) <= 1e-8 * span && pole.real() >= lo - 1e-12 * span &&
        pole.real() <= hi + 1e-12 * span)
      out.push_back(pole.real());
  }
  return out;
}

class RationalFitter {
 public:
  // One scale for every column: the reduced coordinates already carry
  // their singular values, so small columns stay small.
  RationalFitter(const Vector& z, const Matrix& f) : z_(z), f_(f) {
    double scale = f.cwiseAbs().maxCoeff();
    if (scale == 0.0) scale = 1.0;
    fs_ = f / scale;
  }

  // Least-squares weights for the given supports (smallest right singular
  // vector of the stacked Loewner matrix); fills `approx` on the other nodes.
  Rational solve(const std::vector<Eigen::Index>& sup, Matrix* approx = nullptr) const {
    const Eigen::Index n = z_.size(), cols = f_.cols();
    std::vector<bool> used(n, false);
    for (auto j : sup) used[j] = true;
    std::vector<Eigen::Index> rest;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!used[i]) rest.push_back(i);
    const auto m = static_cast<Eigen::Index>(sup.size());
    const auto r = static_cast<Eigen::Index>(rest.size());

    Matrix cauchy(r, m);
    for (Eigen::Index a = 0; a < r; ++a)
      for (Eigen::Index b = 0; b < m; ++b) cauchy(a, b) = 1.0 / (z_(rest[a]) - z_(sup[b]));
    Matrix loewner(r * cols, m);
    for (Eigen::Index c = 0; c < cols; ++c)
      for (Eigen::Index a = 0; a < r; ++a)
        for (Eigen::Index b = 0; b < m; ++b)
          loewner(c * r + a, b) = (fs_(rest[a], c) - fs_(sup[b], c)) * cauchy(a, b);
    Eigen::JacobiSVD<Matrix> svd(loewner, Eigen::ComputeFullV);
    const Vector w = svd.matrixV().col(m - 1);

    double residual = 0.0;
    for (Eigen::Index a = 0; a < r; ++a) {
      const Eigen::RowVectorXd cw = cauchy.row(a).cwiseProduct(w.transpose());
      Eigen::RowVectorXd num = Eigen::RowVectorXd::Zero(cols);
      for (Eigen::Index b = 0; b < m; ++b) num += cw(b) * fs_.row(sup[b]);
      const Eigen::RowVectorXd value = num / cw.sum();
      if (approx) approx->row(rest[a]) = value;
      residual = std::max(residual, (fs_.row(rest[a]) - value).cwiseAbs().maxCoeff());
    }

    Rational out;
    out.support.resize(m);
    out.values.resize(m, cols);
    for (Eigen::Index b = 0; b < m; ++b) {
      out.support(b) = z_(sup[b]);
      out.values.row(b) = f_.row(sup[b]);
    }
    out.weights = w;
    out.residual = std::isfinite(residual) ? residual : std::numeric_limits<double>::infinity();
    out.pole_free = real_poles_in_band(out, z_.minCoeff(), z_.maxCoeff()).empty();
    return out;
  }

  // Greedy AAA: supports are added where the current fit is worst until the
  // fit on the remaining nodes is within `target` and free of real poles in
  // the band. At most max_support points are used so that at least as many
  // nodes act as a held-out check. If no step qualifies, spurious poles of
  // the most accurate step are removed by dropping their nearest supports.
  Rational fit(int max_support, double target) const {
    const Eigen::Index n = z_.size();
    std::vector<bool> free(n, true);
    std::vector<Eigen::Index> sup;
    Matrix approx = fs_.colwise().mean().replicate(n, 1);
    std::optional<Rational> best;
    std::vector<Eigen::Index> best_sup;

    for (int it = 0; it < max_support; ++it) {
      Eigen::Index j = -1;
      double worst = -1.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!free[i]) continue;
        const double e = (fs_.row(i) - approx.row(i)).cwiseAbs().maxCoeff();
        if (e > worst) {
          worst = e;
          j = i;
        }
      }
      sup.push_back(j);
      free[j] = false;
      auto cand = solve(sup, &approx);
      if (cand.pole_free && cand.residual <= target) return cand;
      if (!best || cand.residual < best->residual) {
        best = cand;
        best_sup = sup;
      }
    }

    for (int round = 0; round < 3 && !best->pole_free && best_sup.size() > 1; ++round) {
      for (double p : real_poles_in_band(*best, z_.minCoeff(), z_.maxCoeff())) {
        if (best_sup.size() <= 1) break;
        const auto near = std::min_element(best_sup.begin(), best_sup.end(), [&](auto a, auto b) {
          return std::abs(z_(a) - p) < std::abs(z_(b) - p);
        });
        best_sup.erase(near);
      }
      best = solve(best_sup);
    }
    return *best;
  }

 private:
  const Vector& z_;
  const Matrix& f_;
  Matrix fs_;
};

// Fritsch-Carlson monotone cubic Hermite interpolation, one column at a time.
class MonotoneCubic {
 public:
  MonotoneCubic(Vector x, Matrix y) : x_(std::move(x)), y_(std::move(y)), d_(y_.rows(), y_.cols()) {
    const Eigen::Index n = x_.size();
    for (Eigen::Index c = 0; c < y_.cols(); ++c) {
      Vector delta(n - 1);
      for (Eigen::Index i = 0; i + 1 < n; ++i) delta(i) = (y_(i + 1, c) - y_(i, c)) / (x_(i + 1) - x_(i));
      d_(0, c) = end_slope(x_(1) - x_(0), x_(2) - x_(1), delta(0), delta(1));
      d_(n - 1, c) = end_slope(x_(n - 1) - x_(n - 2), x_(n - 2) - x_(n - 3), delta(n - 2), delta(n - 3));
      for (Eigen::Index i = 1; i + 1 < n; ++i) {
        if (delta(i - 1) * delta(i) <= 0.0) {
          d_(i, c) = 0.0;
        } else {
          const double h0 = x_(i) - x_(i - 1), h1 = x_(i + 1) - x_(i);
          const double w1 = 2 * h1 + h0, w2 = h1 + 2 * h0;
          d_(i, c) = (w1 + w2) / (w1 / delta(i - 1) + w2 / delta(i));
        }
      }
    }
  }

  Eigen::RowVectorXd operator()(double x) const {
    const auto it = std::upper_bound(x_.data(), x_.data() + x_.size(), x);
    Eigen::Index i = std::clamp<Eigen::Index>(it - x_.data() - 1, 0, x_.size() - 2);
    const double h = x_(i + 1) - x_(i);
    const double t = (x - x_(i)) / h;
    const double h00 = (1 + 2 * t) * (1 - t) * (1 - t), h10 = t * (1 - t) * (1 - t);
    const double h01 = t * t * (3 - 2 * t), h11 = t * t * (t - 1);
    return h00 * y_.row(i) + h10 * h * d_.row(i) + h01 * y_.row(i + 1) + h11 * h * d_.row(i + 1);
  }

 private:
  static double end_slope(double h0, double h1, double del0, double del1) {
    double d = ((2 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if (d * del0 <= 0.0) {
      d = 0.0;
    } else if (del0 * del1 <= 0.0 && std::abs(d) > std::abs(3 * del0)) {
      d = 3 * del0;
    }
    return d;
  }

  Vector x_;
  Matrix y_;
  Matrix d_;
};

// Refits the reduced coordinates without each interior node in turn and
// returns the worst error of the reconstructed coefficients at the omitted
// node, each coefficient normalised by its largest snapshot magnitude.
double cross_validate(const Vector& z, const Matrix& coords, const Matrix& basis, const Matrix& s) {
  const Eigen::Index n = z.size();
  Eigen::RowVectorXd scale = s.cwiseAbs().colwise().maxCoeff();
  for (Eigen::Index c = 0; c < scale.size(); ++c)
    if (scale(c) == 0.0) scale(c) = 1.0;
  double worst = 0.0;
  for (Eigen::Index k = 1; k + 1 < n; ++k) {
    Vector zk(n - 1);
    Matrix fk(n - 1, coords.cols());
    zk << z.head(k), z.tail(n - 1 - k);
    fk << coords.topRows(k), coords.bottomRows(n - 1 - k);
    const auto r = RationalFitter(zk, fk).fit(static_cast<int>((n - 1) / 2), kGreedyTarget);
    if (!r.pole_free) return std::numeric_limits<double>::infinity();
    const Eigen::RowVectorXd err = (r(z(k)) * basis - s.row(k)).cwiseAbs().cwiseQuotient(scale);
    if (!err.allFinite()) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, err.maxCoeff());
  }
  return worst;
}

void validate_snapshots(const MptSignature& s) {
  const auto n = s.samples.size();
  if (n < 4) throw Error(ErrorCode::kInvalidInput, "snapshot interpolation needs at least 4 snapshots");
  for (std::size_t k = 0; k < n; ++k) {
    const double w = s.samples[k].omega;
    if (!(std::isfinite(w) && w > 0.0))
      throw Error(ErrorCode::kInvalidInput, "snapshot frequencies must be finite and positive");
    if (k > 0 && !(w > s.samples[k - 1].omega))
      throw Error(ErrorCode::kInvalidInput, "snapshot frequencies must be strictly ascending");
    if (!s.samples[k].r_tilde.is_finite() || !s.samples[k].i_part.is_finite())
      throw Error(ErrorCode::kInvalidInput, "snapshot coefficients must be finite");
  }
}

}  // namespace

SnapshotFit snapshot_interpolate(const MptSignature& snapshots, std::span<const double> targets,
                                 const SnapshotOptions& options) {
  validate_snapshots(snapshots);
  if (!(options.truncation_tol >= 0.0))
    throw Error(ErrorCode::kInvalidInput, "truncation tolerance must be non-negative");
  const auto& snaps = snapshots.samples;
  const auto n = static_cast<Eigen::Index>(snaps.size());
  const double lo = snaps.front().omega, hi = snaps.back().omega;
  for (double t : targets) {
    if (!(t >= lo && t <= hi))
      throw Error(ErrorCode::kExtrapolation, "target frequency " + std::to_string(t) +
                                                 " lies outside the snapshot band");
  }

  Matrix s(n, kCoeffs);
  Vector omega(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    s.row(k) = pack(snaps[k]);
    omega(k) = snaps[k].omega;
  }

  Eigen::JacobiSVD<Matrix> svd(s, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sv = svd.singularValues();
  Eigen::Index rank = 0;
  if (sv.size() > 0 && sv(0) > 0.0) {
    while (rank < sv.size() && sv(rank) > 0.0 && sv(rank) / sv(0) >= options.truncation_tol) ++rank;
  }
  const Matrix coords = svd.matrixU().leftCols(rank) * sv.head(rank).asDiagonal();
  const Matrix basis = svd.matrixV().leftCols(rank).transpose();

  SnapshotFit fit;
  fit.retained_modes = static_cast<int>(rank);
  fit.signature.alpha = snapshots.alpha;
  fit.signature.sigma_star = snapshots.sigma_star;
  fit.signature.mu_r = snapshots.mu_r;
  fit.signature.label = snapshots.label;
  fit.signature.omega_limit = snapshots.omega_limit;

  std::optional<Rational> rational;
  if (rank > 0 && options.scheme != InterpolationScheme::kMonotoneCubic) {
    const Vector z = omega / hi;
    rational = RationalFitter(z, coords).fit(static_cast<int>(n / 2), kGreedyTarget);
    fit.held_out_residual = cross_validate(z, coords, basis, s);
    const bool ok = rational->pole_free && fit.held_out_residual <= options.rational_fit_tol;
    if (!ok && options.scheme == InterpolationScheme::kAuto) rational.reset();
  }
  fit.scheme_used = rational ? InterpolationScheme::kRational : InterpolationScheme::kMonotoneCubic;
  std::optional<MonotoneCubic> cubic;
  if (!rational && rank > 0) cubic.emplace(omega.array().log().matrix(), coords);

  fit.signature.samples.reserve(targets.size());
  for (double t : targets) {
    const auto hit = std::lower_bound(omega.data(), omega.data() + n, t);
    if (hit != omega.data() + n && *hit == t) {
      fit.signature.samples.push_back(unpack(t, s.row(hit - omega.data())));
      continue;
    }
    Eigen::RowVectorXd c(rank);
    if (rank > 0) c = rational ? (*rational)(t / hi) : (*cubic)(std::log(t));
    const Eigen::RowVectorXd row = rank > 0 ? Eigen::RowVectorXd(c * basis) : Eigen::RowVectorXd::Zero(kCoeffs);
    fit.signature.samples.push_back(unpack(t, row));
  }
  return fit;
}

std::vector<double> leave_one_out_error(const MptSignature& snapshots, const SnapshotOptions& options) {
  validate_snapshots(snapshots);
  const auto& snaps = snapshots.samples;
  const std::size_t n = snaps.size();
  if (n < 5) throw Error(ErrorCode::kInvalidInput, "leave-one-out needs at least 5 snapshots");

  Eigen::Matrix<double, 1, kCoeffs> scale = Eigen::Matrix<double, 1, kCoeffs>::Zero();
  for (const auto& sm : snaps) scale = scale.cwiseMax(pack(sm).cwiseAbs());
  for (int c = 0; c < kCoeffs; ++c)
    if (scale(c) == 0.0) scale(c) = 1.0;

  std::vector<double> errors;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    MptSignature reduced = snapshots;
    reduced.samples.erase(reduced.samples.begin() + static_cast<std::ptrdiff_t>(k));
    const double target = snaps[k].omega;
    const auto pred = snapshot_interpolate(reduced, std::span<const double>(&target, 1), options);
    const Eigen::Matrix<double, 1, kCoeffs> diff =
        (pack(pred.signature.samples[0]) - pack(snaps[k])).cwiseAbs();
    errors.push_back(diff.cwiseQuotient(scale).maxCoeff());
  }
  return errors;
}

}  // namespace mpt
