#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <vector>

#include "mpt/tensor.hpp"

namespace mpt {

using Vec3c = Eigen::Vector3cd;

// Planar circular receiver coil.
struct ReceiverCoil {
  Vec3 center = Vec3::Zero();  // m
  Vec3 normal = Vec3::UnitZ();  // normalised on use
  double radius = 0.01;         // m
  int quadrature_order = 8;     // radial Gauss points; twice as many angles
};

struct CoilLayout {
  std::vector<Vec3> exciters;  // background field H0 at z for each exciter, A/m
  std::vector<ReceiverCoil> receivers;
  Vec3 z = Vec3::Zero();  // object position, m
};

// Throws kInvalidInput for empty lists, non-finite values, a zero normal, a
// non-positive radius or order, or a receiver whose disc contains z.
void validate_layout(const CoilLayout& layout);

// Voltages indexed by (receiver n, exciter m).
struct VoltageSet {
  double omega = 0.0;
  int receivers = 0;
  int exciters = 0;
  std::vector<std::complex<double>> values;  // row index n * exciters + m

  std::complex<double>& at(int n, int m) { return values[n * exciters + m]; }
  std::complex<double> at(int n, int m) const { return values[n * exciters + m]; }
};

// Hessian of G(x, z) = 1 / (4 pi |x - z|); throws kSingularity for
// |x - z| < 1e-12 m.
Mat3 green_hessian(const Vec3& x, const Vec3& z);

// (H_alpha - H0)(x) = D^2 G(x, z) M H0(z) with M = r_tilde + i i_part.
Vec3c forward_perturbation(const MptSample& mpt, const Vec3& h0_at_z, const Vec3& x, const Vec3& z);

// Flux of the perturbed field through the receiver disc, by a polar tensor
// grid: Gauss-Legendre in the radius and the equally spaced rule in the angle.
std::complex<double> induced_voltage(const ReceiverCoil& coil, const MptSample& mpt,
                                     const Vec3& h0_at_z, const Vec3& z);

// Integral of D^2 G(x, z) n over the disc of the coil.
Vec3 coil_moment(const ReceiverCoil& coil, const Vec3& z);

VoltageSet simulate_voltages(const CoilLayout& layout, const MptSample& mpt);

// Real design matrix mapping (M11, M22, M33, M12, M13, M23) to voltages. Row
// i = n * M_e + m pairs receiver n with exciter m; off-diagonal columns carry
// both symmetric contributions g_q H_r + g_r H_q.
struct RecoverySystem {
  Eigen::MatrixXd a;
  int receivers = 0;
  int exciters = 0;
  int rank = 0;
  double condition_number = 0.0;  // s_max / s_min of a; infinite when rank < 6
};

// Throws kUnderdetermined unless M_e M_r > 6.
RecoverySystem assemble_system(const CoilLayout& layout);

struct Recovery {
  MptSample mpt;
  double residual = 0.0;  // ||A u - b||_2 over real and imaginary parts
};

// Least-squares solve by column-pivoted Householder QR. Throws
// RankDeficiencyError when the design matrix has rank < 6.
Recovery recover_mpt(const RecoverySystem& system, const VoltageSet& voltages);

// Adds symmetric Gaussian perturbations E_r, E_i with entrywise standard
// deviation level * ||part||_F / 3.
MptSample add_noise(const MptSample& mpt, double level, std::uint64_t seed);

// Multiplies the real and imaginary part of every voltage by independent
// factors 1 + level * xi, xi ~ N(0, 1).
VoltageSet add_voltage_noise(const VoltageSet& v, double level, std::uint64_t seed);

// ||A - B||_F / ||B||_F over both parts.
double relative_error(const MptSample& a, const MptSample& b);

struct RoundTripStats {
  int trials = 0;
  double mean_error = 0.0;
  double max_error = 0.0;
  double mean_residual = 0.0;
  double condition_number = 0.0;
  Recovery first;  // recovery from the first trial
};

// Simulates voltages for `mpt`, perturbs them with multiplicative noise and
// recovers the tensor `trials` times. Trial t uses derive_seed(seed, t).
RoundTripStats measurement_round_trip(const CoilLayout& layout, const MptSample& mpt, double noise,
                                      int trials, std::uint64_t seed);

}  // namespace mpt
