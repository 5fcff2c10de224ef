#pragma once

#include <stdexcept>
#include <string>

namespace mpt {

enum class ErrorCode {
  kInvalidInput,
  kInvalidModel,
  kDegenerateContrast,
  kNoEquivalentEllipsoid,
  kConvergence,
  kSingularity,
  kUnderdetermined,
  kRankDeficient,
  kExtrapolation,
  kIncompatibleFeatures,
};

const char* to_string(ErrorCode code);

// Every failure raised by the library carries a machine-readable code so the
// CLI can map it onto an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Convergence failures also report how far from a solution the iteration got.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(ErrorCode::kConvergence, what), residual_(residual) {}

  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class RankDeficiencyError : public Error {
 public:
  RankDeficiencyError(const std::string& what, int null_space_dim)
      : Error(ErrorCode::kRankDeficient, what), null_space_dim_(null_space_dim) {}

  int null_space_dimension() const noexcept { return null_space_dim_; }

 private:
  int null_space_dim_;
};

}  // namespace mpt
