#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "mpt/error.hpp"

namespace mpt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;
inline constexpr int kExitInfeasible = 3;
inline constexpr int kExitNonConvergence = 4;

int exit_code(ErrorCode code);

// Runs one command line (without the program name). Reports go to `out`,
// diagnostics to `err`; the return value is the process exit status.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace mpt::cli
