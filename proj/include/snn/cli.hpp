#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace snn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFailure = 2;

inline constexpr const char* kToolVersion = "0.1.0";

// Entry point of the staa-snn tool. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace snn::cli
