#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hometap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;

/// Runs one command. Exit status 0 on success, 2 on usage or input errors.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
/// Same, without the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hometap::cli
