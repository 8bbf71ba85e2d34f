#pragma once

#include <iosfwd>
#include <string_view>

namespace lsedit::cli {

inline constexpr std::string_view kVersion = "0.1.0";
// Environment variable naming the default configuration file.
inline constexpr const char* kConfigEnv = "LSEDIT_CONFIG";

// Runs one command line. Exit status: 0 success, 1 usage error,
// 2 data/validation/IO error, 3 numerical failure.
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace lsedit::cli
