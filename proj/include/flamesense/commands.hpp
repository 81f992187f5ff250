#pragma once

#include "flamesense/error.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace flamesense::cli {

/// 2 for argument/config errors, 3 for data errors, 4 for numerical failures.
int exit_code(ErrorKind kind) noexcept;

/// Runs one `flamesense <subcommand> ...` invocation; `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flamesense::cli
