#pragma once

// Command-line driver behind the levycouple executable. Kept in the library
// so tests can invoke subcommands in-process and assert on exit codes and
// emitted artifacts. Exit codes: 0 success, 1 configuration or io error,
// 2 numeric failure.

#include <ostream>
#include <string>
#include <vector>

namespace levycouple::cli {

int run(std::vector<std::string> args, std::ostream& out, std::ostream& err);

} // namespace levycouple::cli
