#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace polydec {

// Entry point behind the polydec binary. args excludes the program name.
// Returns the process exit code: 0 success, 1 runtime failure, 2 usage
// error; failures print one-line JSON to err.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace polydec
