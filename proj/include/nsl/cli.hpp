#ifndef NSL_CLI_HPP
#define NSL_CLI_HPP

#include <string>
#include <vector>

namespace nsl {

// Runs one CLI invocation (args exclude the program name). Exit codes:
// 0 success, 1 validation error, 2 data error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace nsl

#endif  // NSL_CLI_HPP
