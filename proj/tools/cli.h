#ifndef PAGEOPT_TOOLS_CLI_H_
#define PAGEOPT_TOOLS_CLI_H_

#include <iosfwd>
#include <string>
#include <vector>

namespace pageopt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitFailure = 2;

// `args` excludes the program name.
int Run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err);

}  // namespace pageopt::cli

#endif  // PAGEOPT_TOOLS_CLI_H_
