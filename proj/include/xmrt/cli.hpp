#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace xmrt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitModuleError = 1;
inline constexpr int kExitUsage = 2;

// Runs one subcommand. `args` excludes the program name, e.g.
// {"evaluate", "--config", "run.json"}.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int cli_main(int argc, char** argv);

}  // namespace xmrt
