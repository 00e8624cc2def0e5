#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace updd {

// Exit codes of the command-line tool.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitNumeric = 3,
};

// Environment variable naming the default data source for --data.
inline constexpr const char* kDataDirEnv = "UPDD_DATA_DIR";

// Runs one command (`train`, `eval`, `ablate`, `predict`, `synth`).
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace updd
