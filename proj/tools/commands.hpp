#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace thermomerge::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2 };

// Runs one command line (args[0] is the program name). Results go to `out`,
// diagnostics to `err`. Files go to --out, else $THERMOMERGE_OUT, else
// ./thermomerge_out.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string default_data_dir();

}  // namespace thermomerge::cli
