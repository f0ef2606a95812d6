#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace dagmix::cli {

enum ExitCode : int { ok = 0, usage = 2, invalid_input = 3, numerical = 4 };

// Runs one command line (args excludes the program name). Artifacts go to the
// --out directory; errors are reported on `err` as a JSON record.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dagmix::cli
