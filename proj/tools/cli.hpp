#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace pfcast::cli {

/// Runs one command line and returns the process exit code. `env` holds the
/// PF_* variables to apply.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::map<std::string, std::string>& env);

}  // namespace pfcast::cli
