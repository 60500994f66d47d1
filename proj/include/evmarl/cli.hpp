#pragma once

#include <string>
#include <vector>

namespace evmarl {

/// Runs the evmarl command line; args excludes the program name. Returns the
/// process exit code and reports failures on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace evmarl
