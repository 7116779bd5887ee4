#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace motionfc {

/// Entry point of the `motionfc` tool. `args` excludes the program name.
/// Returns 0 on success, 1 for validation errors and 2 for runtime or
/// divergence errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace motionfc
