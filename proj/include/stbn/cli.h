#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace stbn::cli {

enum ExitCode : int {
    kExitOk = 0,
    kExitConfig = 2,
    kExitIo = 3,
    kExitValidation = 4,
};

// Entry point behind the `stbn` tool. args[0] is the program name.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

}  // namespace stbn::cli
