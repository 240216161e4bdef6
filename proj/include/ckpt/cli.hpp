#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace ckpt {

// Process exit codes; scripts depend on these values.
enum ExitCode : int {
  kExitOk = 0,
  kExitInvalid = 1,  // validation failed / no valid checkpoint
  kExitUsage = 2,
  kExitIo = 3,
};

// `args` excludes the program name.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_dispatch(int argc, char** argv);

}  // namespace ckpt
