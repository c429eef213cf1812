#pragma once

#include <string>
#include <vector>

#include "lesiondiff/config.hpp"

namespace lesiondiff::cli {

enum ExitCode : int {
  kSuccess = 0,
  kUsage = 1,
  kConfigError = 2,
  kInputError = 3,
  kNumericalError = 4,
};

// Parses `args` (args[0] is the program name) and runs the selected command.
// Errors are reported on stderr and mapped to exit codes.
int run(const std::vector<std::string>& args);

// Individual commands on an already resolved configuration. They throw on failure.
void gen_phantoms(const RunConfig& cfg);
void train(const RunConfig& cfg);
void fill(const RunConfig& cfg);
void synth(const RunConfig& cfg);
void eval(const RunConfig& cfg);

}  // namespace lesiondiff::cli
