#pragma once

#include <stdexcept>
#include <string>

namespace rdcc {

// Malformed or inconsistent external input: corpus records, lexicon files,
// config files, model files. Mapped to exit code 2 by the CLI.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values, diverged training, unsatisfiable decoding constraints.
// Mapped to exit code 3 by the CLI.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace rdcc
