#pragma once

#include <stdexcept>
#include <string>

namespace unlearn {

// Error categories. The CLI maps each category to a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or missing input files, wrong tensor shapes, bad labels.
class InputError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters or experiment settings.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or diverged training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// API misuse: incongruent tables, stale forward traces, empty inputs.
class UsageError : public Error {
 public:
  using Error::Error;
};

}  // namespace unlearn
