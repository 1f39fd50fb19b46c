#pragma once

#include <stdexcept>
#include <string>

namespace netstate {

// Error categories map 1:1 onto CLI exit codes:
//   ConfigError -> 2, DataError -> 3, NumericalError -> 4, IoError -> 5.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (parse failures, invariant violations).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or other numerical breakdown inside a solver.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace netstate
