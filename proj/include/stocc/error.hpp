#pragma once

#include <stdexcept>
#include <string>

namespace stocc {

// Error taxonomy shared by the library and the command-line tool. Each class
// maps to one process exit code in `stocc` (usage 2, data 3, numerical 4).

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

}  // namespace stocc
