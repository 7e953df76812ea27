#pragma once

#include <stdexcept>
#include <string>

namespace attnsl {

// Error taxonomy mirrors the CLI exit codes: usage/config -> 1, data -> 2,
// numeric failure -> 3.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace attnsl
