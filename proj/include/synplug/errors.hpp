#pragma once

#include <stdexcept>
#include <string>

namespace synplug {

// Bad input data, malformed files, violated invariants. CLI exit code 2.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Endpoint unreachable, auth rejected, retries exhausted. CLI exit code 3.
class NetworkError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or other mid-training failure.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace synplug
