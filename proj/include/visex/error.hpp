#pragma once

#include <stdexcept>
#include <string>

namespace visex {

// Input violates a documented contract (bad file, bad argument). CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Failure while running an otherwise valid request (non-finite loss, I/O). CLI exit code 2.
class RuntimeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace visex
