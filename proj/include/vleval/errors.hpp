#pragma once

#include <stdexcept>
#include <string>

namespace vleval {

// Base class for every error raised by the harness.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input files or violated record invariants.
class InputError : public Error {
 public:
  using Error::Error;
};

// A judge or embedding provider could not produce a usable reply.
class ProviderError : public Error {
 public:
  using Error::Error;
};

// Run configuration problems detected before any evaluation starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace vleval
