#pragma once

#include <stdexcept>
#include <string>

namespace krflow {

/// Metric degeneracy: a quantity that must be positive (an eigenvalue,
/// a log-det argument) came out nonpositive.
class positivity_error : public std::runtime_error {
 public:
  explicit positivity_error(const std::string& what) : std::runtime_error(what) {}
};

/// A computed quantity failed its internal accuracy cross-check
/// (dual-path extraction disagreement, extrapolation spread, fit residual).
class accuracy_error : public std::runtime_error {
 public:
  explicit accuracy_error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed configuration input.
class config_error : public std::runtime_error {
 public:
  explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

/// Failed file read or write; the message carries the path.
class io_error : public std::runtime_error {
 public:
  explicit io_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace krflow
