#pragma once

#include <stdexcept>
#include <string>

namespace fast {

/// Raised for malformed inputs, shape mismatches and invalid configurations.
/// The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fast
