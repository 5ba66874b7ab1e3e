#pragma once

#include <stdexcept>
#include <string>

namespace pmlda {

/// Bad input values: dimension mismatches, invalid simplices, out-of-range
/// hyperparameters.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string &what) : std::invalid_argument(what) {}
};

/// Unreadable, unwritable or malformed files.
class IoError : public std::runtime_error {
public:
  explicit IoError(const std::string &what) : std::runtime_error(what) {}
};

} // namespace pmlda
