#pragma once

#include <stdexcept>
#include <string>

namespace asetrap {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied arguments or files that violate a documented precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A computation could not produce a trustworthy result (unattainable filter,
/// exhausted noise trace, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace asetrap
