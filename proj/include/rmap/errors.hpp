#pragma once

#include <stdexcept>
#include <string>

namespace rmap {

/// Malformed or out-of-contract input (dimension mismatch, bad JSON, caps).
class InputError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// A point lies on (or too close to) the degenerate locus det g = 0.
class DomainError : public std::domain_error {
public:
  DomainError(const std::string &what, double det, double cond)
      : std::domain_error(what), det_(det), cond_(cond) {}
  explicit DomainError(const std::string &what)
      : DomainError(what, 0.0, 0.0) {}

  double det() const noexcept { return det_; }
  double condition() const noexcept { return cond_; }

private:
  double det_;
  double cond_;
};

/// A bundle structure that is not the image of a Hessian chart under the r-map.
class NotInImageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A closed form was requested outside the regime where it is valid.
class UnsupportedModeError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

} // namespace rmap
