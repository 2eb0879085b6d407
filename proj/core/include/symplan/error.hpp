#pragma once

#include <stdexcept>
#include <string>

namespace symplan {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised when an action's precondition or a state invariant does not hold.
// predicate() names the violated condition in a stable, machine-readable form.
class PreconditionViolation : public Error {
 public:
  PreconditionViolation(std::string predicate, const std::string& what);

  const std::string& predicate() const noexcept { return predicate_; }

 private:
  std::string predicate_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace symplan
