#include "symplan/error.hpp"

namespace symplan {

PreconditionViolation::PreconditionViolation(std::string predicate, const std::string& what)
    : Error(what + " (violated: " + predicate + ")"), predicate_(std::move(predicate)) {}

}  // namespace symplan
