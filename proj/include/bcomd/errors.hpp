#pragma once

#include <stdexcept>
#include <string>

namespace bcomd {

/// Bad input: out-of-range values, malformed files, broken invariants.
class ValidationError : public std::invalid_argument
{
public:
  explicit ValidationError(const std::string &what) : std::invalid_argument(what) {}
};

/// A slot (or a whole trace) with no feasible point, or a Slater margin <= 0.
class InfeasibleError : public std::runtime_error
{
public:
  explicit InfeasibleError(const std::string &what) : std::runtime_error(what) {}
};

} // namespace bcomd
