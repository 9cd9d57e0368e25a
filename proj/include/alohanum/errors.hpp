#ifndef ALOHANUM_ERRORS_HPP_
#define ALOHANUM_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace alohanum {

// Error categories map 1:1 onto CLI exit codes, see tools/.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad argument or malformed/inconsistent input (files, routes, ranges).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Queueing instability: arrival rate at or above service rate on a link.
class InstabilityError : public Error {
 public:
  explicit InstabilityError(const std::string& msg) : Error(msg) {}
};

// Requested constraint set has no feasible point.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& msg) : Error(msg) {}
};

// Iterative scheme produced NaN/Inf or a growing violation trend.
class DivergenceError : public Error {
 public:
  explicit DivergenceError(const std::string& msg) : Error(msg) {}
};

// Solver failed for numeric reasons other than divergence detection.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

// File system / serialization failures.
class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace alohanum

#endif  // ALOHANUM_ERRORS_HPP_
