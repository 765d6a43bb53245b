#pragma once

#include <stdexcept>
#include <string>

namespace expband {

enum class ErrorKind { parse, domain, numeric, calibration };

// Base of every error thrown by the library. The kind selects the CLI exit code.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class ParseError : public Error {
public:
  explicit ParseError(const std::string& what) : Error(ErrorKind::parse, what) {}
};

// Invalid arguments: bad schemes, probabilities outside (0,1), infeasible levels, ...
class DomainError : public Error {
public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

// Iterations or quadrature that failed to converge.
class NumericError : public Error {
public:
  explicit NumericError(const std::string& what) : Error(ErrorKind::numeric, what) {}
};

class CalibrationError : public Error {
public:
  explicit CalibrationError(const std::string& what) : Error(ErrorKind::calibration, what) {}
};

// Corrupt calibration cache.
class IntegrityError : public CalibrationError {
public:
  explicit IntegrityError(const std::string& what) : CalibrationError(what) {}
};

const char* to_string(ErrorKind kind);
int exit_code(ErrorKind kind);

}  // namespace expband
