#pragma once

#include <stdexcept>
#include <string>

namespace midcs {

// Process exit codes used by the command-line tool. Library errors carry one
// so the CLI can map failures without string matching.
enum class ExitCode : int {
  Ok = 0,
  Config = 2,
  Data = 3,
  Numeric = 4,
  Budget = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Invalid arguments or configuration values. The message names the offending
// field (e.g. "params.p").
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what)
      : Error(ExitCode::Config, what) {}
};

// Bad input data: non-finite samples, queries outside the cloud support,
// radius grids that miss every pair.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::Data, what) {}
};

// Precision loss, domain errors, non-convergence, unresolved quadrature.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what)
      : Error(ExitCode::Numeric, what) {}
};

// Work or memory budgets that would be exceeded.
class BudgetError : public Error {
 public:
  explicit BudgetError(const std::string& what)
      : Error(ExitCode::Budget, what) {}
};

}  // namespace midcs
