#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace catimpute {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: codebooks, CSV files, configs, out-of-range arguments.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// An imputation engine could not produce draws for the data it was given.
class EngineError : public Error {
 public:
  using Error::Error;
};

// The engine does not support this data shape (e.g. a multinomial target
// with more levels than the GLM engine is configured to accept).
class EngineUnsupported : public EngineError {
 public:
  EngineUnsupported(std::string variable, const std::string& what)
      : EngineError(what), variable_(std::move(variable)) {}

  const std::string& variable() const noexcept { return variable_; }

 private:
  std::string variable_;
};

// Iterative fit did not converge; carries the objective value per iteration.
class ConvergenceError : public EngineError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> trace)
      : EngineError(what), trace_(std::move(trace)) {}

  const std::vector<double>& trace() const noexcept { return trace_; }

 private:
  std::vector<double> trace_;
};

}  // namespace catimpute
