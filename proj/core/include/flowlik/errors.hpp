#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace flowlik {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the function (e.g. t outside [0, T]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or incomplete configuration (missing condition mean, bad schedule constants).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The caller violated a precondition (dimension mismatch, empty batch, Null guidance).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A non-finite value appeared in a state vector at time `time()`.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double t) : Error(what), time_(t) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// Training diverged; `step()` is the zero-based optimizer step that produced a non-finite loss.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace flowlik
