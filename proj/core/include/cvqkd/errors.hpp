#pragma once

#include <stdexcept>
#include <string>

namespace cvqkd {

/// Base error for everything this library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The supplied targets admit no density matrix (or no matrix at all).
/// Carries a short certificate description of why.
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& what) : Error(what) {}
};

/// A numerical routine failed to reach its tolerance. `achieved` records
/// how far it got, so callers can decide whether the result is usable.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double achieved)
      : Error(what + " (achieved " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  explicit NumericalError(const std::string& what) : Error(what), achieved_(0.0) {}

  double achieved() const { return achieved_; }

 private:
  double achieved_;
};

}  // namespace cvqkd
