#pragma once

#include <stdexcept>
#include <string>

namespace hvsim {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration or invalid user input.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// Integration failed: non-finite values, norm drift, stalled trajectories.
class NumericalError : public Error {
  public:
    using Error::Error;
};

/// A guidance velocity was requested where |psi|^2 is below the node threshold.
class NodeError : public NumericalError {
  public:
    NodeError(const std::string& what, double density)
        : NumericalError(what), density_(density) {}

    [[nodiscard]] double density() const noexcept { return density_; }

  private:
    double density_;
};

/// A built-in physics check of an experiment did not hold.
class InvariantError : public Error {
  public:
    using Error::Error;
};

}  // namespace hvsim
