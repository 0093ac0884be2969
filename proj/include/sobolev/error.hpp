#pragma once

#include <stdexcept>
#include <string>

namespace sobolev {

/// Input/parameter dimension disagreement (point width vs network width, shapes).
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A derivative of total order above the supported cap, or a loss order a
/// problem cannot provide.
class UnsupportedOrder : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A jet does not carry a partial that an operator needs.
class MissingDerivative : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Loss variant / problem pairing that has no meaning (e.g. fp1 on heat).
class IncompatibleVariant : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Bad configuration value (unknown name, empty budget, ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised by the optimizer when a gradient entry is NaN or infinite.
class NonFiniteGradient : public std::runtime_error {
 public:
  NonFiniteGradient(std::size_t index, double value)
      : std::runtime_error("non-finite gradient entry at index " + std::to_string(index) +
                           " (value " + std::to_string(value) + ")"),
        index_(index),
        value_(value) {}
  std::size_t index() const noexcept { return index_; }
  double value() const noexcept { return value_; }

 private:
  std::size_t index_;
  double value_;
};

}  // namespace sobolev
