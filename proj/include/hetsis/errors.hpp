#pragma once

#include <stdexcept>
#include <string>

namespace hetsis {

/// Bad caller input: out-of-range parameters, malformed config, unknown names.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input that is formally valid but leaves nothing to normalize or solve.
class DegenerateInput : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A numerical procedure failed to produce a result.
class NumericalFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// R0(t) never reaches one on the probed time range.
class NoCrossing : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

/// Too few points inside a fit window.
class InsufficientData : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hetsis
