#pragma once

#include <stdexcept>
#include <string>

namespace invlab {

/// Root of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters or inputs. The CLI maps this family to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A protocol-level assumption does not hold (e.g. the unperturbed
/// protocol does not invert the population).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Failures of a numerical method on otherwise valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class SingularDenominatorError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class StepSizeError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class DifferentiationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class QuadratureError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class FitDegeneracyError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class OrthogonalityDriftError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class GaugeBranchError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace invlab
