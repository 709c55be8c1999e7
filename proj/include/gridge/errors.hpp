#pragma once

#include <stdexcept>

namespace gridge {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Incompatible matrix/vector shapes or out-of-range dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Not enough data for the requested operation.
class SizeError : public Error {
 public:
  using Error::Error;
};

/// A computation produced non-finite or otherwise invalid values.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A matrix factorization failed (rank deficiency, ill conditioning).
class FactorizationError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input; message carries the offending line number.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Response slicing produced an empty or undersized slice.
class SlicingError : public Error {
 public:
  using Error::Error;
};

/// Too few qualifying pairs for contour regression.
class ThresholdError : public Error {
 public:
  using Error::Error;
};

/// Rank-deficient sample covariance.
class RankError : public Error {
 public:
  using Error::Error;
};

}  // namespace gridge
