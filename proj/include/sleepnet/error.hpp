#pragma once

#include <stdexcept>
#include <string>

namespace sleepnet {

// Every library failure derives from Error so callers can catch one type.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Vector or matrix dimensions disagree.
struct InputShapeError : Error {
  using Error::Error;
};

// Values outside their documented domain (pixels outside [0,1], bad config).
struct InputValidationError : Error {
  using Error::Error;
};

// A caller broke an operation's precondition (wrong polarity, missing trace).
struct ContractViolation : Error {
  using Error::Error;
};

// NaN or infinity where finite numbers are required.
struct NumericError : Error {
  using Error::Error;
};

// Malformed file contents (bad magic number, unparsable config line).
struct FormatError : Error {
  using Error::Error;
};

// File shorter than its header promises.
struct LengthError : Error {
  using Error::Error;
};

// Parts of a dataset disagree with each other (counts, label range).
struct ConsistencyError : Error {
  using Error::Error;
};

// Not enough samples of some class for the requested split.
struct CapacityError : Error {
  using Error::Error;
};

// Plastic weights grew past the safety ceiling.
struct WeightExplosion : Error {
  using Error::Error;
};

inline void require_shape(bool ok, const std::string& what) {
  if (!ok) throw InputShapeError(what);
}

}  // namespace sleepnet
