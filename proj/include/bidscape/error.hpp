#pragma once

#include <stdexcept>
#include <string>

namespace bidscape {

/// Base for failures caused by the data being processed rather than by a
/// programming error. The CLI maps these to exit code 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

/// A persisted artifact failed to parse or its checksum did not match.
class IntegrityError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace bidscape
