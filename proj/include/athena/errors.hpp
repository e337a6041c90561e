#pragma once

#include <stdexcept>
#include <string>

namespace athena {

// Error codes for every contract violation the library reports. Tests match
// on the code, messages carry the human-readable context.
enum class Errc {
  kMalformedLine,
  kIdOutOfRange,
  kMissingColumn,
  kBadValue,
  kBitRangeExceedsDlc,
  kTooFewFrames,
  kTooShort,
  kDegenerateInput,
  kEmptyInput,
  kEmptyGrid,
  kShapeMismatch,
  kInsufficientData,
  kSchemaMismatch,
  kIntegrityError,
  kLengthMismatch,
  kSingleClass,
  kInvalidSpec,
  kWindowOutOfRange,
  kUnknownTarget,
  kIoError,
};

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace athena
