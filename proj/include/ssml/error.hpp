#ifndef SSML_ERROR_HPP
#define SSML_ERROR_HPP

#include <stdexcept>
#include <string>
#include <string_view>

namespace ssml {

enum class ErrorCode {
  kZeroNormRow,
  kIndexOutOfRange,
  kDimensionMismatch,
  kShapeMismatch,
  kInvalidArgument,
  kInvalidGamma,
  kZeroNormOutput,
  kNonFiniteGradient,
  kCentroidRejectionExhausted,
  kEmptyGallery,
  kQueryIdentityMissing,
  kFormat,
  kIo,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; code() identifies the
// failure class so callers (and tests) can branch on it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ssml

#endif  // SSML_ERROR_HPP
