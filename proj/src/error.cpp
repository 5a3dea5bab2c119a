#include "ssml/error.hpp"

namespace ssml {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kZeroNormRow: return "ZeroNormRow";
    case ErrorCode::kIndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kShapeMismatch: return "ShapeMismatch";
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kInvalidGamma: return "InvalidGamma";
    case ErrorCode::kZeroNormOutput: return "ZeroNormOutput";
    case ErrorCode::kNonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::kCentroidRejectionExhausted: return "CentroidRejectionExhausted";
    case ErrorCode::kEmptyGallery: return "EmptyGallery";
    case ErrorCode::kQueryIdentityMissing: return "QueryIdentityMissing";
    case ErrorCode::kFormat: return "FormatError";
    case ErrorCode::kIo: return "IoError";
  }
  return "Unknown";
}

}  // namespace ssml
