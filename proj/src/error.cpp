#include "histo/error.hpp"

namespace histo {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::WindowExceedsDim: return "WindowExceedsDim";
    case ErrorCode::ImageSmallerThanWindow: return "ImageSmallerThanWindow";
    case ErrorCode::NonIntegerStride: return "NonIntegerStride";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorCode::TruncatedFile: return "TruncatedFile";
    case ErrorCode::NameCollision: return "NameCollision";
    case ErrorCode::EmptyTally: return "EmptyTally";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::DuplicatePath: return "DuplicatePath";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::UndecodableImage: return "UndecodableImage";
    case ErrorCode::ValidationFailed: return "ValidationFailed";
    case ErrorCode::ImageTooLarge: return "ImageTooLarge";
    case ErrorCode::ModelNotLoaded: return "ModelNotLoaded";
    case ErrorCode::NotFound: return "NotFound";
  }
  return "Unknown";
}

}  // namespace histo
