#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace histo {

enum class ErrorCode {
  WindowExceedsDim,
  ImageSmallerThanWindow,
  NonIntegerStride,
  InvalidArgument,
  ShapeMismatch,
  NonFiniteLoss,
  BadMagic,
  UnsupportedVersion,
  TruncatedFile,
  NameCollision,
  EmptyTally,
  UnknownLabel,
  DuplicatePath,
  LengthMismatch,
  EmptyInput,
  IoError,
  UndecodableImage,
  ValidationFailed,
  ImageTooLarge,
  ModelNotLoaded,
  NotFound,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so that
/// the service and CLI layers can map it onto status codes without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace histo
