#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chanrt {

enum class ErrorCode {
  // runtime
  EmptyInstanceId,
  UnknownModuleClass,
  DuplicateInstanceName,
  UnknownModule,
  TypeConflict,
  PayloadTypeMismatch,
  InvalidTimerSpec,
  NonMonotonicTimestamp,
  // serialization
  TruncatedInput,
  UnknownTag,
  InvalidUtf8,
  InvalidStruct,
  NestingTooDeep,
  // network
  PortInUse,
  HandshakeVersionMismatch,
  MalformedFrame,
  ConnectionRefused,
  SessionClosed,
  // configuration
  MalformedXml,
  MissingClassAttribute,
  InvalidProperty,
  // storage and sync
  StorageFull,
  IoError,
  PeerDisconnected,
  UnknownSensorId,
  // ml
  WindowLargerThanSignal,
  DimensionMismatch,
  LengthMismatch,
  Timeout,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  explicit Error(ErrorCode code) : std::runtime_error(std::string(to_string(code))), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace chanrt
