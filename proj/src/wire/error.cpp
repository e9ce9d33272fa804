#include "chanrt/error.hpp"

namespace chanrt {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::EmptyInstanceId: return "EmptyInstanceId";
    case ErrorCode::UnknownModuleClass: return "UnknownModuleClass";
    case ErrorCode::DuplicateInstanceName: return "DuplicateInstanceName";
    case ErrorCode::UnknownModule: return "UnknownModule";
    case ErrorCode::TypeConflict: return "TypeConflict";
    case ErrorCode::PayloadTypeMismatch: return "PayloadTypeMismatch";
    case ErrorCode::InvalidTimerSpec: return "InvalidTimerSpec";
    case ErrorCode::NonMonotonicTimestamp: return "NonMonotonicTimestamp";
    case ErrorCode::TruncatedInput: return "TruncatedInput";
    case ErrorCode::UnknownTag: return "UnknownTag";
    case ErrorCode::InvalidUtf8: return "InvalidUtf8";
    case ErrorCode::InvalidStruct: return "InvalidStruct";
    case ErrorCode::NestingTooDeep: return "NestingTooDeep";
    case ErrorCode::PortInUse: return "PortInUse";
    case ErrorCode::HandshakeVersionMismatch: return "HandshakeVersionMismatch";
    case ErrorCode::MalformedFrame: return "MalformedFrame";
    case ErrorCode::ConnectionRefused: return "ConnectionRefused";
    case ErrorCode::SessionClosed: return "SessionClosed";
    case ErrorCode::MalformedXml: return "MalformedXml";
    case ErrorCode::MissingClassAttribute: return "MissingClassAttribute";
    case ErrorCode::InvalidProperty: return "InvalidProperty";
    case ErrorCode::StorageFull: return "StorageFull";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::PeerDisconnected: return "PeerDisconnected";
    case ErrorCode::UnknownSensorId: return "UnknownSensorId";
    case ErrorCode::WindowLargerThanSignal: return "WindowLargerThanSignal";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::Timeout: return "Timeout";
  }
  return "Unknown";
}

}  // namespace chanrt
