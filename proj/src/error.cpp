#include "flamesense/error.hpp"

namespace flamesense {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DecodeError: return "DecodeError";
        case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorKind::GridMismatch: return "GridMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::EmptyReference: return "EmptyReference";
        case ErrorKind::LambdaOutOfBand: return "LambdaOutOfBand";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::VersionMismatch: return "VersionMismatch";
        case ErrorKind::CorruptModel: return "CorruptModel";
        case ErrorKind::DegenerateModel: return "DegenerateModel";
        case ErrorKind::SingularCovariance: return "SingularCovariance";
        case ErrorKind::IllegalChannel: return "IllegalChannel";
        case ErrorKind::WeightMismatch: return "WeightMismatch";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::TooSmall: return "TooSmall";
        case ErrorKind::OutOfRange: return "OutOfRange";
        case ErrorKind::TooFewPoints: return "TooFewPoints";
        case ErrorKind::DampingExhausted: return "DampingExhausted";
        case ErrorKind::GradientVanished: return "GradientVanished";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::Empty: return "Empty";
        case ErrorKind::DegenerateVariance: return "DegenerateVariance";
        case ErrorKind::ConfigInvalid: return "ConfigInvalid";
    }
    return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

void fail(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace flamesense
