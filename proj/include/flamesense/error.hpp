#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace flamesense {

/// Every failure the library reports carries one of these kinds. The CLI maps
/// them onto its exit-code contract (see cli::exit_code).
enum class ErrorKind {
    DecodeError,
    UnsupportedFormat,
    GridMismatch,
    DimensionMismatch,
    EmptyReference,
    LambdaOutOfBand,
    IoError,
    VersionMismatch,
    CorruptModel,
    DegenerateModel,
    SingularCovariance,
    IllegalChannel,
    WeightMismatch,
    InsufficientData,
    TooSmall,
    OutOfRange,
    TooFewPoints,
    DampingExhausted,
    GradientVanished,
    LengthMismatch,
    Empty,
    DegenerateVariance,
    ConfigInvalid,
};

std::string_view to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message);

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& message);

}  // namespace flamesense
