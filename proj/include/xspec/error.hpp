#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xspec {

enum class ErrorCode {
    // geometry
    TooFewPoints,
    DegenerateConfiguration,
    NonFinite,
    PointAtInfinity,
    SingularMatrix,
    EmptyInput,
    // dataset
    MalformedJson,
    MissingField,
    MalformedField,
    BrokenReference,
    DuplicateId,
    InvariantViolation,
    UnmappedLabel,
    UncoveredImage,
    UnknownImage,
    // transfer
    MissingHomography,
    MissingPairImage,
    UnresolvedSourceImage,
    DuplicatePairId,
    // evaluation
    UnknownClass,
    NoGroundTruth,
    AllAbsent,
    // service
    UnknownPair,
    StaleRevision,
    // plumbing
    Io,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::PointAtInfinity: return "PointAtInfinity";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::MalformedJson: return "MalformedJson";
        case ErrorCode::MissingField: return "MissingField";
        case ErrorCode::MalformedField: return "MalformedField";
        case ErrorCode::BrokenReference: return "BrokenReference";
        case ErrorCode::DuplicateId: return "DuplicateId";
        case ErrorCode::InvariantViolation: return "InvariantViolation";
        case ErrorCode::UnmappedLabel: return "UnmappedLabel";
        case ErrorCode::UncoveredImage: return "UncoveredImage";
        case ErrorCode::UnknownImage: return "UnknownImage";
        case ErrorCode::MissingHomography: return "MissingHomography";
        case ErrorCode::MissingPairImage: return "MissingPairImage";
        case ErrorCode::UnresolvedSourceImage: return "UnresolvedSourceImage";
        case ErrorCode::DuplicatePairId: return "DuplicatePairId";
        case ErrorCode::UnknownClass: return "UnknownClass";
        case ErrorCode::NoGroundTruth: return "NoGroundTruth";
        case ErrorCode::AllAbsent: return "AllAbsent";
        case ErrorCode::UnknownPair: return "UnknownPair";
        case ErrorCode::StaleRevision: return "StaleRevision";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

/// Every failure raised by the library. `locator` names the offending record
/// ("annotations[3]", "image id 99", a pair id, a file path) when one exists.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, std::string message, std::string locator = {})
        : std::runtime_error(format(code, message, locator)),
          code_(code),
          message_(std::move(message)),
          locator_(std::move(locator)) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& message() const noexcept { return message_; }
    const std::string& locator() const noexcept { return locator_; }

private:
    static std::string format(ErrorCode code, const std::string& message,
                              const std::string& locator) {
        std::string out(to_string(code));
        out += ": ";
        out += message;
        if (!locator.empty()) {
            out += " (at ";
            out += locator;
            out += ")";
        }
        return out;
    }

    ErrorCode code_;
    std::string message_;
    std::string locator_;
};

}  // namespace xspec
