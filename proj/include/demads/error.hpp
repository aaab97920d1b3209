#ifndef DEMADS_ERROR_HPP
#define DEMADS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace demads {

// Fine-grained failure kinds. Each maps onto one of the coarse C API /
// CLI status codes via status_of().
enum class ErrKind {
    // topology / grid files
    CycleDetected,
    DisconnectedBus,
    DuplicateLine,
    InvalidGrid,
    // solver
    NonConvergence,
    // scenario / profiles
    InvalidCadence,
    InvalidScenario,
    // numerics
    ShapeMismatch,
    NonFiniteValue,
    NonFiniteInput,
    InvalidInput,
    // datasets / features
    EmptyDay,
    TooFewSamples,
    LengthMismatch,
    UnknownLabel,
    SingleClassInput,
    SpecMismatch,
    // protocol
    CalibrationIncomplete,
    FingerprintMismatch,
    // files
    ParseError,
    IoError,
    Usage,
};

// Coarse status classes, shared with the C API (see include/demads.h).
enum class Status : int {
    Ok = 0,
    Usage = 1,
    Parse = 2,
    Convergence = 3,
    Fingerprint = 4,
    Io = 5,
    Internal = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrKind kind() const { return kind_; }

private:
    ErrKind kind_;
};

inline Status status_of(ErrKind kind) {
    switch (kind) {
    case ErrKind::Usage:
    case ErrKind::InvalidInput:
        return Status::Usage;
    case ErrKind::NonConvergence:
        return Status::Convergence;
    case ErrKind::FingerprintMismatch:
        return Status::Fingerprint;
    case ErrKind::IoError:
        return Status::Io;
    case ErrKind::NonFiniteValue:
        return Status::Internal;
    default:
        return Status::Parse;
    }
}

inline const char* errkind_name(ErrKind kind) {
    switch (kind) {
    case ErrKind::CycleDetected: return "CycleDetected";
    case ErrKind::DisconnectedBus: return "DisconnectedBus";
    case ErrKind::DuplicateLine: return "DuplicateLine";
    case ErrKind::InvalidGrid: return "InvalidGrid";
    case ErrKind::NonConvergence: return "NonConvergence";
    case ErrKind::InvalidCadence: return "InvalidCadence";
    case ErrKind::InvalidScenario: return "InvalidScenario";
    case ErrKind::ShapeMismatch: return "ShapeMismatch";
    case ErrKind::NonFiniteValue: return "NonFiniteValue";
    case ErrKind::NonFiniteInput: return "NonFiniteInput";
    case ErrKind::InvalidInput: return "InvalidInput";
    case ErrKind::EmptyDay: return "EmptyDay";
    case ErrKind::TooFewSamples: return "TooFewSamples";
    case ErrKind::LengthMismatch: return "LengthMismatch";
    case ErrKind::UnknownLabel: return "UnknownLabel";
    case ErrKind::SingleClassInput: return "SingleClassInput";
    case ErrKind::SpecMismatch: return "SpecMismatch";
    case ErrKind::CalibrationIncomplete: return "CalibrationIncomplete";
    case ErrKind::FingerprintMismatch: return "FingerprintMismatch";
    case ErrKind::ParseError: return "ParseError";
    case ErrKind::IoError: return "IoError";
    case ErrKind::Usage: return "Usage";
    }
    return "Unknown";
}

} // namespace demads

#endif
