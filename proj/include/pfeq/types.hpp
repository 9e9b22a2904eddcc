#pragma once

#include <complex>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace pfeq {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;

enum class ErrorKind {
    EmptySpectrum,
    NonMonotoneRealPart,
    SectorViolation,
    DeltaResonance,
    LengthMismatch,
    TruncationExhausted,
    NoAdmissibleMatching,
    ResonantMu,
    SingularCauchySystem,
    ZeroControlCoefficient,
    DegenerateDenominator,
    MuBelowFloor,
    NoValidMuFound,
    InconsistentMu,
    PartitionMismatch,
    DimensionMismatch,
    UnstableBlowup,
    SymmetryViolation,
    WrongBasis,
    TooFewSamples,
    ZeroNorm,
    UnknownModel,
    MissingParam,
    ConfigError,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::EmptySpectrum: return "EmptySpectrum";
        case ErrorKind::NonMonotoneRealPart: return "NonMonotoneRealPart";
        case ErrorKind::SectorViolation: return "SectorViolation";
        case ErrorKind::DeltaResonance: return "DeltaResonance";
        case ErrorKind::LengthMismatch: return "LengthMismatch";
        case ErrorKind::TruncationExhausted: return "TruncationExhausted";
        case ErrorKind::NoAdmissibleMatching: return "NoAdmissibleMatching";
        case ErrorKind::ResonantMu: return "ResonantMu";
        case ErrorKind::SingularCauchySystem: return "SingularCauchySystem";
        case ErrorKind::ZeroControlCoefficient: return "ZeroControlCoefficient";
        case ErrorKind::DegenerateDenominator: return "DegenerateDenominator";
        case ErrorKind::MuBelowFloor: return "MuBelowFloor";
        case ErrorKind::NoValidMuFound: return "NoValidMuFound";
        case ErrorKind::InconsistentMu: return "InconsistentMu";
        case ErrorKind::PartitionMismatch: return "PartitionMismatch";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::UnstableBlowup: return "UnstableBlowup";
        case ErrorKind::SymmetryViolation: return "SymmetryViolation";
        case ErrorKind::WrongBasis: return "WrongBasis";
        case ErrorKind::TooFewSamples: return "TooFewSamples";
        case ErrorKind::ZeroNorm: return "ZeroNorm";
        case ErrorKind::UnknownModel: return "UnknownModel";
        case ErrorKind::MissingParam: return "MissingParam";
        case ErrorKind::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

/// Error raised by every pfeq operation. `index` is the 1-based offending
/// position when the failure is tied to one (eigenvalue, cluster, attempt),
/// 0 otherwise.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message, std::size_t index = 0)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message),
          kind_(kind),
          index_(index) {}

    ErrorKind kind() const noexcept { return kind_; }
    std::size_t index() const noexcept { return index_; }

private:
    ErrorKind kind_;
    std::size_t index_;
};

}  // namespace pfeq
