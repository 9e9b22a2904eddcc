#pragma once

// Truncated diagonal parabolic operators, control operators and the
// generalized Sobolev scale D_s(A), all expressed in eigencoordinates.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "pfeq/types.hpp"

namespace pfeq {

/// Which concrete eigenbasis the coefficients refer to. Only the torus
/// exponential basis supports the quadratic (Burgers) nonlinearity.
enum class Basis { generic, torus_exponential, interval_sine, interval_cosine };

inline const char* to_string(Basis b) {
    switch (b) {
        case Basis::generic: return "generic";
        case Basis::torus_exponential: return "torus_exponential";
        case Basis::interval_sine: return "interval_sine";
        case Basis::interval_cosine: return "interval_cosine";
    }
    return "generic";
}

inline Basis basis_from_string(const std::string& name) {
    if (name == "torus_exponential") return Basis::torus_exponential;
    if (name == "interval_sine") return Basis::interval_sine;
    if (name == "interval_cosine") return Basis::interval_cosine;
    if (name == "generic" || name.empty()) return Basis::generic;
    throw Error(ErrorKind::ConfigError, "unknown basis '" + name + "'");
}

/// Eigenvalues lambda_1..lambda_M of A (non-increasing real parts), with the
/// sector constant and the shift delta making -A + delta invertible.
struct SpectralOperator {
    std::vector<Complex> eigenvalues;
    double sector_constant = 0.0;
    double delta = 0.0;
    std::string label;
    Basis basis = Basis::generic;

    std::size_t truncation() const { return eigenvalues.size(); }
    double m_A() const { return eigenvalues.empty() ? 0.0 : eigenvalues.front().real(); }
    double c_A() const { return std::max(0.0, m_A()); }
};

/// Columns b^j of B in eigencoordinates, b_n^j = <B_j, e_n>.
struct ControlOperator {
    std::vector<CVector> coefficients;
    /// B_j in D_{-s}(A), s in [0, 1].
    double growth_exponent = 0.0;

    std::size_t inputs() const { return coefficients.size(); }
};

/// A state in eigencoordinates, u = sum_n x_n e_n.
struct CoefficientVector {
    CVector entries;

    CoefficientVector() = default;
    explicit CoefficientVector(CVector v) : entries(std::move(v)) {}
    std::size_t size() const { return static_cast<std::size_t>(entries.size()); }
};

struct Violation {
    ErrorKind kind;
    std::size_t index;  // 1-based
};

struct OperatorReport {
    bool nonempty = true;
    bool monotone = true;
    bool sector = true;
    bool delta_ok = true;
    std::optional<Violation> first_violation;
    double m_A = 0.0;
    double c_A = 0.0;
    /// min_n |Re lambda_n| / |Im lambda_n| over non-real eigenvalues; +inf
    /// for a real spectrum.
    double tightest_sector = std::numeric_limits<double>::infinity();

    bool ok() const { return !first_violation.has_value(); }

    /// Throws the first violated invariant as an Error.
    void require_ok() const {
        if (!first_violation) return;
        const auto& v = *first_violation;
        throw Error(v.kind, "operator invariant violated at index " + std::to_string(v.index), v.index);
    }
};

inline OperatorReport validate_operator(const SpectralOperator& op) {
    if (op.eigenvalues.empty()) throw Error(ErrorKind::EmptySpectrum, "eigenvalue list is empty");

    OperatorReport report;
    const auto& eig = op.eigenvalues;
    auto record = [&](ErrorKind kind, std::size_t index) {
        if (!report.first_violation) report.first_violation = Violation{kind, index};
    };

    for (std::size_t n = 1; n < eig.size(); ++n) {
        if (eig[n].real() > eig[n - 1].real()) {
            report.monotone = false;
            record(ErrorKind::NonMonotoneRealPart, n + 1);
            break;
        }
    }

    for (std::size_t n = 0; n < eig.size(); ++n) {
        const double re = std::abs(eig[n].real());
        const double im = std::abs(eig[n].imag());
        if (im == 0.0) continue;
        report.tightest_sector = std::min(report.tightest_sector, re / im);
        if (report.sector && re < op.sector_constant * im * (1.0 - 1e-12)) {
            report.sector = false;
            record(ErrorKind::SectorViolation, n + 1);
        }
    }

    for (std::size_t n = 0; n < eig.size(); ++n) {
        if (std::abs(Complex(op.delta, 0.0) - eig[n]) <= 1e-14 * (1.0 + std::abs(eig[n]))) {
            report.delta_ok = false;
            record(ErrorKind::DeltaResonance, n + 1);
            break;
        }
    }

    report.m_A = op.m_A();
    report.c_A = op.c_A();
    return report;
}

/// Checks shape consistency of B against the truncation and the growth
/// bound sup_n |b_n| / (1 + |lambda_n|^2)^{s/2} < inf (finite at truncation).
inline void validate_control(const SpectralOperator& op, const ControlOperator& B) {
    if (B.inputs() == 0) throw Error(ErrorKind::DimensionMismatch, "control operator has no inputs");
    if (B.growth_exponent < 0.0 || B.growth_exponent > 1.0)
        throw Error(ErrorKind::ConfigError, "growth exponent must lie in [0, 1]");
    for (std::size_t j = 0; j < B.inputs(); ++j) {
        if (static_cast<std::size_t>(B.coefficients[j].size()) != op.truncation())
            throw Error(ErrorKind::LengthMismatch,
                        "control " + std::to_string(j + 1) + " has " + std::to_string(B.coefficients[j].size()) +
                            " coefficients, truncation is " + std::to_string(op.truncation()),
                        j + 1);
        for (Eigen::Index n = 0; n < B.coefficients[j].size(); ++n)
            if (!std::isfinite(std::abs(B.coefficients[j][n])))
                throw Error(ErrorKind::ConfigError, "non-finite control coefficient", j + 1);
    }
}

/// max_n |b_n^j| / (1 + |lambda_n|^2)^{s/2} for input j.
inline double control_growth_bound(const SpectralOperator& op, const ControlOperator& B, std::size_t j) {
    double bound = 0.0;
    for (std::size_t n = 0; n < op.truncation(); ++n) {
        const double w = std::pow(1.0 + std::norm(op.eigenvalues[n]), 0.5 * B.growth_exponent);
        bound = std::max(bound, std::abs(B.coefficients[j][static_cast<Eigen::Index>(n)]) / w);
    }
    return bound;
}

/// Weight (1 + |lambda|^2)^s of the D_s(A) norm.
inline double sobolev_weight(Complex lambda, double s) { return std::pow(1.0 + std::norm(lambda), s); }

/// ||x||_{D_s(A)} = sqrt(sum_n (1 + |lambda_n|^2)^s |x_n|^2).
inline double sobolev_norm(const SpectralOperator& op, double s, const CVector& x) {
    if (static_cast<std::size_t>(x.size()) > op.truncation())
        throw Error(ErrorKind::LengthMismatch, "coefficient vector longer than truncation");
    if (s == 0.0) return x.norm();
    double sum = 0.0;
    for (Eigen::Index n = 0; n < x.size(); ++n)
        sum += sobolev_weight(op.eigenvalues[static_cast<std::size_t>(n)], s) * std::norm(x[n]);
    return std::sqrt(sum);
}

inline double sobolev_norm(const SpectralOperator& op, double s, const CoefficientVector& x) {
    return sobolev_norm(op, s, x.entries);
}

inline double default_delta(const SpectralOperator& op) {
    const bool nonnegative_real_part =
        std::any_of(op.eigenvalues.begin(), op.eigenvalues.end(), [](Complex l) { return l.real() >= 0.0; });
    if (nonnegative_real_part) return op.c_A() + 1.0;
    const bool has_zero =
        std::any_of(op.eigenvalues.begin(), op.eigenvalues.end(), [](Complex l) { return l == Complex(0.0); });
    return has_zero ? 1.0 : 0.0;
}

/// diag(lambda_1..lambda_M).
inline CMatrix diagonal_matrix(const SpectralOperator& op) {
    const auto M = static_cast<Eigen::Index>(op.truncation());
    CMatrix A = CMatrix::Zero(M, M);
    for (Eigen::Index n = 0; n < M; ++n) A(n, n) = op.eigenvalues[static_cast<std::size_t>(n)];
    return A;
}

/// B as an M x m matrix whose columns are the inputs.
inline CMatrix control_matrix(const ControlOperator& B) {
    const auto m = static_cast<Eigen::Index>(B.inputs());
    const Eigen::Index M = m == 0 ? 0 : B.coefficients.front().size();
    CMatrix out(M, m);
    for (Eigen::Index j = 0; j < m; ++j) out.col(j) = B.coefficients[static_cast<std::size_t>(j)];
    return out;
}

}  // namespace pfeq
