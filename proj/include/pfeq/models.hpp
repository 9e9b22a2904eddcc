#pragma once

// Builtin catalog of diagonal parabolic models with their control operators.

#include <cmath>
#include <map>
#include <string>
#include <utility>

#include "pfeq/simulation.hpp"
#include "pfeq/spectral_core.hpp"
#include "pfeq/types.hpp"

namespace pfeq {

enum class ModelName { ks_torus, ks_interval_coronlu, heat_torus, heat_interval_neumann, custom };

inline const char* to_string(ModelName n) {
    switch (n) {
        case ModelName::ks_torus: return "ks-torus";
        case ModelName::ks_interval_coronlu: return "ks-interval-coronlu";
        case ModelName::heat_torus: return "heat-torus";
        case ModelName::heat_interval_neumann: return "heat-interval-neumann";
        case ModelName::custom: return "custom";
    }
    return "custom";
}

inline ModelName model_from_string(const std::string& s) {
    for (ModelName n : {ModelName::ks_torus, ModelName::ks_interval_coronlu, ModelName::heat_torus,
                        ModelName::heat_interval_neumann, ModelName::custom})
        if (s == to_string(n)) return n;
    throw Error(ErrorKind::UnknownModel, "unknown model '" + s + "'");
}

struct ModelDescriptor {
    ModelName name = ModelName::ks_torus;
    /// ks-interval-coronlu: "nu"; heat-torus: "p"; heat-interval-neumann: "fprime0".
    std::map<std::string, double> params;
    std::size_t truncation = 64;
};

struct Model {
    SpectralOperator op;
    ControlOperator B;
};

namespace detail {

inline double require_param(const ModelDescriptor& d, const std::string& key) {
    auto it = d.params.find(key);
    if (it == d.params.end())
        throw Error(ErrorKind::MissingParam, std::string(to_string(d.name)) + " needs parameter '" + key + "'");
    return it->second;
}

inline SpectralOperator finish_operator(SpectralOperator op) {
    op.delta = default_delta(op);
    return op;
}

}  // namespace detail

/// KS on the torus, -d^4 - d^2 in the reindexed exponential basis.
/// B = (e~1, e~2 + e~4, e~3 + e~5).
inline Model ks_torus_model(std::size_t M) {
    if (M < 5) throw Error(ErrorKind::ConfigError, "ks-torus needs truncation >= 5");
    Model m;
    m.op.label = "ks-torus";
    m.op.basis = Basis::torus_exponential;
    m.op.sector_constant = 1.0;
    for (std::size_t i = 0; i < M; ++i) {
        const double k = static_cast<double>((i + 1) / 2);
        m.op.eigenvalues.emplace_back(-k * k * k * k + k * k, 0.0);
    }
    m.op = detail::finish_operator(std::move(m.op));
    const auto Mi = static_cast<Eigen::Index>(M);
    CVector b1 = CVector::Zero(Mi), b2 = CVector::Zero(Mi), b3 = CVector::Zero(Mi);
    b1[0] = 1.0;
    b2[1] = 1.0;
    b2[3] = 1.0;
    b3[2] = 1.0;
    b3[4] = 1.0;
    m.B.coefficients = {b1, b2, b3};
    m.B.growth_exponent = 0.0;
    return m;
}

/// KS on (0, 1) with Dirichlet-type boundary control in the sine basis:
/// lambda_n = -pi^4 n^4 + nu pi^2 n^2, <B, e_n> = -pi n, B in D_{-1}(A).
inline Model ks_coronlu_model(std::size_t M, double nu) {
    if (M == 0) throw Error(ErrorKind::ConfigError, "truncation must be positive");
    Model m;
    m.op.label = "ks-interval-coronlu";
    m.op.basis = Basis::interval_sine;
    m.op.sector_constant = 1.0;
    const auto Mi = static_cast<Eigen::Index>(M);
    CVector b(Mi);
    for (std::size_t i = 0; i < M; ++i) {
        const double n = static_cast<double>(i + 1);
        m.op.eigenvalues.emplace_back(-std::pow(kPi * n, 4) + nu * std::pow(kPi * n, 2), 0.0);
        b[static_cast<Eigen::Index>(i)] = -kPi * n;
    }
    m.op = detail::finish_operator(std::move(m.op));
    m.B.coefficients = {b};
    m.B.growth_exponent = 1.0;
    return m;
}

/// Heat equation on the torus with a Dirac control at p: b_n = conj(e_n(p)).
inline Model heat_torus_model(std::size_t M, double p) {
    if (M == 0) throw Error(ErrorKind::ConfigError, "truncation must be positive");
    Model m;
    m.op.label = "heat-torus";
    m.op.basis = Basis::torus_exponential;
    m.op.sector_constant = 1.0;
    const auto Mi = static_cast<Eigen::Index>(M);
    CVector b(Mi);
    const double norm = 1.0 / std::sqrt(2.0 * kPi);
    for (std::size_t i = 0; i < M; ++i) {
        const auto k = static_cast<double>(torus_wavenumber(i));
        m.op.eigenvalues.emplace_back(-k * k, 0.0);
        b[static_cast<Eigen::Index>(i)] = norm * std::exp(Complex(0.0, -k * p));
    }
    m.op = detail::finish_operator(std::move(m.op));
    m.B.coefficients = {b};
    m.B.growth_exponent = 0.3;
    return m;
}

/// Linearized quasilinear heat on (0, 1), Neumann, cosine basis:
/// lambda_n = -pi^2 n^2 + f'(0) for n >= 0, control profile b = e^x.
inline Model heat_neumann_model(std::size_t M, double fprime0) {
    if (M == 0) throw Error(ErrorKind::ConfigError, "truncation must be positive");
    Model m;
    m.op.label = "heat-interval-neumann";
    m.op.basis = Basis::interval_cosine;
    m.op.sector_constant = 1.0;
    const auto Mi = static_cast<Eigen::Index>(M);
    CVector b(Mi);
    const double e = std::exp(1.0);
    for (std::size_t i = 0; i < M; ++i) {
        const double n = static_cast<double>(i);
        m.op.eigenvalues.emplace_back(-kPi * kPi * n * n + fprime0, 0.0);
        const double sign = (i % 2 == 0) ? 1.0 : -1.0;
        b[static_cast<Eigen::Index>(i)] =
            i == 0 ? e - 1.0 : std::sqrt(2.0) * (e * sign - 1.0) / (1.0 + kPi * kPi * n * n);
    }
    m.op = detail::finish_operator(std::move(m.op));
    m.B.coefficients = {b};
    m.B.growth_exponent = 0.0;
    return m;
}

inline Model builtin_model(const ModelDescriptor& d) {
    switch (d.name) {
        case ModelName::ks_torus: return ks_torus_model(d.truncation);
        case ModelName::ks_interval_coronlu: return ks_coronlu_model(d.truncation, detail::require_param(d, "nu"));
        case ModelName::heat_torus: return heat_torus_model(d.truncation, detail::require_param(d, "p"));
        case ModelName::heat_interval_neumann:
            return heat_neumann_model(d.truncation, detail::require_param(d, "fprime0"));
        case ModelName::custom:
            throw Error(ErrorKind::MissingParam, "custom models are loaded from a model file");
    }
    throw Error(ErrorKind::UnknownModel, "unknown model");
}

}  // namespace pfeq
