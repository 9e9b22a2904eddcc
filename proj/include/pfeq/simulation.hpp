#pragma once

// Closed-loop time integration in eigencoordinates and decay-rate estimation.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "pfeq/linalg.hpp"
#include "pfeq/spectral_core.hpp"
#include "pfeq/synthesis.hpp"
#include "pfeq/types.hpp"

namespace pfeq {

enum class Nonlinearity { none, torus_burgers };

struct SimConfig {
    double dt = 1e-3;
    double t_final = 1.0;
    std::size_t record_every = 1;
    double burn_fraction = 0.1;
    Nonlinearity nonlinearity = Nonlinearity::none;
    CoefficientVector initial;
    /// Reference rate for the overshoot sup_t ||u(t)|| e^{lambda_ref t} / ||u_0||.
    std::optional<double> lambda_ref;
    bool keep_snapshots = false;
    double blowup_factor = 1e12;
};

struct TrajectoryRecord {
    std::vector<double> times;
    std::vector<double> norms_H;
    std::vector<double> norms_gamma;
    std::vector<CVector> snapshots;
    double gamma = 0.5;
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
    double overshoot = std::numeric_limits<double>::quiet_NaN();
    bool fit_ok = false;
    std::vector<std::string> warnings;
};

struct DecayFit {
    double rate = 0.0;
    double overshoot = std::numeric_limits<double>::quiet_NaN();
};

/// Least-squares slope of log ||u|| over t in [burn_fraction * t_end, t_end].
inline DecayFit fit_decay_rate(const std::vector<double>& times, const std::vector<double>& norms,
                               double burn_fraction, std::optional<double> lambda_ref = std::nullopt) {
    if (times.size() != norms.size()) throw Error(ErrorKind::DimensionMismatch, "times and norms differ in length");
    if (times.empty()) throw Error(ErrorKind::TooFewSamples, "empty trajectory");
    const double t_end = times.back();
    const double t_start = burn_fraction * t_end;
    double st = 0.0, sy = 0.0, stt = 0.0, sty = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < times.size(); ++i) {
        if (times[i] < t_start) continue;
        if (!(norms[i] > 0.0))
            throw Error(ErrorKind::ZeroNorm, "trajectory norm vanished, slope undefined", i + 1);
        const double y = std::log(norms[i]);
        st += times[i];
        sy += y;
        stt += times[i] * times[i];
        sty += times[i] * y;
        ++count;
    }
    if (count < 10) throw Error(ErrorKind::TooFewSamples, std::to_string(count) + " samples after burn-in", count);
    const double n = static_cast<double>(count);
    DecayFit fit;
    fit.rate = (n * sty - st * sy) / (n * stt - st * st);
    if (lambda_ref) {
        if (!(norms.front() > 0.0)) throw Error(ErrorKind::ZeroNorm, "initial norm is zero", 1);
        double sup = 0.0;
        for (std::size_t i = 0; i < times.size(); ++i)
            sup = std::max(sup, norms[i] * std::exp(*lambda_ref * times[i]) / norms.front());
        fit.overshoot = sup;
    }
    return fit;
}

inline DecayFit fit_decay_rate(const TrajectoryRecord& traj, double burn_fraction,
                               std::optional<double> lambda_ref = std::nullopt) {
    return fit_decay_rate(traj.times, traj.norms_H, burn_fraction, lambda_ref);
}

namespace detail {

inline CMatrix pad_feedback(const CMatrix& K, std::size_t M) {
    if (static_cast<std::size_t>(K.cols()) > M) throw Error(ErrorKind::DimensionMismatch, "feedback wider than truncation");
    CMatrix out = CMatrix::Zero(K.rows(), static_cast<Eigen::Index>(M));
    out.leftCols(K.cols()) = K;
    return out;
}

inline Complex phi1(Complex z) {
    if (std::abs(z) < 1e-5) return 1.0 + z / 2.0 + z * z / 6.0;
    return (std::exp(z) - 1.0) / z;
}

inline Complex phi2(Complex z) {
    if (std::abs(z) < 1e-2) return 0.5 + z / 6.0 + z * z / 24.0 + z * z * z / 120.0 + z * z * z * z / 720.0;
    return (std::exp(z) - 1.0 - z) / (z * z);
}

/// e^{hX}, h phi_1(hX), h phi_2(hX) for the closed-loop generator X.
struct ExponentialIntegrator {
    CMatrix S;
    CMatrix P1;
    CMatrix P2;
};

inline ExponentialIntegrator exponential_integrator(const CMatrix& X, double h, double max_condition = 1e8) {
    const auto n = X.rows();
    ExponentialIntegrator out;
    const linalg::EigenDecomposition ed = linalg::eig(X, true);
    const Eigen::PartialPivLU<CMatrix> lu(ed.vectors);
    const double cond = lu.rcond() > 0.0 ? 1.0 / lu.rcond() : std::numeric_limits<double>::infinity();
    if (cond <= max_condition) {
        const CMatrix Vinv = lu.inverse();
        CMatrix a = ed.vectors, b = ed.vectors, c = ed.vectors;
        for (Eigen::Index j = 0; j < n; ++j) {
            const Complex z = h * ed.values[j];
            a.col(j) *= std::exp(z);
            b.col(j) *= h * phi1(z);
            c.col(j) *= h * phi2(z);
        }
        out.S = a * Vinv;
        out.P1 = b * Vinv;
        out.P2 = c * Vinv;
        return out;
    }
    // exp of [[hX, hI, 0], [0, 0, I], [0, 0, 0]] carries h phi_1 and h phi_2 in its top row.
    CMatrix big = CMatrix::Zero(3 * n, 3 * n);
    big.block(0, 0, n, n) = h * X;
    big.block(0, n, n, n) = h * CMatrix::Identity(n, n);
    big.block(n, 2 * n, n, n) = CMatrix::Identity(n, n);
    const CMatrix E = big.exp();
    out.S = E.block(0, 0, n, n);
    out.P1 = E.block(0, n, n, n);
    out.P2 = E.block(0, 2 * n, n, n) / h;
    return out;
}

}  // namespace detail

/// exp(dt (A + BK)) on the truncation; the diagonal exponential when K = 0.
inline CMatrix linear_propagator(const SpectralOperator& op, const ControlOperator& B, const CMatrix& K, double dt) {
    if (!(dt > 0.0)) throw Error(ErrorKind::ConfigError, "dt must be positive");
    const auto M = static_cast<Eigen::Index>(op.truncation());
    if (K.size() == 0 || K.cwiseAbs().maxCoeff() == 0.0) {
        CMatrix S = CMatrix::Zero(M, M);
        for (Eigen::Index n = 0; n < M; ++n) S(n, n) = std::exp(dt * op.eigenvalues[static_cast<std::size_t>(n)]);
        return S;
    }
    return linalg::expm(closed_loop_matrix(op, B, detail::pad_feedback(K, op.truncation())), dt);
}

// ---------------------------------------------------------------------------
// Torus exponential basis: position i (0-based) holds e_k with
// k = i/2 for even i and k = -(i+1)/2 for odd i.

inline long torus_wavenumber(std::size_t i) {
    return (i % 2 == 0) ? static_cast<long>(i / 2) : -static_cast<long>((i + 1) / 2);
}

inline std::size_t torus_position(long k) {
    return k >= 0 ? static_cast<std::size_t>(2 * k) : static_cast<std::size_t>(-2 * k - 1);
}

/// Largest k with both e_k and e_{-k} inside a truncation of size M.
inline long torus_kmax(std::size_t M) { return M == 0 ? -1 : static_cast<long>((M - 1) / 2); }

/// max_k |u_{-k} - conj(u_k)| over paired modes.
inline double hermitian_defect(const CVector& u) {
    const long kmax = torus_kmax(static_cast<std::size_t>(u.size()));
    double worst = 0.0;
    for (long k = 0; k <= kmax; ++k)
        worst = std::max(worst, std::abs(u[static_cast<Eigen::Index>(torus_position(-k))] -
                                         std::conj(u[static_cast<Eigen::Index>(torus_position(k))])));
    return worst;
}

/// F(u) = -1/2 d_x(u^2) in the normalized exponential basis:
/// F_k = -(i k / 2) sum_{p+q=k, |p|,|q|<=k_max} u_p u_q / sqrt(2 pi).
/// Products landing beyond k_max are dropped.
inline CVector quadratic_nonlinearity(const SpectralOperator& op, const CVector& u) {
    if (op.basis != Basis::torus_exponential)
        throw Error(ErrorKind::WrongBasis, "quadratic nonlinearity needs a torus exponential basis");
    if (static_cast<std::size_t>(u.size()) != op.truncation())
        throw Error(ErrorKind::LengthMismatch, "state length differs from truncation");
    const double scale = u.size() == 0 ? 0.0 : u.cwiseAbs().maxCoeff();
    if (hermitian_defect(u) > 1e-10 * (1.0 + scale))
        throw Error(ErrorKind::SymmetryViolation, "state is not Hermitian-symmetric (u_{-k} != conj(u_k))");

    const long kmax = torus_kmax(op.truncation());
    const double norm = 1.0 / std::sqrt(2.0 * kPi);
    std::vector<Complex> mode(static_cast<std::size_t>(2 * kmax + 1));
    for (long k = -kmax; k <= kmax; ++k) mode[static_cast<std::size_t>(k + kmax)] = u[static_cast<Eigen::Index>(torus_position(k))];

    CVector F = CVector::Zero(u.size());
    for (long k = -kmax; k <= kmax; ++k) {
        if (k == 0) continue;
        Complex acc = 0.0;
        const long lo = std::max(-kmax, k - kmax);
        const long hi = std::min(kmax, k + kmax);
        for (long p = lo; p <= hi; ++p)
            acc += mode[static_cast<std::size_t>(p + kmax)] * mode[static_cast<std::size_t>(k - p + kmax)];
        F[static_cast<Eigen::Index>(torus_position(k))] = Complex(0.0, -0.5 * static_cast<double>(k)) * norm * acc;
    }
    return F;
}

/// Seeded random state with coefficient weights 1 / (1 + |lambda_n|), scaled
/// to the requested H-norm. On torus bases the state is a real field
/// (u_{-k} = conj(u_k)); the unpaired top mode of an even truncation stays 0.
inline CoefficientVector random_initial_state(const SpectralOperator& op, double norm, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const auto M = static_cast<Eigen::Index>(op.truncation());
    CVector u = CVector::Zero(M);
    if (op.basis == Basis::torus_exponential) {
        const long kmax = torus_kmax(op.truncation());
        for (long k = 0; k <= kmax; ++k) {
            const auto i = static_cast<Eigen::Index>(torus_position(k));
            const double w = 1.0 / (1.0 + std::abs(op.eigenvalues[static_cast<std::size_t>(i)]));
            const double re = gauss(rng), im = gauss(rng);
            u[i] = k == 0 ? Complex(w * re, 0.0) : w * Complex(re, im);
            if (k > 0) u[static_cast<Eigen::Index>(torus_position(-k))] = std::conj(u[i]);
        }
    } else {
        for (Eigen::Index i = 0; i < M; ++i) {
            const double w = 1.0 / (1.0 + std::abs(op.eigenvalues[static_cast<std::size_t>(i)]));
            const double re = gauss(rng), im = gauss(rng);
            u[i] = w * Complex(re, im);
        }
    }
    const double n = u.norm();
    if (n > 0.0) u *= norm / n;
    CoefficientVector out;
    out.entries = u;
    return out;
}

namespace detail {

inline void record_state(TrajectoryRecord& rec, const SpectralOperator& op, double t, const CVector& u, bool keep) {
    rec.times.push_back(t);
    rec.norms_H.push_back(u.norm());
    rec.norms_gamma.push_back(sobolev_norm(op, rec.gamma, u));
    if (keep) rec.snapshots.push_back(u);
}

inline void finish_record(TrajectoryRecord& rec, const SimConfig& cfg) {
    try {
        const DecayFit fit = fit_decay_rate(rec, cfg.burn_fraction, cfg.lambda_ref);
        rec.fitted_rate = fit.rate;
        rec.overshoot = fit.overshoot;
        rec.fit_ok = true;
    } catch (const Error& e) {
        rec.warnings.push_back(std::string("decay fit unavailable: ") + e.what());
    }
}

inline std::size_t step_count(const SimConfig& cfg) {
    if (!(cfg.dt > 0.0) || !(cfg.t_final > 0.0)) throw Error(ErrorKind::ConfigError, "dt and t_final must be positive");
    if (cfg.record_every == 0) throw Error(ErrorKind::ConfigError, "record_every must be positive");
    if (!(cfg.burn_fraction >= 0.0 && cfg.burn_fraction < 1.0))
        throw Error(ErrorKind::ConfigError, "burn_fraction must lie in [0, 1)");
    return static_cast<std::size_t>(std::llround(cfg.t_final / cfg.dt));
}

inline CVector initial_state(const SpectralOperator& op, const SimConfig& cfg) {
    if (cfg.initial.size() > op.truncation())
        throw Error(ErrorKind::LengthMismatch, "initial vector longer than truncation");
    CVector u = CVector::Zero(static_cast<Eigen::Index>(op.truncation()));
    u.head(cfg.initial.entries.size()) = cfg.initial.entries;
    return u;
}

}  // namespace detail

inline TrajectoryRecord simulate_linear(const SpectralOperator& op, const ControlOperator& B, const CMatrix& K,
                                        const SimConfig& cfg) {
    const std::size_t steps = detail::step_count(cfg);
    CVector u = detail::initial_state(op, cfg);
    const CMatrix S = linear_propagator(op, B, K, cfg.dt);

    TrajectoryRecord rec;
    rec.gamma = std::min(1.0 - B.growth_exponent, 0.5);
    const double u0 = u.norm();
    detail::record_state(rec, op, 0.0, u, cfg.keep_snapshots);
    for (std::size_t s = 1; s <= steps; ++s) {
        u = S * u;
        const double nrm = u.norm();
        if (!std::isfinite(nrm) || nrm > cfg.blowup_factor * u0)
            throw Error(ErrorKind::UnstableBlowup, "norm exceeded blow-up threshold", s);
        if (s % cfg.record_every == 0) detail::record_state(rec, op, static_cast<double>(s) * cfg.dt, u, cfg.keep_snapshots);
    }
    detail::finish_record(rec, cfg);
    return rec;
}

/// Step-size guard dt * max_k |sum_j b_k^j| * ||K||.
inline double feedback_step_guard(const ControlOperator& B, const CMatrix& K, double dt) {
    if (K.size() == 0) return 0.0;
    const auto M = B.inputs() == 0 ? 0 : B.coefficients.front().size();
    double bmax = 0.0;
    for (Eigen::Index k = 0; k < M; ++k) {
        Complex sum = 0.0;
        for (Eigen::Index j = 0; j < K.rows(); ++j) sum += B.coefficients[static_cast<std::size_t>(j)][k];
        bmax = std::max(bmax, std::abs(sum));
    }
    return dt * bmax * linalg::spectral_norm(K);
}

/// Second-order exponential integrator (ETD-RK2) for u' = (A + BK) u + F(u):
/// the linear closed loop is propagated exactly and only F is extrapolated,
/// so the scheme reproduces simulate_linear when F = 0.
inline TrajectoryRecord simulate_nonlinear(const SpectralOperator& op, const ControlOperator& B, const CMatrix& K,
                                           const SimConfig& cfg) {
    if (cfg.nonlinearity == Nonlinearity::torus_burgers && op.basis != Basis::torus_exponential)
        throw Error(ErrorKind::WrongBasis, "Burgers nonlinearity needs a torus exponential basis");
    const std::size_t steps = detail::step_count(cfg);
    CVector u = detail::initial_state(op, cfg);

    TrajectoryRecord rec;
    rec.gamma = std::min(1.0 - B.growth_exponent, 0.5);
    const double guard = feedback_step_guard(B, K, cfg.dt);
    if (guard > 0.5)
        rec.warnings.push_back("StepSizeWarning: dt * max|sum_j b_k^j| * ||K|| = " + std::to_string(guard) + " > 0.5");

    const bool has_feedback = K.size() > 0 && K.cwiseAbs().maxCoeff() > 0.0;
    detail::ExponentialIntegrator integ;
    if (has_feedback) {
        integ = detail::exponential_integrator(closed_loop_matrix(op, B, detail::pad_feedback(K, op.truncation())), cfg.dt);
        // Same propagator as simulate_linear for exact consistency.
        integ.S = linear_propagator(op, B, K, cfg.dt);
    } else {
        integ = detail::exponential_integrator(diagonal_matrix(op), cfg.dt);
        integ.S = linear_propagator(op, B, K, cfg.dt);
    }

    auto forcing = [&](const CVector& v) -> CVector {
        if (cfg.nonlinearity == Nonlinearity::none) return CVector::Zero(v.size());
        return quadratic_nonlinearity(op, v);
    };

    const double u0 = u.norm();
    detail::record_state(rec, op, 0.0, u, cfg.keep_snapshots);
    for (std::size_t s = 1; s <= steps; ++s) {
        if (cfg.nonlinearity == Nonlinearity::none) {
            u = integ.S * u;
        } else {
            const CVector Fu = forcing(u);
            const CVector a = integ.S * u + integ.P1 * Fu;
            u = a + integ.P2 * (forcing(a) - Fu);
        }
        const double nrm = u.norm();
        if (!std::isfinite(nrm) || nrm > cfg.blowup_factor * std::max(u0, std::numeric_limits<double>::min()))
            throw Error(ErrorKind::UnstableBlowup, "norm exceeded blow-up threshold", s);
        if (s % cfg.record_every == 0) detail::record_state(rec, op, static_cast<double>(s) * cfg.dt, u, cfg.keep_snapshots);
    }
    detail::finish_record(rec, cfg);
    return rec;
}

}  // namespace pfeq
