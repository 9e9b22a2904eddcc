#pragma once

// Parabolic F-equivalence synthesis: per-channel finite-dimensional solve,
// tail operator (tau, C), mu validation/selection and global assembly.
//
// Coefficient convention: b_n = <B, e_n> and K_n = K e_n in the raw
// eigenbasis. The formulas are usually written against the D(A)'-normalized
// basis f_k = sqrt(1 + |lambda_k|^2) e_k; the normalization factors of b and K
// appear once in the numerator and once in the denominator of every product
// b_n K_n used below, so raw coefficients give the same tau and c_k.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "pfeq/analysis.hpp"
#include "pfeq/spectral_core.hpp"
#include "pfeq/types.hpp"

namespace pfeq {

struct SynthesisOptions {
    Tolerances tol;
    /// Resonance threshold eps_res = eps_res_rel * (1 + |mu|).
    double eps_res_rel = 1e-8;
    /// Minimal admissible |c_k|.
    double eps_c = 1e-6;
    double max_cauchy_condition = 1e14;

    double eps_res(double mu) const { return eps_res_rel * (1.0 + std::abs(mu)); }
};

/// Finite-dimensional F-equivalence of one channel: T(A_L + b K) = (A_L - mu) T, T b = b.
struct ChannelFeq {
    std::size_t channel = 0;
    double mu = 0.0;
    std::vector<Complex> low_eigs;
    std::vector<Complex> low_b;
    CMatrix T_tilde;
    CVector K_tilde;
    double cond_G = 1.0;
};

/// Solves the Cauchy system sum_j b_j K_j / (lambda_i - lambda_j - mu) = 1,
/// then recovers T_ij = K_j b_i / (lambda_i - lambda_j - mu).
inline ChannelFeq solve_channel_feq(const std::vector<Complex>& low_eigs, const std::vector<Complex>& low_b, double mu,
                                    const SynthesisOptions& opts = {}, std::size_t channel = 0) {
    if (low_eigs.size() != low_b.size())
        throw Error(ErrorKind::DimensionMismatch, "eigenvalue and coefficient counts differ");
    const auto n = static_cast<Eigen::Index>(low_eigs.size());
    for (Eigen::Index i = 0; i < n; ++i)
        if (low_b[static_cast<std::size_t>(i)] == Complex(0.0))
            throw Error(ErrorKind::ZeroControlCoefficient, "control coefficient vanishes on a low mode",
                        static_cast<std::size_t>(i) + 1);

    const double eps_res = opts.eps_res(mu);
    CMatrix G(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Complex gap = low_eigs[static_cast<std::size_t>(i)] - low_eigs[static_cast<std::size_t>(j)] - mu;
            if (std::abs(gap) < eps_res)
                throw Error(ErrorKind::ResonantMu,
                            "mu = " + std::to_string(mu) + " resonates with lambda_i - lambda_j", static_cast<std::size_t>(i) + 1);
            G(i, j) = 1.0 / gap;
        }
    }

    ChannelFeq feq;
    feq.channel = channel;
    feq.mu = mu;
    feq.low_eigs = low_eigs;
    feq.low_b = low_b;
    if (n == 0) {
        feq.T_tilde = CMatrix(0, 0);
        feq.K_tilde = CVector(0);
        return feq;
    }

    const Eigen::JacobiSVD<CMatrix> svd(G);
    const RVector sv = svd.singularValues();
    feq.cond_G = sv[sv.size() - 1] > 0.0 ? sv[0] / sv[sv.size() - 1] : std::numeric_limits<double>::infinity();
    if (!(feq.cond_G <= opts.max_cauchy_condition))
        throw Error(ErrorKind::SingularCauchySystem, "cond(G) = " + std::to_string(feq.cond_G));

    const CVector y = G.partialPivLu().solve(CVector::Ones(n));
    feq.K_tilde.resize(n);
    for (Eigen::Index j = 0; j < n; ++j) feq.K_tilde[j] = y[j] / low_b[static_cast<std::size_t>(j)];

    feq.T_tilde.resize(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            feq.T_tilde(i, j) = feq.K_tilde[j] * low_b[static_cast<std::size_t>(i)] * G(i, j);
    return feq;
}

struct TailViolation {
    std::size_t index;  // global, 0-based
    double magnitude;
};

/// Low-to-high block tau and diagonal multiplier C of one channel.
struct TailOperator {
    std::size_t channel = 0;
    double mu = 0.0;
    std::vector<Complex> low_eigs;
    std::vector<std::size_t> tail_indices;  // global, 0-based
    CMatrix tau;                            // rows: tail indices, columns: channel low modes
    CVector c;
    bool valid = true;
    std::vector<TailViolation> violations;
    /// sum_n |b_n K_n| over the channel's low modes.
    double envelope_mass = 0.0;
    /// |c_k - 1| <= envelope_mass / dist(lambda_k, low spectrum) for every tail k.
    bool envelope_ok = true;
    /// max_k |tau_k . b_L + c_k b_k - b_k|, the row form of T b = b.
    double row_identity_defect = 0.0;

    double c_min() const { return c.size() == 0 ? 1.0 : c.cwiseAbs().minCoeff(); }
};

inline TailOperator build_tail(const std::vector<std::size_t>& channel_indices, std::size_t low_count,
                               const ChannelFeq& low_feq, const SpectralOperator& op, const CVector& b,
                               const SynthesisOptions& opts = {}) {
    if (low_count != static_cast<std::size_t>(low_feq.K_tilde.size()))
        throw Error(ErrorKind::DimensionMismatch, "channel low part does not match the finite-dimensional solve");
    if (static_cast<std::size_t>(b.size()) != op.truncation())
        throw Error(ErrorKind::LengthMismatch, "control length differs from truncation");

    TailOperator tail;
    tail.channel = low_feq.channel;
    tail.mu = low_feq.mu;
    tail.tail_indices.assign(channel_indices.begin() + static_cast<std::ptrdiff_t>(low_count), channel_indices.end());
    const auto H = static_cast<Eigen::Index>(tail.tail_indices.size());
    const auto L = static_cast<Eigen::Index>(low_count);
    tail.tau = CMatrix::Zero(H, L);
    tail.c = CVector::Ones(H);

    std::vector<Complex> low_lambda(low_count), low_bk(low_count);
    for (std::size_t i = 0; i < low_count; ++i) {
        low_lambda[i] = op.eigenvalues[channel_indices[i]];
        low_bk[i] = b[static_cast<Eigen::Index>(channel_indices[i])];
        tail.low_eigs.push_back(low_lambda[i]);
        tail.envelope_mass += std::abs(low_bk[i] * low_feq.K_tilde[static_cast<Eigen::Index>(i)]);
    }

    const double eps_res = opts.eps_res(low_feq.mu);
    for (Eigen::Index r = 0; r < H; ++r) {
        const std::size_t k = tail.tail_indices[static_cast<std::size_t>(r)];
        const Complex lambda_k = op.eigenvalues[k];
        const Complex b_k = b[static_cast<Eigen::Index>(k)];
        Complex sum = 0.0;
        double dist = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < L; ++i) {
            const Complex gap = lambda_k - low_lambda[static_cast<std::size_t>(i)];
            if (std::abs(gap) < eps_res)
                throw Error(ErrorKind::DegenerateDenominator,
                            "tail eigenvalue coincides with a low eigenvalue (internal consistency failure)", k + 1);
            dist = std::min(dist, std::abs(gap));
            tail.tau(r, i) = b_k * low_feq.K_tilde[i] / gap;
            sum += low_bk[static_cast<std::size_t>(i)] * low_feq.K_tilde[i] / gap;
        }
        if (b_k != Complex(0.0)) tail.c[r] = 1.0 - sum;

        if (L > 0 && std::abs(tail.c[r] - 1.0) > tail.envelope_mass / dist * (1.0 + 1e-12) + 1e-15)
            tail.envelope_ok = false;
        if (std::abs(tail.c[r]) < opts.eps_c) {
            tail.valid = false;
            tail.violations.push_back({k, std::abs(tail.c[r])});
        }

        Complex row = tail.c[r] * b_k;
        for (Eigen::Index i = 0; i < L; ++i) row += tail.tau(r, i) * low_bk[static_cast<std::size_t>(i)];
        tail.row_identity_defect = std::max(tail.row_identity_defect, std::abs(row - b_k) / std::max(1.0, std::abs(b_k)));
    }
    return tail;
}

struct MuIssue {
    std::string kind;  // "resonance", "tail_multiplier", "envelope"
    std::size_t channel = 0;
    std::size_t index = 0;  // 0-based eigen/tail index where meaningful
    double value = 0.0;
};

struct MuValidity {
    double mu = 0.0;
    bool valid = true;
    double min_resonance_gap = std::numeric_limits<double>::infinity();
    double c_min = 1.0;
    /// Lower bound on |c_k| beyond the truncation from the c_k -> 1 envelope.
    double envelope_floor = 1.0;
    std::vector<MuIssue> issues;
};

inline MuValidity validate_mu(const std::vector<TailOperator>& tails, const SpectralOperator& op,
                              const FrequencySplit& split, double mu, const SynthesisOptions& opts = {}) {
    const double floor = split.lambda + split.c_A;
    if (mu < floor * (1.0 - 1e-14))
        throw Error(ErrorKind::MuBelowFloor,
                    "mu = " + std::to_string(mu) + " is below lambda + c_A = " + std::to_string(floor));
    MuValidity v;
    v.mu = mu;
    const double eps_res = opts.eps_res(mu);
    const auto& eig = op.eigenvalues;
    for (std::size_t l = 0; l < eig.size(); ++l) {
        for (std::size_t h = l; h < eig.size(); ++h) {
            const double gap = std::abs(Complex(mu, 0.0) - (eig[l] - eig[h]));
            if (gap < v.min_resonance_gap) v.min_resonance_gap = gap;
            if (gap < eps_res) {
                v.valid = false;
                v.issues.push_back({"resonance", 0, l, gap});
            }
        }
    }

    const double re_last = eig.empty() ? 0.0 : eig.back().real();
    for (const auto& tail : tails) {
        v.c_min = std::min(v.c_min, tail.c_min());
        for (const auto& bad : tail.violations) {
            v.valid = false;
            v.issues.push_back({"tail_multiplier", tail.channel, bad.index, bad.magnitude});
        }
        if (tail.envelope_mass == 0.0) continue;
        // Beyond truncation Re(lambda_k) <= Re(lambda_M), so |lambda_k - lambda_n|
        // >= d_n = Re(lambda_n) - Re(lambda_M). Two lower bounds on |c_k| follow:
        // 1 - mass / min_n d_n from the sum form, and prod_n (1 - mu / d_n) from
        // c_k = prod_n (lambda_k - lambda_n + mu) / (lambda_k - lambda_n).
        double lowest = std::numeric_limits<double>::infinity();
        double product = 1.0;
        for (const Complex& l : tail.low_eigs) {
            const double d = l.real() - re_last;
            lowest = std::min(lowest, d);
            product = d > tail.mu ? product * (1.0 - tail.mu / d) : -std::numeric_limits<double>::infinity();
        }
        const double sum_bound = lowest > 0.0 ? 1.0 - tail.envelope_mass / lowest : -std::numeric_limits<double>::infinity();
        const double floor_c = std::max(sum_bound, product);
        v.envelope_floor = std::min(v.envelope_floor, floor_c);
        if (!(floor_c >= opts.eps_c)) {
            v.valid = false;
            v.issues.push_back({"envelope", tail.channel, op.truncation(), floor_c});
        }
    }
    return v;
}

/// Everything computed for one candidate mu.
struct ChannelSolution {
    std::vector<ChannelFeq> feqs;
    std::vector<TailOperator> tails;
    MuValidity validity;
};

inline ChannelSolution solve_channels(const SpectralOperator& op, const ControlOperator& B, const FrequencySplit& split,
                                      const ChannelPartition& partition, double mu, const SynthesisOptions& opts = {}) {
    ChannelSolution sol;
    for (std::size_t j = 0; j < partition.size(); ++j) {
        const auto low = partition.low_part(j);
        std::vector<Complex> eigs, bs;
        for (std::size_t n : low) {
            eigs.push_back(op.eigenvalues[n]);
            bs.push_back(B.coefficients[j][static_cast<Eigen::Index>(n)]);
        }
        sol.feqs.push_back(solve_channel_feq(eigs, bs, mu, opts, j));
        sol.tails.push_back(build_tail(partition.channels[j], partition.low_counts[j], sol.feqs.back(), op,
                                       B.coefficients[j], opts));
    }
    sol.validity = validate_mu(sol.tails, op, split, mu, opts);
    return sol;
}

struct MuAttempt {
    double mu = 0.0;
    bool valid = false;
    std::string reason;
};

struct MuSelection {
    double mu = 0.0;
    std::vector<MuAttempt> attempts;
    ChannelSolution solution;
};

/// Tries mu0, then mu0 + U(0,1) * (1 + mu0) from a seeded generator, up to
/// `attempts` candidates in total.
inline MuSelection select_mu(const SpectralOperator& op, const ControlOperator& B, const FrequencySplit& split,
                             const ChannelPartition& partition, double mu0, std::size_t attempts, std::uint64_t seed,
                             const SynthesisOptions& opts = {}) {
    const double floor = split.lambda + split.c_A;
    if (mu0 < floor * (1.0 - 1e-14))
        throw Error(ErrorKind::MuBelowFloor,
                    "mu0 = " + std::to_string(mu0) + " is below lambda + c_A = " + std::to_string(floor));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> jitter(0.0, 1.0);

    MuSelection sel;
    for (std::size_t a = 0; a < attempts; ++a) {
        double mu = mu0;
        if (a > 0) {
            double u = 0.0;
            while (u == 0.0) u = jitter(rng);
            mu = mu0 + u * (1.0 + mu0);
        }
        MuAttempt attempt{mu, false, {}};
        try {
            ChannelSolution sol = solve_channels(op, B, split, partition, mu, opts);
            attempt.valid = sol.validity.valid;
            if (!attempt.valid) attempt.reason = sol.validity.issues.front().kind;
            if (attempt.valid) {
                sel.attempts.push_back(attempt);
                sel.mu = mu;
                sel.solution = std::move(sol);
                return sel;
            }
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::ResonantMu && e.kind() != ErrorKind::SingularCauchySystem) throw;
            attempt.reason = to_string(e.kind());
        }
        sel.attempts.push_back(attempt);
    }
    throw Error(ErrorKind::NoValidMuFound, "no valid mu after " + std::to_string(attempts) + " attempts", attempts);
}

/// Global F-equivalence pair at truncation M.
struct SynthesisResult {
    double mu = 0.0;
    std::size_t truncation = 0;
    std::size_t N_lambda = 0;
    std::vector<ChannelFeq> channels;
    std::vector<TailOperator> tails;
    /// m(lambda) x N(lambda); columns are the low eigencoordinates.
    CMatrix K;
    CMatrix T;
    CMatrix T_inv;
    /// Target spectrum: lambda_n - mu on low modes, lambda_n on the tail.
    std::vector<Complex> D;

    /// K padded by zero columns to act on full M-dimensional coefficient vectors.
    CMatrix K_full() const {
        CMatrix out = CMatrix::Zero(K.rows(), static_cast<Eigen::Index>(truncation));
        out.leftCols(K.cols()) = K;
        return out;
    }
};

inline SynthesisResult assemble(const ChannelPartition& partition, const std::vector<ChannelFeq>& feqs,
                                const std::vector<TailOperator>& tails, const SpectralOperator& op,
                                const FrequencySplit& split) {
    if (feqs.size() != partition.size() || tails.size() != partition.size())
        throw Error(ErrorKind::PartitionMismatch, "channel count differs from partition");
    const auto M = static_cast<Eigen::Index>(op.truncation());
    const auto N = static_cast<Eigen::Index>(split.N_lambda);
    SynthesisResult result;
    result.truncation = op.truncation();
    result.N_lambda = split.N_lambda;
    result.mu = feqs.empty() ? split.lambda + split.c_A : feqs.front().mu;
    for (const auto& f : feqs)
        if (f.mu != result.mu) throw Error(ErrorKind::InconsistentMu, "channels synthesized under different mu");

    result.channels = feqs;
    result.tails = tails;
    result.K = CMatrix::Zero(static_cast<Eigen::Index>(partition.size()), N);
    result.T = CMatrix::Identity(M, M);
    result.T_inv = CMatrix::Identity(M, M);

    for (std::size_t j = 0; j < partition.size(); ++j) {
        const auto low = partition.low_part(j);
        const auto& feq = feqs[j];
        const auto& tail = tails[j];
        if (static_cast<std::size_t>(feq.T_tilde.rows()) != low.size() ||
            tail.tail_indices.size() != partition.channels[j].size() - low.size())
            throw Error(ErrorKind::PartitionMismatch, "channel block sizes differ from partition", j + 1);

        const CMatrix T_tilde_inv = feq.T_tilde.partialPivLu().inverse();
        for (std::size_t a = 0; a < low.size(); ++a) {
            result.K(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(low[a])) = feq.K_tilde[static_cast<Eigen::Index>(a)];
            for (std::size_t b = 0; b < low.size(); ++b) {
                result.T(static_cast<Eigen::Index>(low[a]), static_cast<Eigen::Index>(low[b])) =
                    feq.T_tilde(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
                result.T_inv(static_cast<Eigen::Index>(low[a]), static_cast<Eigen::Index>(low[b])) =
                    T_tilde_inv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
            }
        }
        for (std::size_t r = 0; r < tail.tail_indices.size(); ++r) {
            const auto k = static_cast<Eigen::Index>(tail.tail_indices[r]);
            const auto ri = static_cast<Eigen::Index>(r);
            const Complex c = tail.c[ri];
            result.T(k, k) = c;
            result.T_inv(k, k) = 1.0 / c;
            const CVector lower = -(tail.tau.row(ri) * T_tilde_inv).transpose() / c;
            for (std::size_t b = 0; b < low.size(); ++b) {
                result.T(k, static_cast<Eigen::Index>(low[b])) = tail.tau(ri, static_cast<Eigen::Index>(b));
                result.T_inv(k, static_cast<Eigen::Index>(low[b])) = lower[static_cast<Eigen::Index>(b)];
            }
        }
    }

    result.D.resize(op.truncation());
    for (std::size_t n = 0; n < op.truncation(); ++n)
        result.D[n] = split.is_low(n) ? op.eigenvalues[n] - result.mu : op.eigenvalues[n];
    return result;
}

/// Closed-loop matrix A + B K on the truncation (only the first m(lambda)
/// inputs carry feedback).
inline CMatrix closed_loop_matrix(const SpectralOperator& op, const ControlOperator& B, const CMatrix& K) {
    CMatrix X = diagonal_matrix(op);
    const auto M = static_cast<Eigen::Index>(op.truncation());
    for (Eigen::Index j = 0; j < K.rows(); ++j) {
        const CVector& b = B.coefficients[static_cast<std::size_t>(j)];
        for (Eigen::Index n = 0; n < K.cols(); ++n) {
            const Complex k = K(j, n);
            if (k == Complex(0.0)) continue;
            for (Eigen::Index i = 0; i < M; ++i) X(i, n) += b[i] * k;
        }
    }
    return X;
}

}  // namespace pfeq
