#pragma once

// Test-side oracles and random instance generation. Nothing here calls the
// library routine it is used to check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Eigenvalues>

#include "pfeq/analysis.hpp"
#include "pfeq/spectral_core.hpp"

namespace pfeq::oracle {

/// Single-input pole placement for a diagonal pair with simple eigenvalues:
/// the residue of det(sI - A - bK) / prod(s - lambda_i) at s = lambda_j gives
/// K_j = -prod_i (lambda_j - p_i) / (b_j prod_{i != j} (lambda_j - lambda_i)).
inline std::vector<Complex> pole_placement(const std::vector<Complex>& lambda, const std::vector<Complex>& b,
                                           const std::vector<Complex>& poles) {
    std::vector<Complex> K(lambda.size());
    for (std::size_t j = 0; j < lambda.size(); ++j) {
        Complex num = 1.0, den = b[j];
        for (std::size_t i = 0; i < lambda.size(); ++i) {
            num *= lambda[j] - poles[i];
            if (i != j) den *= lambda[j] - lambda[i];
        }
        K[j] = -num / den;
    }
    return K;
}

/// Tail multiplier in product form: c_k = prod_n (lambda_k - lambda_n + mu) / (lambda_k - lambda_n).
inline Complex tail_multiplier_product(Complex lambda_k, const std::vector<Complex>& low, double mu) {
    Complex c = 1.0;
    for (const Complex& l : low) c *= (lambda_k - l + mu) / (lambda_k - l);
    return c;
}

/// Eigenvalues through Eigen's complex Schur solver (independent of LAPACK).
inline CVector eigen_eigenvalues(const CMatrix& X) {
    Eigen::ComplexEigenSolver<CMatrix> solver(X, false);
    return solver.eigenvalues();
}

/// Max over targets of the distance to the nearest unused computed value,
/// taking targets in order of their best available distance.
inline double matched_distance(const CVector& computed, const std::vector<Complex>& targets) {
    std::vector<bool> used(static_cast<std::size_t>(computed.size()), false);
    std::vector<bool> done(targets.size(), false);
    double worst = 0.0;
    for (std::size_t round = 0; round < targets.size(); ++round) {
        double best = INFINITY;
        std::size_t bt = 0, bc = 0;
        for (std::size_t t = 0; t < targets.size(); ++t) {
            if (done[t]) continue;
            for (Eigen::Index c = 0; c < computed.size(); ++c) {
                if (used[static_cast<std::size_t>(c)]) continue;
                const double d = std::abs(targets[t] - computed[c]);
                if (d < best) {
                    best = d;
                    bt = t;
                    bc = static_cast<std::size_t>(c);
                }
            }
        }
        done[bt] = true;
        used[bc] = true;
        worst = std::max(worst, best);
    }
    return worst;
}

/// Burgers term by collocation: evaluate u on a fine grid, square pointwise,
/// project back with a naive DFT and differentiate spectrally.
inline std::vector<Complex> burgers_collocation(const std::vector<long>& k_of, const CVector& u, long kmax) {
    const long L = 4 * kmax + 8;
    const double norm = 1.0 / std::sqrt(2.0 * kPi);
    std::vector<Complex> w(static_cast<std::size_t>(L));
    for (long x = 0; x < L; ++x) {
        const double xx = 2.0 * kPi * static_cast<double>(x) / static_cast<double>(L);
        Complex val = 0.0;
        for (std::size_t i = 0; i < k_of.size(); ++i)
            if (std::abs(k_of[i]) <= kmax) val += u[static_cast<Eigen::Index>(i)] * std::exp(Complex(0.0, k_of[i] * xx)) * norm;
        w[static_cast<std::size_t>(x)] = val * val;
    }
    std::vector<Complex> F(k_of.size(), 0.0);
    for (std::size_t i = 0; i < k_of.size(); ++i) {
        const long k = k_of[i];
        if (std::abs(k) > kmax) continue;
        Complex wk = 0.0;
        for (long x = 0; x < L; ++x) {
            const double xx = 2.0 * kPi * static_cast<double>(x) / static_cast<double>(L);
            wk += w[static_cast<std::size_t>(x)] * std::exp(Complex(0.0, -k * xx));
        }
        wk *= (2.0 * kPi / static_cast<double>(L)) * norm;
        F[i] = -0.5 * Complex(0.0, static_cast<double>(k)) * wk;
    }
    return F;
}

struct Instance {
    SpectralOperator op;
    ControlOperator B;
    double lambda = 1.0;
    double mu0 = 1.0;
    std::size_t N = 0;
    std::size_t m = 1;
};

/// Random admissible instance of parabolic type: cluster n sits at
/// a - c n^p (p = 2 or 4) with multiplicity up to the input count, some
/// clusters carry a sector-respecting imaginary part, lambda is placed between
/// two clusters so that N <= max_N, and the control is dense on the channels a
/// matching picks.
inline Instance random_instance(std::uint64_t seed, std::size_t max_N = 8, std::size_t max_M = 64) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    auto randint = [&](std::size_t lo, std::size_t hi) { return lo + static_cast<std::size_t>(rng() % (hi - lo + 1)); };

    Instance inst;
    inst.m = randint(1, 3);
    const double p = U(rng) < 0.5 ? 2.0 : 4.0;
    const double c = 0.5 + 1.5 * U(rng);
    const double a = -1.0 + 3.0 * U(rng);
    const std::size_t M = randint(std::min<std::size_t>(max_N + 8, max_M), max_M);

    std::vector<std::pair<Complex, std::size_t>> clusters;
    std::size_t count = 0;
    for (std::size_t n = 0; count < M; ++n) {
        const double re = a - c * std::pow(static_cast<double>(n), p);
        const double im = (n > 1 && U(rng) < 0.3) ? 0.3 * std::abs(re) * U(rng) : 0.0;
        const std::size_t mult = std::min(randint(1, inst.m), M - count);
        clusters.push_back({Complex(re, im), mult});
        count += mult;
    }

    // Low set: the longest cluster prefix with at most N_target modes whose
    // lambda (midway to the next cluster) is positive.
    const std::size_t N_target = randint(1, max_N);
    std::size_t low_clusters = 0, low_modes = 0;
    while (low_clusters + 1 < clusters.size() && low_modes + clusters[low_clusters].second <= N_target) {
        low_modes += clusters[low_clusters].second;
        ++low_clusters;
    }
    while (low_clusters + 1 < clusters.size() &&
           -(clusters[low_clusters - 1].first.real() + clusters[low_clusters].first.real()) / 2.0 <= 0.0)
        ++low_clusters;
    inst.lambda = -(clusters[low_clusters - 1].first.real() + clusters[low_clusters].first.real()) / 2.0;

    for (const auto& [value, mult] : clusters)
        for (std::size_t i = 0; i < mult; ++i) inst.op.eigenvalues.push_back(value);
    inst.op.sector_constant = 1.0;
    inst.op.label = "random";
    inst.op.delta = default_delta(inst.op);

    // Dense random control, then confined to the channels the matching picks.
    ControlOperator dense;
    for (std::size_t j = 0; j < inst.m; ++j) {
        CVector b(static_cast<Eigen::Index>(M));
        for (Eigen::Index n = 0; n < b.size(); ++n)
            b[n] = std::polar(0.5 + 1.5 * U(rng), 2.0 * kPi * U(rng));
        dense.coefficients.push_back(b);
    }
    const FrequencySplit split = frequency_split(inst.op, inst.lambda);
    const ClusterSet cs = cluster_eigenvalues(inst.op, 1e-9);
    const ChannelPartition part = partition_channels(split, cs, dense);
    inst.B.coefficients.assign(inst.m, CVector::Zero(static_cast<Eigen::Index>(M)));
    for (std::size_t j = 0; j < part.size(); ++j)
        for (std::size_t n : part.channels[j])
            inst.B.coefficients[j][static_cast<Eigen::Index>(n)] = dense.coefficients[j][static_cast<Eigen::Index>(n)];
    // Inputs beyond m(lambda) stay unused by the feedback; keep them dense.
    for (std::size_t j = part.size(); j < inst.m; ++j) inst.B.coefficients[j] = dense.coefficients[j];
    inst.N = split.N_lambda;
    const double floor = inst.lambda + inst.op.c_A();
    inst.mu0 = floor * (1.1 + 0.9 * U(rng)) + 0.5 * U(rng);
    return inst;
}

}  // namespace pfeq::oracle
