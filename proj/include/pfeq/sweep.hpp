#pragma once

// Empirical map of the rejected mu set: independent syntheses over a mu grid,
// fanned out across worker threads and merged in mu order.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <future>
#include <limits>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "pfeq/analysis.hpp"
#include "pfeq/simulation.hpp"
#include "pfeq/synthesis.hpp"
#include "pfeq/verification.hpp"

namespace pfeq {

struct SweepRow {
    double mu = 0.0;
    bool valid = false;
    std::string reason;
    double c_min = std::numeric_limits<double>::quiet_NaN();
    double C_overshoot = std::numeric_limits<double>::quiet_NaN();
    double fitted_rate = std::numeric_limits<double>::quiet_NaN();
};

struct SweepOptions {
    SynthesisOptions synthesis;
    std::size_t workers = 0;  // 0: hardware concurrency
    /// Run a short linear closed-loop simulation per valid mu for fitted_rate.
    bool simulate = true;
    std::uint64_t seed = 0;
};

/// n samples drawn uniformly from [lo, hi] with a seeded generator, sorted.
inline std::vector<double> uniform_mu_samples(double lo, double hi, std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(lo, hi);
    std::vector<double> out(n);
    for (double& x : out) x = dist(rng);
    std::sort(out.begin(), out.end());
    return out;
}

inline SweepRow evaluate_mu(const SpectralOperator& op, const ControlOperator& B, const FrequencySplit& split,
                            const ChannelPartition& partition, double mu, const SweepOptions& opts) {
    SweepRow row;
    row.mu = mu;
    try {
        const ChannelSolution sol = solve_channels(op, B, split, partition, mu, opts.synthesis);
        row.valid = sol.validity.valid;
        row.c_min = sol.validity.c_min;
        if (!row.valid) {
            row.reason = sol.validity.issues.front().kind;
            return row;
        }
        const SynthesisResult result = assemble(partition, sol.feqs, sol.tails, op, split);
        row.C_overshoot = transformation_conditioning(result).C_overshoot;
        if (opts.simulate) {
            SimConfig cfg;
            cfg.t_final = 5.0 / split.lambda;
            cfg.dt = cfg.t_final / 200.0;
            cfg.initial = random_initial_state(op, 1.0, opts.seed);
            row.fitted_rate = simulate_linear(op, B, result.K, cfg).fitted_rate;
        }
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ResonantMu && e.kind() != ErrorKind::SingularCauchySystem) throw;
        row.valid = false;
        row.reason = to_string(e.kind());
    }
    return row;
}

inline std::vector<SweepRow> sweep_mu(const SpectralOperator& op, const ControlOperator& B, const FrequencySplit& split,
                                      const ChannelPartition& partition, const std::vector<double>& mus,
                                      const SweepOptions& opts = {}) {
    std::vector<SweepRow> rows(mus.size());
    std::size_t workers = opts.workers ? opts.workers : std::max(1u, std::thread::hardware_concurrency());
    workers = std::min(workers, std::max<std::size_t>(1, mus.size()));
    std::vector<std::future<void>> jobs;
    for (std::size_t w = 0; w < workers; ++w)
        jobs.push_back(std::async(std::launch::async, [&, w] {
            for (std::size_t i = w; i < mus.size(); i += workers)
                rows[i] = evaluate_mu(op, B, split, partition, mus[i], opts);
        }));
    for (auto& job : jobs) job.get();
    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) { return a.mu < b.mu; });
    return rows;
}

}  // namespace pfeq
