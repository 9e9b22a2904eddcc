#pragma once

// End-to-end analysis and synthesis with built-in verification.

#include <cstdint>
#include <optional>
#include <string>

#include "pfeq/analysis.hpp"
#include "pfeq/spectral_core.hpp"
#include "pfeq/synthesis.hpp"
#include "pfeq/verification.hpp"

namespace pfeq {

struct AnalysisResult {
    OperatorReport operator_report;
    FrequencySplit split;
    ClusterSet clusters;
    std::optional<ChannelPartition> partition;
    std::optional<AdmissibilityReport> admissibility;
    /// Message of the NoAdmissibleMatching error when no partition exists.
    std::string partition_error;
    FattoriniReport fattorini;
    UniquenessVerdict uniqueness;

    bool admissible() const { return admissibility && admissibility->admissible; }
};

inline AnalysisResult analyze(const SpectralOperator& op, const ControlOperator& B, double lambda,
                              const Tolerances& tol = {}) {
    AnalysisResult a;
    a.operator_report = validate_operator(op);
    a.operator_report.require_ok();
    validate_control(op, B);
    a.split = frequency_split(op, lambda, tol.eps_eig);
    a.clusters = cluster_eigenvalues(op, tol.eps_eig);
    try {
        a.partition = partition_channels(a.split, a.clusters, B, tol.eps_adm);
        a.admissibility = check_admissibility(*a.partition, B, tol.eps_adm);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoAdmissibleMatching) throw;
        a.partition_error = e.what();
    }
    a.fattorini = fattorini_rank(a.clusters, B, tol.eps_rank);
    a.uniqueness = uniqueness_verdict(a.fattorini);
    return a;
}

struct PipelineOptions {
    SynthesisOptions synthesis;
    std::size_t mu_attempts = 5;
    std::uint64_t seed = 0;
    /// Per-column residual bound, scaled by (1 + |mu|) in verify().
    double residual_tolerance = 1e-8;
    double tb_tolerance = 1e-10;
};

struct VerifyResult {
    ResidualReport residual;
    ShiftReport shift;
    ConditioningReport conditioning;
    TailRegularityReport tail_regularity;
    double residual_bound = 0.0;
    bool passed = false;
};

inline VerifyResult verify(const SynthesisResult& result, const SpectralOperator& op, const ControlOperator& B,
                           const FrequencySplit& split, const PipelineOptions& opts = {}) {
    VerifyResult v;
    v.residual = feq_residual(result, op, B);
    v.shift = spectrum_shift_check(op, split, B, result.K, result.mu);
    v.conditioning = transformation_conditioning(result);
    v.tail_regularity = tail_regularity_check(result, op, B);
    v.residual_bound = opts.residual_tolerance * (1.0 + std::abs(result.mu));
    v.passed = v.residual.max_r <= v.residual_bound && v.residual.tb_residual <= opts.tb_tolerance;
    return v;
}

struct PipelineResult {
    AnalysisResult analysis;
    MuSelection selection;
    SynthesisResult result;
    VerifyResult verification;
    bool valid = false;
};

/// Runs the full construction. Throws NoAdmissibleMatching when B is not
/// admissible and NoValidMuFound when every candidate mu is rejected.
inline PipelineResult synthesize(const SpectralOperator& op, const ControlOperator& B, double lambda, double mu0,
                                 const PipelineOptions& opts = {}) {
    PipelineResult out;
    out.analysis = analyze(op, B, lambda, opts.synthesis.tol);
    if (!out.analysis.partition)
        throw Error(ErrorKind::NoAdmissibleMatching, out.analysis.partition_error);
    if (!out.analysis.admissible()) {
        const auto& off = *out.analysis.admissibility->offending;
        throw Error(ErrorKind::NoAdmissibleMatching,
                    "input " + std::to_string(off.channel + 1) + " vanishes on low mode " + std::to_string(off.index + 1),
                    off.index + 1);
    }
    const ChannelPartition& partition = *out.analysis.partition;
    out.selection = select_mu(op, B, out.analysis.split, partition, mu0, opts.mu_attempts, opts.seed, opts.synthesis);
    out.result = assemble(partition, out.selection.solution.feqs, out.selection.solution.tails, op, out.analysis.split);
    out.result.mu = out.selection.mu;
    out.verification = verify(out.result, op, B, out.analysis.split, opts);
    out.valid = out.selection.solution.validity.valid && out.verification.passed;
    return out;
}

}  // namespace pfeq
