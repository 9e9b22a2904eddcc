#pragma once

// Independent certification of a SynthesisResult: F-equivalence residuals,
// closed-loop spectrum, conditioning of T and tail regularity.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "pfeq/analysis.hpp"
#include "pfeq/linalg.hpp"
#include "pfeq/spectral_core.hpp"
#include "pfeq/synthesis.hpp"
#include "pfeq/types.hpp"

namespace pfeq {

struct ResidualReport {
    std::vector<double> column_residuals;
    double tb_residual = 0.0;
    double max_r = 0.0;
    double gamma = 0.5;
};

/// Column residuals ||(T(A + BK) - DT) e_n||_2 and max_j ||T b^j - b^j||_inf.
inline ResidualReport feq_residual(const SynthesisResult& result, const SpectralOperator& op, const ControlOperator& B) {
    const auto M = static_cast<Eigen::Index>(op.truncation());
    if (result.T.rows() != M || result.T.cols() != M || result.D.size() != op.truncation() ||
        static_cast<std::size_t>(result.K.rows()) > B.inputs())
        throw Error(ErrorKind::DimensionMismatch, "synthesis result does not match operator dimensions");

    ResidualReport report;
    report.gamma = std::min(1.0 - B.growth_exponent, 0.5);

    const CMatrix X = closed_loop_matrix(op, B, result.K_full());
    CMatrix R = result.T * X;
    for (Eigen::Index i = 0; i < M; ++i) R.row(i) -= result.D[static_cast<std::size_t>(i)] * result.T.row(i);
    report.column_residuals.resize(static_cast<std::size_t>(M));
    for (Eigen::Index n = 0; n < M; ++n) {
        report.column_residuals[static_cast<std::size_t>(n)] = R.col(n).norm();
        report.max_r = std::max(report.max_r, report.column_residuals[static_cast<std::size_t>(n)]);
    }

    for (Eigen::Index j = 0; j < result.K.rows(); ++j) {
        const CVector& b = B.coefficients[static_cast<std::size_t>(j)];
        report.tb_residual = std::max(report.tb_residual, (result.T * b - b).cwiseAbs().maxCoeff());
    }
    return report;
}

struct ShiftReport {
    double max_distance = 0.0;
    CVector closed_loop_eigenvalues;
    std::vector<Complex> targets;
    std::vector<double> distances;  // per target, after matching
};

/// Greedy nearest-pair matching (global closest pair first, with removal).
inline std::vector<double> match_spectra(const CVector& computed, const std::vector<Complex>& targets) {
    const std::size_t n = targets.size();
    std::vector<std::pair<double, std::pair<std::size_t, std::size_t>>> pairs;
    pairs.reserve(n * n);
    for (std::size_t t = 0; t < n; ++t)
        for (std::size_t c = 0; c < n; ++c)
            pairs.push_back({std::abs(targets[t] - computed[static_cast<Eigen::Index>(c)]), {t, c}});
    std::sort(pairs.begin(), pairs.end());
    std::vector<bool> t_used(n, false), c_used(n, false);
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    std::size_t matched = 0;
    for (const auto& [d, tc] : pairs) {
        if (t_used[tc.first] || c_used[tc.second]) continue;
        t_used[tc.first] = c_used[tc.second] = true;
        dist[tc.first] = d;
        if (++matched == n) break;
    }
    return dist;
}

inline ShiftReport spectrum_shift_check(const SpectralOperator& op, const FrequencySplit& split,
                                        const ControlOperator& B, const CMatrix& K, double mu) {
    if (static_cast<std::size_t>(K.cols()) > op.truncation() || static_cast<std::size_t>(K.rows()) > B.inputs())
        throw Error(ErrorKind::DimensionMismatch, "feedback does not match operator dimensions");
    CMatrix K_full = CMatrix::Zero(K.rows(), static_cast<Eigen::Index>(op.truncation()));
    K_full.leftCols(K.cols()) = K;

    ShiftReport report;
    report.closed_loop_eigenvalues = linalg::eigenvalues(closed_loop_matrix(op, B, K_full));
    const bool has_feedback = K.size() > 0 && K.cwiseAbs().maxCoeff() > 0.0;
    for (std::size_t n = 0; n < op.truncation(); ++n)
        report.targets.push_back(split.is_low(n) && has_feedback ? op.eigenvalues[n] - mu : op.eigenvalues[n]);
    report.distances = match_spectra(report.closed_loop_eigenvalues, report.targets);
    for (double d : report.distances) report.max_distance = std::max(report.max_distance, d);
    return report;
}

struct ConditioningReport {
    double norm_T = 1.0;
    double norm_Tinv = 1.0;
    double C_overshoot = 1.0;
    std::string label = "truncated lower bound";
};

inline ConditioningReport transformation_conditioning(const SynthesisResult& result) {
    ConditioningReport report;
    auto norm = [](const CMatrix& X) {
        if (X.size() == 0) return 0.0;
        return Eigen::BDCSVD<CMatrix>(X).singularValues()[0];
    };
    report.norm_T = norm(result.T);
    report.norm_Tinv = norm(result.T_inv);
    report.C_overshoot = report.norm_T * report.norm_Tinv;
    return report;
}

struct TailRegularityColumn {
    std::size_t index = 0;  // global low index
    std::vector<std::size_t> cutoffs;
    std::vector<double> partial_sums;
    double last_increment_fraction = 0.0;
    bool warning = false;
};

struct TailRegularityReport {
    double exponent = 1.0;  // 1 - s
    std::vector<TailRegularityColumn> columns;
    bool any_warning = false;
    std::string note = "necessary-condition probe at truncation";
};

/// Partial sums sum_{k <= M'} (1 + |lambda_k|^2)^{1-s} |tau_{k,n}|^2 for
/// M' = M/4, M/2, M; a last increment above 10% of the total is flagged.
inline TailRegularityReport tail_regularity_check(const SynthesisResult& result, const SpectralOperator& op,
                                                  const ControlOperator& B) {
    TailRegularityReport report;
    report.exponent = 1.0 - B.growth_exponent;
    const std::size_t M = op.truncation();
    const std::vector<std::size_t> cutoffs{std::max<std::size_t>(1, M / 4), std::max<std::size_t>(1, M / 2), M};
    for (std::size_t n = 0; n < result.N_lambda; ++n) {
        TailRegularityColumn col;
        col.index = n;
        col.cutoffs = cutoffs;
        double sum = 0.0;
        std::size_t k = result.N_lambda;
        for (std::size_t cut : cutoffs) {
            for (; k < cut; ++k)
                sum += sobolev_weight(op.eigenvalues[k], report.exponent) *
                       std::norm(result.T(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)));
            col.partial_sums.push_back(sum);
        }
        const double total = col.partial_sums.back();
        const double increment = total - col.partial_sums[col.partial_sums.size() - 2];
        col.last_increment_fraction = total > 0.0 ? increment / total : 0.0;
        col.warning = col.last_increment_fraction > 0.1;
        report.any_warning = report.any_warning || col.warning;
        report.columns.push_back(std::move(col));
    }
    return report;
}

}  // namespace pfeq
