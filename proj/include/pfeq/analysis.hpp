#pragma once

// Frequency decomposition at a target rate, eigenvalue clustering, channel
// partitioning and the controllability/uniqueness verdicts.
//
// Indices in this API are 0-based positions in the eigenvalue list; reports
// emitted to JSON convert to the 1-based convention.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pfeq/spectral_core.hpp"
#include "pfeq/types.hpp"

namespace pfeq {

struct Tolerances {
    double eps_eig = 1e-9;    // relative, eigenvalue equality
    double eps_adm = 1e-12;   // absolute, nonzero control coefficient
    double eps_rank = 1e-10;  // relative to the largest singular value
};

struct Cluster {
    Complex representative;
    std::vector<std::size_t> members;
};

struct ClusterSet {
    std::vector<Cluster> clusters;
    double tolerance = 1e-9;

    /// Position of the cluster containing eigenvalue index n.
    std::size_t cluster_of(std::size_t n) const {
        for (std::size_t c = 0; c < clusters.size(); ++c)
            if (std::find(clusters[c].members.begin(), clusters[c].members.end(), n) != clusters[c].members.end())
                return c;
        throw Error(ErrorKind::DimensionMismatch, "index not covered by cluster set", n + 1);
    }
};

/// Greedy left-to-right clustering: an eigenvalue joins the first cluster
/// whose representative lies within eps * (1 + |representative|).
inline ClusterSet cluster_eigenvalues(const SpectralOperator& op, double eps) {
    ClusterSet set;
    set.tolerance = eps;
    for (std::size_t n = 0; n < op.truncation(); ++n) {
        const Complex value = op.eigenvalues[n];
        bool placed = false;
        for (auto& cluster : set.clusters) {
            if (std::abs(value - cluster.representative) <= eps * (1.0 + std::abs(cluster.representative))) {
                cluster.members.push_back(n);
                placed = true;
                break;
            }
        }
        if (!placed) set.clusters.push_back(Cluster{value, {n}});
    }
    return set;
}

struct FrequencySplit {
    double lambda = 0.0;
    /// Low indices are the prefix {0, ..., N_lambda - 1}.
    std::size_t N_lambda = 0;
    std::size_t m_lambda = 0;
    double c_A = 0.0;
    std::size_t truncation = 0;
    /// Warning: every retained mode is low frequency, H_lambda is invisible.
    bool truncation_exhausted = false;

    std::vector<std::size_t> low_indices() const {
        std::vector<std::size_t> out(N_lambda);
        for (std::size_t n = 0; n < N_lambda; ++n) out[n] = n;
        return out;
    }
    bool is_low(std::size_t n) const { return n < N_lambda; }
};

inline FrequencySplit frequency_split(const SpectralOperator& op, double lambda, double eps_eig = 1e-9) {
    if (!(lambda > 0.0)) throw Error(ErrorKind::ConfigError, "target rate lambda must be positive");
    FrequencySplit split;
    split.lambda = lambda;
    split.c_A = op.c_A();
    split.truncation = op.truncation();
    while (split.N_lambda < op.truncation() && op.eigenvalues[split.N_lambda].real() >= -lambda) ++split.N_lambda;
    split.truncation_exhausted = split.N_lambda == op.truncation();

    const ClusterSet clusters = cluster_eigenvalues(op, eps_eig);
    for (const auto& cluster : clusters.clusters) {
        const auto low = static_cast<std::size_t>(
            std::count_if(cluster.members.begin(), cluster.members.end(), [&](std::size_t n) { return split.is_low(n); }));
        split.m_lambda = std::max(split.m_lambda, low);
    }
    return split;
}

/// 1-based global index of the n-th member (n > N_j) of channel j under the
/// round-robin tail extension m(n - N_j) - (j - 1) + N.
inline std::size_t tail_global_index(std::size_t j, std::size_t n, std::size_t N_j, std::size_t m_lambda,
                                     std::size_t N_lambda) {
    return m_lambda * (n - N_j) - (j - 1) + N_lambda;
}

struct ChannelPartition {
    /// channels[j] lists global indices: the N_j low indices ascending, then
    /// the tail indices ascending.
    std::vector<std::vector<std::size_t>> channels;
    std::vector<std::size_t> low_counts;

    std::size_t size() const { return channels.size(); }
    std::vector<std::size_t> low_part(std::size_t j) const {
        return {channels[j].begin(), channels[j].begin() + static_cast<std::ptrdiff_t>(low_counts[j])};
    }
    std::vector<std::size_t> tail_part(std::size_t j) const {
        return {channels[j].begin() + static_cast<std::ptrdiff_t>(low_counts[j]), channels[j].end()};
    }
};

namespace detail {

// Kuhn augmenting path for copy -> channel matching.
inline bool augment(std::size_t copy, const std::vector<std::vector<bool>>& edge, std::vector<bool>& seen,
                    std::vector<long>& channel_owner) {
    for (std::size_t ch = 0; ch < channel_owner.size(); ++ch) {
        if (!edge[copy][ch] || seen[ch]) continue;
        seen[ch] = true;
        if (channel_owner[ch] < 0 ||
            augment(static_cast<std::size_t>(channel_owner[ch]), edge, seen, channel_owner)) {
            channel_owner[ch] = static_cast<long>(copy);
            return true;
        }
    }
    return false;
}

inline std::string describe(Complex z) {
    std::ostringstream os;
    os << z.real();
    if (z.imag() != 0.0) os << (z.imag() > 0 ? "+" : "") << z.imag() << "i";
    return os.str();
}

}  // namespace detail

/// Assigns every low cluster's copies to distinct channels (channel j is
/// served by input j) through maximum bipartite matching on the nonzero
/// pattern of B, then distributes the tail round-robin.
inline ChannelPartition partition_channels(const FrequencySplit& split, const ClusterSet& clusters,
                                           const ControlOperator& B, double eps_adm = 1e-12) {
    const std::size_t m = split.m_lambda;
    ChannelPartition partition;
    if (m == 0) return partition;

    if (B.inputs() < m) {
        std::size_t witness = 0;
        for (std::size_t c = 0; c < clusters.clusters.size(); ++c)
            if (clusters.clusters[c].members.size() > B.inputs() && split.is_low(clusters.clusters[c].members.front())) {
                witness = c;
                break;
            }
        throw Error(ErrorKind::NoAdmissibleMatching,
                    "cluster at " + detail::describe(clusters.clusters[witness].representative) + " has multiplicity " +
                        std::to_string(clusters.clusters[witness].members.size()) + " but only " +
                        std::to_string(B.inputs()) + " inputs are available (pigeonhole)",
                    witness + 1);
    }

    std::vector<std::vector<std::size_t>> low(m);
    for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
        std::vector<std::size_t> copies;
        for (std::size_t n : clusters.clusters[c].members)
            if (split.is_low(n)) copies.push_back(n);
        if (copies.empty()) continue;

        std::vector<std::vector<bool>> edge(copies.size(), std::vector<bool>(m, false));
        for (std::size_t i = 0; i < copies.size(); ++i)
            for (std::size_t ch = 0; ch < m; ++ch)
                edge[i][ch] = std::abs(B.coefficients[ch][static_cast<Eigen::Index>(copies[i])]) > eps_adm;

        std::vector<long> owner(m, -1);
        for (std::size_t i = 0; i < copies.size(); ++i) {
            std::vector<bool> seen(m, false);
            if (!detail::augment(i, edge, seen, owner))
                throw Error(ErrorKind::NoAdmissibleMatching,
                            "no system of distinct representatives for cluster at " +
                                detail::describe(clusters.clusters[c].representative) +
                                ": B is not F_lambda-admissible under any copy assignment",
                            c + 1);
        }
        for (std::size_t ch = 0; ch < m; ++ch)
            if (owner[ch] >= 0) low[ch].push_back(copies[static_cast<std::size_t>(owner[ch])]);
    }

    partition.channels.resize(m);
    partition.low_counts.resize(m);
    for (std::size_t ch = 0; ch < m; ++ch) {
        std::sort(low[ch].begin(), low[ch].end());
        partition.low_counts[ch] = low[ch].size();
        partition.channels[ch] = low[ch];
        const std::size_t j = ch + 1;
        for (std::size_t n = low[ch].size() + 1;; ++n) {
            const std::size_t g = tail_global_index(j, n, low[ch].size(), m, split.N_lambda);
            if (g > split.truncation) break;
            partition.channels[ch].push_back(g - 1);
        }
    }
    return partition;
}

struct AdmissibilityEntry {
    std::size_t channel;
    std::size_t index;
    double magnitude;
};

struct AdmissibilityReport {
    bool admissible = true;
    std::vector<bool> channel_ok;
    std::vector<AdmissibilityEntry> entries;
    std::optional<AdmissibilityEntry> offending;
    /// B_j supported on its own channel (B_j in D(A_j)'); leakage is the
    /// largest coefficient of input j outside channel j.
    bool confined = true;
    std::vector<double> leakage;
};

inline AdmissibilityReport check_admissibility(const ChannelPartition& partition, const ControlOperator& B,
                                               double eps_adm = 1e-12) {
    if (partition.size() > B.inputs())
        throw Error(ErrorKind::PartitionMismatch, "more channels than control inputs");
    AdmissibilityReport report;
    report.channel_ok.assign(partition.size(), true);
    report.leakage.assign(partition.size(), 0.0);
    for (std::size_t j = 0; j < partition.size(); ++j) {
        const CVector& b = B.coefficients[j];
        for (std::size_t i = 0; i < partition.low_counts[j]; ++i) {
            const std::size_t n = partition.channels[j][i];
            const double mag = std::abs(b[static_cast<Eigen::Index>(n)]);
            report.entries.push_back({j, n, mag});
            if (!(mag > eps_adm)) {
                report.channel_ok[j] = false;
                report.admissible = false;
                if (!report.offending) report.offending = AdmissibilityEntry{j, n, mag};
            }
        }
        std::vector<bool> own(static_cast<std::size_t>(b.size()), false);
        for (std::size_t n : partition.channels[j]) own[n] = true;
        for (Eigen::Index n = 0; n < b.size(); ++n)
            if (!own[static_cast<std::size_t>(n)]) report.leakage[j] = std::max(report.leakage[j], std::abs(b[n]));
        if (report.leakage[j] > eps_adm) report.confined = false;
    }
    return report;
}

struct ClusterRank {
    Complex representative;
    std::size_t multiplicity;
    std::size_t rank;
};

struct FattoriniReport {
    std::vector<ClusterRank> per_cluster;
    bool verdict = true;
    std::optional<std::size_t> witness;  // first rank-deficient cluster
    std::size_t truncation = 0;
    std::string label() const { return "up to truncation M = " + std::to_string(truncation); }
};

/// Numerical rank of the m x l_n coefficient block of B on every cluster.
inline FattoriniReport fattorini_rank(const ClusterSet& clusters, const ControlOperator& B, double eps_rank = 1e-10) {
    FattoriniReport report;
    report.truncation = B.inputs() == 0 ? 0 : static_cast<std::size_t>(B.coefficients.front().size());
    const auto m = static_cast<Eigen::Index>(B.inputs());
    for (std::size_t c = 0; c < clusters.clusters.size(); ++c) {
        const auto& members = clusters.clusters[c].members;
        const auto l = static_cast<Eigen::Index>(members.size());
        CMatrix block(m, l);
        for (Eigen::Index j = 0; j < m; ++j)
            for (Eigen::Index k = 0; k < l; ++k)
                block(j, k) = B.coefficients[static_cast<std::size_t>(j)][static_cast<Eigen::Index>(members[static_cast<std::size_t>(k)])];
        std::size_t rank = 0;
        if (m > 0) {
            const Eigen::JacobiSVD<CMatrix> svd(block);
            const RVector sv = svd.singularValues();
            const double smax = sv.size() > 0 ? sv.maxCoeff() : 0.0;
            if (smax > 0.0)
                for (Eigen::Index i = 0; i < sv.size(); ++i)
                    if (sv[i] > eps_rank * smax) ++rank;
        }
        report.per_cluster.push_back({clusters.clusters[c].representative, members.size(), rank});
        if (rank < members.size()) {
            report.verdict = false;
            if (!report.witness) report.witness = c;
        }
    }
    return report;
}

struct UniquenessVerdict {
    bool unique = false;
    std::string statement;
    std::optional<ClusterRank> witness;
};

inline UniquenessVerdict uniqueness_verdict(const FattoriniReport& fattorini) {
    UniquenessVerdict v;
    v.unique = fattorini.verdict;
    if (v.unique) {
        v.statement = "parabolic F-equivalence unique (" + fattorini.label() + ")";
    } else {
        v.witness = fattorini.per_cluster[*fattorini.witness];
        v.statement = "non-unique: N_{B_H} != {0}, witness cluster at " +
                      detail::describe(v.witness->representative) + " (rank " + std::to_string(v.witness->rank) +
                      " < " + std::to_string(v.witness->multiplicity) + ", " + fattorini.label() + ")";
    }
    return v;
}

}  // namespace pfeq
