#pragma once

// JSON model files, JSON reports, trajectory CSV and binary matrix dumps.
// Indices in every file format are 1-based.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "pfeq/pipeline.hpp"
#include "pfeq/simulation.hpp"
#include "pfeq/spectral_core.hpp"
#include "pfeq/types.hpp"

namespace pfeq::io {

using Json = nlohmann::ordered_json;

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline Json to_json(Complex z) { return Json::array({z.real(), z.imag()}); }

inline Json to_json(const CVector& v) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(to_json(v[i]));
    return out;
}

inline Json to_json(const std::vector<Complex>& v) {
    Json out = Json::array();
    for (const Complex& z : v) out.push_back(to_json(z));
    return out;
}

inline Json to_json(const CMatrix& X) {
    Json out = Json::array();
    for (Eigen::Index i = 0; i < X.rows(); ++i) out.push_back(to_json(CVector(X.row(i).transpose())));
    return out;
}

// ---------------------------------------------------------------------------
// Reading with key paths in error messages.

namespace detail {

[[noreturn]] inline void bad(const std::string& path, const std::string& what) {
    throw Error(ErrorKind::ConfigError, "key '" + path + "': " + what);
}

inline double read_number(const Json& j, const std::string& path) {
    if (!j.is_number()) bad(path, "expected a number");
    return j.get<double>();
}

inline Complex read_complex(const Json& j, const std::string& path) {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.size() != 2) bad(path, "expected [re, im]");
    return {read_number(j[0], path + "[0]"), read_number(j[1], path + "[1]")};
}

inline std::vector<Complex> read_complex_list(const Json& j, const std::string& path) {
    if (!j.is_array()) bad(path, "expected an array");
    std::vector<Complex> out;
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(read_complex(j[i], path + "[" + std::to_string(i) + "]"));
    return out;
}

inline const Json& require(const Json& j, const std::string& key, const std::string& path) {
    if (!j.is_object()) bad(path, "expected an object");
    if (!j.contains(key)) bad(path.empty() ? key : path + "." + key, "missing");
    return j.at(key);
}

}  // namespace detail

inline CMatrix matrix_from_json(const Json& j, const std::string& path) {
    if (!j.is_array()) detail::bad(path, "expected an array of rows");
    CMatrix X;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto row = detail::read_complex_list(j[i], path + "[" + std::to_string(i) + "]");
        if (i == 0) X.resize(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(row.size()));
        if (static_cast<Eigen::Index>(row.size()) != X.cols()) detail::bad(path, "ragged rows");
        for (std::size_t c = 0; c < row.size(); ++c) X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = row[c];
    }
    return X;
}

struct ModelFile {
    SpectralOperator op;
    ControlOperator B;
};

/// {eigenvalues: [[re, im], ...], truncation, sector_constant, label,
///  controls: [{coefficients: [[re, im], ...], growth_exponent}], basis?, delta?}
inline ModelFile model_from_json(const Json& j) {
    ModelFile m;
    m.op.eigenvalues = detail::read_complex_list(detail::require(j, "eigenvalues", ""), "eigenvalues");
    if (j.contains("truncation")) {
        const double t = detail::read_number(j["truncation"], "truncation");
        if (t != static_cast<double>(m.op.eigenvalues.size()))
            detail::bad("truncation", "does not match the number of eigenvalues");
    }
    m.op.sector_constant = detail::read_number(detail::require(j, "sector_constant", ""), "sector_constant");
    if (j.contains("label")) {
        if (!j["label"].is_string()) detail::bad("label", "expected a string");
        m.op.label = j["label"].get<std::string>();
    }
    if (j.contains("basis")) {
        if (!j["basis"].is_string()) detail::bad("basis", "expected a string");
        try {
            m.op.basis = basis_from_string(j["basis"].get<std::string>());
        } catch (const Error& e) {
            detail::bad("basis", e.what());
        }
    }
    m.op.delta = j.contains("delta") ? detail::read_number(j["delta"], "delta") : default_delta(m.op);

    const Json& controls = detail::require(j, "controls", "");
    if (!controls.is_array() || controls.empty()) detail::bad("controls", "expected a non-empty array");
    for (std::size_t c = 0; c < controls.size(); ++c) {
        const std::string path = "controls[" + std::to_string(c) + "]";
        const auto coeffs = detail::read_complex_list(detail::require(controls[c], "coefficients", path), path + ".coefficients");
        if (coeffs.size() != m.op.eigenvalues.size())
            detail::bad(path + ".coefficients", "length differs from the number of eigenvalues");
        CVector b(static_cast<Eigen::Index>(coeffs.size()));
        for (std::size_t i = 0; i < coeffs.size(); ++i) b[static_cast<Eigen::Index>(i)] = coeffs[i];
        m.B.coefficients.push_back(b);
        const double s = detail::read_number(detail::require(controls[c], "growth_exponent", path), path + ".growth_exponent");
        if (c > 0 && s != m.B.growth_exponent) detail::bad(path + ".growth_exponent", "all inputs must share one exponent");
        m.B.growth_exponent = s;
    }
    return m;
}

inline Json model_to_json(const SpectralOperator& op, const ControlOperator& B) {
    Json j;
    j["label"] = op.label;
    j["basis"] = to_string(op.basis);
    j["truncation"] = op.truncation();
    j["sector_constant"] = op.sector_constant;
    j["delta"] = op.delta;
    j["eigenvalues"] = to_json(op.eigenvalues);
    Json controls = Json::array();
    for (const CVector& b : B.coefficients) controls.push_back({{"coefficients", to_json(b)}, {"growth_exponent", B.growth_exponent}});
    j["controls"] = controls;
    return j;
}

inline ModelFile load_model_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open model file '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const Json::parse_error& e) {
        throw Error(ErrorKind::ConfigError, "model file '" + path + "' is not valid JSON: " + e.what());
    }
    return model_from_json(j);
}

// ---------------------------------------------------------------------------
// Reports.

inline Json analysis_report(const AnalysisResult& a) {
    Json j;
    j["N_lambda"] = a.split.N_lambda;
    j["m_lambda"] = a.split.m_lambda;
    j["c_A"] = a.split.c_A;
    j["lambda"] = a.split.lambda;
    j["truncation"] = a.split.truncation;
    j["truncation_exhausted"] = a.split.truncation_exhausted;
    Json clusters = Json::array();
    for (const Cluster& c : a.clusters.clusters) {
        Json members = Json::array();
        for (std::size_t n : c.members) members.push_back(n + 1);
        clusters.push_back({{"value", to_json(c.representative)}, {"members", members}});
    }
    j["clusters"] = clusters;
    Json channels = Json::array();
    if (a.partition) {
        for (std::size_t ch = 0; ch < a.partition->size(); ++ch) {
            Json low = Json::array(), tail = Json::array();
            for (std::size_t n : a.partition->low_part(ch)) low.push_back(n + 1);
            for (std::size_t n : a.partition->tail_part(ch)) tail.push_back(n + 1);
            channels.push_back({{"channel", ch + 1}, {"low", low}, {"tail", tail}});
        }
    }
    j["channels"] = channels;
    j["admissible"] = a.admissible();
    if (!a.partition_error.empty()) j["admissibility_error"] = a.partition_error;
    if (a.admissibility) {
        j["confined"] = a.admissibility->confined;
        j["leakage"] = a.admissibility->leakage;
    }
    Json ranks = Json::array();
    for (const ClusterRank& r : a.fattorini.per_cluster)
        ranks.push_back({{"value", to_json(r.representative)}, {"multiplicity", r.multiplicity}, {"rank", r.rank}});
    j["fattorini"] = {{"per_cluster_rank", ranks}, {"verdict", a.fattorini.verdict}, {"label", a.fattorini.label()}};
    j["unique"] = a.uniqueness.unique;
    j["uniqueness_statement"] = a.uniqueness.statement;
    return j;
}

inline Json verify_report(const VerifyResult& v) {
    return {{"max_residual", v.residual.max_r},
            {"residual_bound", v.residual_bound},
            {"tb_residual", v.residual.tb_residual},
            {"spectrum_distance", v.shift.max_distance},
            {"tail_regularity_warning", v.tail_regularity.any_warning},
            {"passed", v.passed}};
}

inline Json synthesis_report(const PipelineResult& p) {
    Json j;
    j["mu"] = p.result.mu;
    Json attempts = Json::array();
    for (const MuAttempt& a : p.selection.attempts) {
        Json e{{"mu", a.mu}, {"valid", a.valid}};
        if (!a.reason.empty()) e["reason"] = a.reason;
        attempts.push_back(e);
    }
    j["attempts"] = attempts;
    j["N_lambda"] = p.result.N_lambda;
    j["truncation"] = p.result.truncation;
    j["K"] = to_json(p.result.K);
    j["T_norms"] = {{"norm_T", p.verification.conditioning.norm_T},
                    {"norm_Tinv", p.verification.conditioning.norm_Tinv},
                    {"C_overshoot", p.verification.conditioning.C_overshoot},
                    {"label", p.verification.conditioning.label}};
    Json channels = Json::array();
    for (std::size_t ch = 0; ch < p.result.channels.size(); ++ch) {
        const ChannelFeq& f = p.result.channels[ch];
        channels.push_back({{"channel", ch + 1},
                            {"K_tilde", to_json(f.K_tilde)},
                            {"T_tilde", to_json(f.T_tilde)},
                            {"cond_G", f.cond_G},
                            {"c_min", p.result.tails[ch].c_min()}});
    }
    j["per_channel"] = channels;
    j["c_min"] = p.selection.solution.validity.c_min;
    j["valid"] = p.valid;
    j["verify"] = verify_report(p.verification);
    return j;
}

// ---------------------------------------------------------------------------
// Trajectories and matrices.

/// Header t,norm_H,norm_gamma,rate_running where rate_running is
/// log(norm_H(t) / norm_H(0)) / t (0 on the first row).
inline void write_trajectory_csv(std::ostream& os, const TrajectoryRecord& traj) {
    os << "t,norm_H,norm_gamma,rate_running\n";
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        double rate = 0.0;
        if (i > 0 && traj.norms_H[0] > 0.0 && traj.norms_H[i] > 0.0)
            rate = std::log(traj.norms_H[i] / traj.norms_H[0]) / traj.times[i];
        os << format_double(traj.times[i]) << ',' << format_double(traj.norms_H[i]) << ','
           << format_double(traj.norms_gamma[i]) << ',' << format_double(rate) << '\n';
    }
}

inline Json snapshots_json(const TrajectoryRecord& traj) {
    Json out = Json::array();
    for (std::size_t i = 0; i < traj.snapshots.size(); ++i)
        out.push_back({{"t", traj.times[i]}, {"coefficients", to_json(traj.snapshots[i])}});
    return out;
}

namespace detail {

inline void put_u64(std::ostream& os, std::uint64_t v) {
    for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xffu));
}

inline void put_f64(std::ostream& os, double x) {
    std::uint64_t bits = 0;
    static_assert(sizeof bits == sizeof x);
    std::memcpy(&bits, &x, sizeof x);
    put_u64(os, bits);
}

inline std::uint64_t get_u64(std::istream& is) {
    std::uint64_t v = 0;
    for (int b = 0; b < 8; ++b) {
        const int c = is.get();
        if (c == std::char_traits<char>::eof()) throw Error(ErrorKind::ConfigError, "truncated binary matrix");
        v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
    }
    return v;
}

inline double get_f64(std::istream& is) {
    const std::uint64_t bits = get_u64(is);
    double x = 0.0;
    std::memcpy(&x, &bits, sizeof x);
    return x;
}

}  // namespace detail

/// Square complex matrix: u64 little-endian M, then M*M (re, im) pairs of
/// little-endian doubles in row-major order.
inline void write_binary_matrix(std::ostream& os, const CMatrix& X) {
    if (X.rows() != X.cols()) throw Error(ErrorKind::DimensionMismatch, "binary dump expects a square matrix");
    detail::put_u64(os, static_cast<std::uint64_t>(X.rows()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index k = 0; k < X.cols(); ++k) {
            detail::put_f64(os, X(i, k).real());
            detail::put_f64(os, X(i, k).imag());
        }
}

inline CMatrix read_binary_matrix(std::istream& is) {
    const auto M = static_cast<Eigen::Index>(detail::get_u64(is));
    CMatrix X(M, M);
    for (Eigen::Index i = 0; i < M; ++i)
        for (Eigen::Index k = 0; k < M; ++k) {
            const double re = detail::get_f64(is);
            X(i, k) = Complex(re, detail::get_f64(is));
        }
    return X;
}

}  // namespace pfeq::io
