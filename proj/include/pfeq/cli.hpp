#pragma once

// Command surface: analyze, synthesize, verify, simulate, sweep-mu and
// reproduce ks-example.
//
// Settings precedence: built-in defaults, then the JSON document given by
// --config, then command-line flags. Reports go to stdout; when the
// PFEQ_REPORT_DIR environment variable is set they are also written there.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "pfeq/io.hpp"
#include "pfeq/models.hpp"
#include "pfeq/pipeline.hpp"
#include "pfeq/simulation.hpp"
#include "pfeq/sweep.hpp"

namespace pfeq::cli {

enum ExitCode : int {
    kOk = 0,
    kConfigError = 2,
    kInadmissible = 3,
    kNoValidMu = 4,
    kVerificationFailure = 5,
};

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::NoAdmissibleMatching: return kInadmissible;
        case ErrorKind::NoValidMuFound: return kNoValidMu;
        case ErrorKind::UnstableBlowup: return kVerificationFailure;
        default: return kConfigError;
    }
}

struct Settings {
    std::string model = "ks-torus";
    std::string model_file;
    std::map<std::string, double> params;
    std::size_t truncation = 64;
    double lambda = 20.0;
    std::optional<double> mu;
    std::uint64_t seed = 0;
    std::size_t attempts = 5;

    std::string report;  // verify: synthesis report to check

    double dt = 1e-3;
    double t_final = 1.0;
    std::size_t record_every = 1;
    double burn_fraction = 0.1;
    std::string nonlinearity = "none";
    std::string feedback = "synthesized";  // synthesized | none | mean
    double amplitude = 1e-2;
    bool snapshots = false;

    std::size_t samples = 200;
    std::optional<double> mu_min;
    std::optional<double> mu_max;
    std::size_t workers = 0;
    bool sweep_simulate = true;

    std::string out;
};

/// Applies a config document onto `s`; unknown keys and type errors name the key.
inline void apply_config(Settings& s, const io::Json& j) {
    if (!j.is_object()) throw Error(ErrorKind::ConfigError, "config must be a JSON object");
    auto num = [&](const std::string& key) { return io::detail::read_number(j.at(key), key); };
    auto count = [&](const std::string& key) {
        const double v = num(key);
        if (v < 0 || std::floor(v) != v) io::detail::bad(key, "expected a non-negative integer");
        return static_cast<std::size_t>(v);
    };
    auto str = [&](const std::string& key) {
        if (!j.at(key).is_string()) io::detail::bad(key, "expected a string");
        return j.at(key).get<std::string>();
    };
    auto flag = [&](const std::string& key) {
        if (!j.at(key).is_boolean()) io::detail::bad(key, "expected a boolean");
        return j.at(key).get<bool>();
    };
    for (const auto& [key, value] : j.items()) {
        if (key == "model") s.model = str(key);
        else if (key == "model_file") s.model_file = str(key);
        else if (key == "params") {
            if (!value.is_object()) io::detail::bad(key, "expected an object");
            for (const auto& [p, v] : value.items()) s.params[p] = io::detail::read_number(v, "params." + p);
        }
        else if (key == "truncation") s.truncation = count(key);
        else if (key == "lambda") s.lambda = num(key);
        else if (key == "mu") s.mu = num(key);
        else if (key == "seed") s.seed = count(key);
        else if (key == "attempts") s.attempts = count(key);
        else if (key == "report") s.report = str(key);
        else if (key == "dt") s.dt = num(key);
        else if (key == "t_final") s.t_final = num(key);
        else if (key == "record_every") s.record_every = count(key);
        else if (key == "burn_fraction") s.burn_fraction = num(key);
        else if (key == "nonlinearity") s.nonlinearity = str(key);
        else if (key == "feedback") s.feedback = str(key);
        else if (key == "amplitude") s.amplitude = num(key);
        else if (key == "snapshots") s.snapshots = flag(key);
        else if (key == "samples") s.samples = count(key);
        else if (key == "mu_min") s.mu_min = num(key);
        else if (key == "mu_max") s.mu_max = num(key);
        else if (key == "workers") s.workers = count(key);
        else if (key == "sweep_simulate") s.sweep_simulate = flag(key);
        else if (key == "out") s.out = str(key);
        else io::detail::bad(key, "unknown configuration key");
    }
}

inline Model build_model(const Settings& s) {
    if (!s.model_file.empty()) {
        io::ModelFile f = io::load_model_file(s.model_file);
        return {std::move(f.op), std::move(f.B)};
    }
    ModelDescriptor d;
    d.name = model_from_string(s.model);
    d.params = s.params;
    d.truncation = s.truncation;
    return builtin_model(d);
}

inline double default_mu(const Settings& s, const SpectralOperator& op) {
    return s.mu ? *s.mu : 1.2 * (s.lambda + op.c_A());
}

struct Output {
    std::ostream& out;
    std::ostream& err;

    /// Writes `content` to the --out path if given, else to PFEQ_REPORT_DIR/name when set.
    void artifact(const Settings& s, const std::string& name, const std::string& content, bool primary = true) const {
        std::filesystem::path path;
        if (primary && !s.out.empty()) {
            path = s.out;
        } else if (const char* dir = std::getenv("PFEQ_REPORT_DIR"); dir && *dir) {
            std::filesystem::create_directories(dir);
            path = std::filesystem::path(dir) / name;
        } else {
            return;
        }
        std::ofstream f(path, std::ios::binary);
        if (!f) throw Error(ErrorKind::ConfigError, "cannot write '" + path.string() + "'");
        f << content;
    }
};

inline int cmd_analyze(const Settings& s, const Output& o) {
    const Model m = build_model(s);
    const AnalysisResult a = analyze(m.op, m.B, s.lambda);
    const std::string text = io::analysis_report(a).dump(2) + "\n";
    o.out << text;
    o.artifact(s, "analysis.json", text);
    return kOk;
}

inline int cmd_synthesize(const Settings& s, const Output& o) {
    const Model m = build_model(s);
    PipelineOptions opts;
    opts.seed = s.seed;
    opts.mu_attempts = s.attempts;
    const PipelineResult p = synthesize(m.op, m.B, s.lambda, default_mu(s, m.op), opts);
    const std::string text = io::synthesis_report(p).dump(2) + "\n";
    o.out << text;
    o.artifact(s, "synthesis.json", text);
    std::ostringstream bin;
    io::write_binary_matrix(bin, p.result.T);
    o.artifact(s, "T.bin", bin.str(), false);
    if (!p.valid) {
        o.err << "verification failed: max residual " << p.verification.residual.max_r << ", TB residual "
              << p.verification.residual.tb_residual << "\n";
        return kVerificationFailure;
    }
    return kOk;
}

/// Re-derives T at the reported mu and checks it against the reported K.
inline int cmd_verify(const Settings& s, const Output& o) {
    if (s.report.empty()) throw Error(ErrorKind::ConfigError, "verify needs --report <synthesis.json>");
    std::ifstream in(s.report);
    if (!in) throw Error(ErrorKind::ConfigError, "cannot open report '" + s.report + "'");
    io::Json rep;
    try {
        rep = io::Json::parse(in);
    } catch (const io::Json::parse_error& e) {
        throw Error(ErrorKind::ConfigError, std::string("report is not valid JSON: ") + e.what());
    }
    const double mu = io::detail::read_number(io::detail::require(rep, "mu", ""), "mu");
    const CMatrix K = io::matrix_from_json(io::detail::require(rep, "K", ""), "K");

    const Model m = build_model(s);
    const AnalysisResult a = analyze(m.op, m.B, s.lambda);
    if (!a.partition) throw Error(ErrorKind::NoAdmissibleMatching, a.partition_error);
    if (K.rows() != static_cast<Eigen::Index>(a.partition->size()) ||
        K.cols() != static_cast<Eigen::Index>(a.split.N_lambda))
        throw Error(ErrorKind::ConfigError, "key 'K': shape does not match the model at this lambda");
    const ChannelSolution sol = solve_channels(m.op, m.B, a.split, *a.partition, mu);
    SynthesisResult result = assemble(*a.partition, sol.feqs, sol.tails, m.op, a.split);
    result.mu = mu;
    result.K = K;
    const VerifyResult v = verify(result, m.op, m.B, a.split);
    io::Json j = io::verify_report(v);
    j["mu_valid"] = sol.validity.valid;
    const std::string text = j.dump(2) + "\n";
    o.out << text;
    o.artifact(s, "verify.json", text);
    return v.passed && sol.validity.valid ? kOk : kVerificationFailure;
}

inline int cmd_simulate(const Settings& s, const Output& o) {
    const Model m = build_model(s);
    CMatrix K;
    io::Json summary;
    if (s.feedback == "synthesized") {
        PipelineOptions opts;
        opts.seed = s.seed;
        opts.mu_attempts = s.attempts;
        const PipelineResult p = synthesize(m.op, m.B, s.lambda, default_mu(s, m.op), opts);
        K = p.result.K;
        summary["mu"] = p.result.mu;
        summary["C_overshoot"] = p.verification.conditioning.C_overshoot;
    } else if (s.feedback == "mean") {
        if (m.op.basis != Basis::torus_exponential)
            throw Error(ErrorKind::ConfigError, "key 'feedback': mean feedback needs a torus model");
        K = CMatrix::Zero(1, 1);
        K(0, 0) = -s.lambda * std::sqrt(2.0 * kPi);
    } else if (s.feedback == "none") {
        K = CMatrix::Zero(1, 1);
    } else {
        throw Error(ErrorKind::ConfigError, "key 'feedback': expected synthesized, none or mean");
    }

    SimConfig cfg;
    cfg.dt = s.dt;
    cfg.t_final = s.t_final;
    cfg.record_every = s.record_every;
    cfg.burn_fraction = s.burn_fraction;
    cfg.keep_snapshots = s.snapshots;
    cfg.lambda_ref = s.lambda;
    if (s.nonlinearity == "none") cfg.nonlinearity = Nonlinearity::none;
    else if (s.nonlinearity == "torus_burgers") cfg.nonlinearity = Nonlinearity::torus_burgers;
    else throw Error(ErrorKind::ConfigError, "key 'nonlinearity': expected none or torus_burgers");
    cfg.initial = random_initial_state(m.op, s.amplitude, s.seed);

    const TrajectoryRecord traj = cfg.nonlinearity == Nonlinearity::none ? simulate_linear(m.op, m.B, K, cfg)
                                                                         : simulate_nonlinear(m.op, m.B, K, cfg);
    std::ostringstream csv;
    io::write_trajectory_csv(csv, traj);
    o.artifact(s, "trajectory.csv", csv.str());
    if (s.snapshots) o.artifact(s, "snapshots.json", io::snapshots_json(traj).dump() + "\n", false);

    summary["samples"] = traj.times.size();
    summary["fit_ok"] = traj.fit_ok;
    if (traj.fit_ok) {
        summary["fitted_rate"] = traj.fitted_rate;
        summary["overshoot"] = traj.overshoot;
    }
    summary["final_norm"] = traj.norms_H.back();
    summary["warnings"] = traj.warnings;
    const std::string text = summary.dump(2) + "\n";
    o.out << text;
    o.artifact(s, "simulate.json", text, false);
    return kOk;
}

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream os;
    os << "mu,valid,c_min,C_overshoot,fitted_rate\n";
    for (const SweepRow& r : rows)
        os << io::format_double(r.mu) << ',' << (r.valid ? 1 : 0) << ',' << io::format_double(r.c_min) << ','
           << io::format_double(r.C_overshoot) << ',' << io::format_double(r.fitted_rate) << '\n';
    return os.str();
}

inline int cmd_sweep(const Settings& s, const Output& o) {
    const Model m = build_model(s);
    const AnalysisResult a = analyze(m.op, m.B, s.lambda);
    if (!a.partition) throw Error(ErrorKind::NoAdmissibleMatching, a.partition_error);
    if (!a.admissible()) throw Error(ErrorKind::NoAdmissibleMatching, "control operator is not admissible");
    const double lo = s.mu_min.value_or(s.lambda + a.split.c_A);
    const double hi = s.mu_max.value_or(lo + 100.0);
    if (!(hi >= lo)) throw Error(ErrorKind::ConfigError, "key 'mu_max': must not be below mu_min");
    if (lo < s.lambda + a.split.c_A) throw Error(ErrorKind::MuBelowFloor, "mu_min below lambda + c_A");
    SweepOptions opts;
    opts.workers = s.workers;
    opts.simulate = s.sweep_simulate;
    opts.seed = s.seed;
    const auto rows = sweep_mu(m.op, m.B, a.split, *a.partition, uniform_mu_samples(lo, hi, s.samples, s.seed), opts);
    const std::string text = sweep_csv(rows);
    o.out << text;
    o.artifact(s, "sweep_mu.csv", text);
    return kOk;
}

struct KsReproduction {
    double max_deviation = 0.0;
    bool pass = false;
    std::vector<std::string> lines;
};

/// Compares the synthesized KS channel blocks against the closed forms
/// K~ = (-mu; -mu(mu+12)/12, mu(mu-12)/12) and
/// T~ = (mu/12+1, -mu/12; mu/12, 1-mu/12) at mu in {24, 36, 100}.
inline KsReproduction reproduce_ks_example(double tolerance = 1e-9) {
    KsReproduction r;
    const Model m = ks_torus_model(32);
    const FrequencySplit split = frequency_split(m.op, 20.0);
    const ClusterSet clusters = cluster_eigenvalues(m.op, 1e-9);
    const ChannelPartition partition = partition_channels(split, clusters, m.B);
    for (double mu : {24.0, 36.0, 100.0}) {
        const ChannelSolution sol = solve_channels(m.op, m.B, split, partition, mu);
        double dev = std::abs(sol.feqs[0].K_tilde[0] + mu) + std::abs(sol.feqs[0].T_tilde(0, 0) - 1.0);
        const double k1 = -mu * (mu + 12.0) / 12.0, k2 = mu * (mu - 12.0) / 12.0;
        CMatrix T(2, 2);
        T << mu / 12.0 + 1.0, -mu / 12.0, mu / 12.0, 1.0 - mu / 12.0;
        for (std::size_t ch : {1u, 2u}) {
            const ChannelFeq& f = sol.feqs[ch];
            dev = std::max(dev, std::abs(f.K_tilde[0] - k1));
            dev = std::max(dev, std::abs(f.K_tilde[1] - k2));
            dev = std::max(dev, (f.T_tilde - T).cwiseAbs().maxCoeff());
        }
        r.max_deviation = std::max(r.max_deviation, dev);
        r.lines.push_back("mu = " + io::format_double(mu) + ": max entry deviation " + io::format_double(dev) +
                          (sol.validity.valid ? "" : " (mu rejected by validation)"));
    }
    r.pass = r.max_deviation <= tolerance;
    return r;
}

inline int cmd_reproduce(const std::string& which, const Output& o) {
    if (which != "ks-example") throw Error(ErrorKind::ConfigError, "unknown reproduction '" + which + "'");
    const KsReproduction r = reproduce_ks_example();
    for (const auto& line : r.lines) o.out << line << "\n";
    o.out << (r.pass ? "PASS" : "FAIL") << " max entry deviation " << io::format_double(r.max_deviation) << "\n";
    return r.pass ? kOk : kVerificationFailure;
}

/// Parses argv and runs one command; never throws.
inline int run_command(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    const Output o{out, err};
    Settings s;
    CLI::App app{"Parabolic F-equivalence feedback synthesis"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> params;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON configuration document");
        sub->add_option("--model", s.model, "ks-torus | ks-interval-coronlu | heat-torus | heat-interval-neumann | custom");
        sub->add_option("--model-file", s.model_file, "JSON model file (custom spectra)");
        sub->add_option("--param", params, "model parameter name=value (nu, p, fprime0)");
        sub->add_option("--truncation", s.truncation, "number of retained modes M");
        sub->add_option("--lambda", s.lambda, "target decay rate");
        sub->add_option("--out", s.out, "output path for the primary artifact");
    };
    auto synth_opts = [&](CLI::App* sub) {
        sub->add_option("--mu", s.mu, "initial shift mu (default 1.2 (lambda + c_A))");
        sub->add_option("--seed", s.seed, "seed for mu jitter and random data");
        sub->add_option("--attempts", s.attempts, "mu candidates to try");
    };

    CLI::App* analyze_cmd = app.add_subcommand("analyze", "frequency split, channels, admissibility, uniqueness");
    common(analyze_cmd);
    CLI::App* synth_cmd = app.add_subcommand("synthesize", "build (T, K) and verify it");
    common(synth_cmd);
    synth_opts(synth_cmd);
    CLI::App* verify_cmd = app.add_subcommand("verify", "check a synthesis report against the model");
    common(verify_cmd);
    verify_cmd->add_option("--report", s.report, "synthesis report JSON");
    CLI::App* sim_cmd = app.add_subcommand("simulate", "closed-loop trajectory and decay fit");
    common(sim_cmd);
    synth_opts(sim_cmd);
    sim_cmd->add_option("--dt", s.dt);
    sim_cmd->add_option("--t-final", s.t_final);
    sim_cmd->add_option("--record-every", s.record_every);
    sim_cmd->add_option("--burn-fraction", s.burn_fraction);
    sim_cmd->add_option("--nonlinearity", s.nonlinearity, "none | torus_burgers");
    sim_cmd->add_option("--feedback", s.feedback, "synthesized | none | mean");
    sim_cmd->add_option("--amplitude", s.amplitude, "H-norm of the random initial state");
    sim_cmd->add_flag("--snapshots", s.snapshots, "write coefficient snapshots");
    CLI::App* sweep_cmd = app.add_subcommand("sweep-mu", "validate a grid of random mu values");
    common(sweep_cmd);
    synth_opts(sweep_cmd);
    sweep_cmd->add_option("--samples", s.samples);
    sweep_cmd->add_option("--mu-min", s.mu_min);
    sweep_cmd->add_option("--mu-max", s.mu_max);
    sweep_cmd->add_option("--workers", s.workers, "worker threads (0: all cores)");
    sweep_cmd->add_option("--sweep-simulate", s.sweep_simulate, "simulate each valid mu (true/false)");
    CLI::App* repro_cmd = app.add_subcommand("reproduce", "golden comparison against closed forms");
    std::string which;
    repro_cmd->add_option("which", which, "ks-example")->required();

    // Flags override config keys: load the config first, then parse again.
    for (int i = 1; i + 1 < argc; ++i)
        if (std::string(argv[i]) == "--config") config_path = argv[i + 1];
    try {
        if (!config_path.empty()) {
            std::ifstream in(config_path);
            if (!in) throw Error(ErrorKind::ConfigError, "cannot open config '" + config_path + "'");
            io::Json j;
            try {
                j = io::Json::parse(in);
            } catch (const io::Json::parse_error& e) {
                throw Error(ErrorKind::ConfigError, std::string("config is not valid JSON: ") + e.what());
            }
            apply_config(s, j);
        }
        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e, out, err);
            return code == 0 ? kOk : kConfigError;
        }
        for (const std::string& p : params) {
            const auto eq = p.find('=');
            if (eq == std::string::npos) throw Error(ErrorKind::ConfigError, "--param expects name=value, got '" + p + "'");
            try {
                s.params[p.substr(0, eq)] = std::stod(p.substr(eq + 1));
            } catch (const std::exception&) {
                throw Error(ErrorKind::ConfigError, "key 'params." + p.substr(0, eq) + "': not a number");
            }
        }

        if (analyze_cmd->parsed()) return cmd_analyze(s, o);
        if (synth_cmd->parsed()) return cmd_synthesize(s, o);
        if (verify_cmd->parsed()) return cmd_verify(s, o);
        if (sim_cmd->parsed()) return cmd_simulate(s, o);
        if (sweep_cmd->parsed()) return cmd_sweep(s, o);
        if (repro_cmd->parsed()) return cmd_reproduce(which, o);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kConfigError;
    }
    return kConfigError;
}

}  // namespace pfeq::cli
