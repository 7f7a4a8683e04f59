#include <algorithm>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qkd/bounds_and_report.hpp"
#include "qkd/core_types.hpp"
#include "qkd/decoy_analysis.hpp"
#include "qkd/event_simulator.hpp"
#include "qkd/io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 1;
constexpr int kExitIo = 2;
constexpr int kExitAnalysis = 3;

struct Args {
    std::string config_path;
    std::string gains_path;
    std::string out_path;
    std::string losses;
    std::string mode = "analytic-gains";
    uint64_t seed = 1;
    uint32_t workers = 1;
    bool force = false;
    std::vector<std::string> raw;
};

qkd::core::ProtocolConfig load_valid_config(const std::string& path) {
    const qkd::core::ProtocolConfig cfg = qkd::io::load_config(path);
    const auto validation = qkd::core::validate_config(cfg);
    if (!validation.ok())
        throw qkd::io::ValidationError("invalid config " + path + ":\n" + validation.to_string());
    return cfg;
}

void write_manifest(const Args& args, const std::string& command, const std::string& config_hash,
                    const std::string& started, const std::string& note) {
    qkd::io::RunManifest m;
    m.command = command;
    m.arguments = args.raw;
    m.config_hash = config_hash;
    m.seed = args.seed;
    m.workers = args.workers;
    m.started_utc = started;
    m.finished_utc = qkd::io::iso8601_utc_now();
    m.note = note;
    qkd::io::write_file_atomic(args.out_path + ".manifest.json", qkd::io::manifest_to_json(m));
}

int cmd_simulate(const Args& args) {
    const std::string started = qkd::io::iso8601_utc_now();
    const qkd::core::ProtocolConfig cfg = load_valid_config(args.config_path);
    const std::string config_hash = qkd::io::file_hash(args.config_path);

    qkd::sim::SimOptions options;
    options.workers = args.workers;
    const qkd::core::TallyTable tally =
        qkd::sim::run_simulation(cfg, args.seed, cfg.pulse_pair_budget, options);

    qkd::io::write_file_atomic(args.out_path, qkd::io::tally_to_csv(tally, config_hash));
    write_manifest(args, "simulate", config_hash, started, "");
    return kExitOk;
}

int cmd_analyze(const Args& args) {
    const std::string started = qkd::io::iso8601_utc_now();
    const qkd::core::ProtocolConfig cfg = load_valid_config(args.config_path);
    const std::string config_hash = qkd::io::file_hash(args.config_path);

    const qkd::io::LoadedGains loaded = qkd::io::load_gains(args.gains_path);
    if (!loaded.config_hash.empty() && loaded.config_hash != config_hash && !args.force)
        throw qkd::io::ValidationError("config hash mismatch: gains were produced with config " +
                                       loaded.config_hash + ", got " + config_hash +
                                       " (pass --force to analyze anyway)");

    const qkd::decoy::DecoyResult result = qkd::decoy::analyze(loaded.gains, cfg);
    qkd::io::write_file_atomic(args.out_path, qkd::io::result_to_json(result, config_hash));
    write_manifest(args, "analyze", config_hash, started, "");
    if (result.infeasible) {
        std::fprintf(stderr, "analysis infeasible: yield constraint system has no solution\n");
        return kExitAnalysis;
    }
    std::printf("y11_lower %.6g  e11ph_upper %.6g  rate %.6g /pulse  %.6g bps\n", result.y11_lower,
                result.e11ph_upper, result.key_rate_per_pulse, result.key_rate_bps);
    return kExitOk;
}

int cmd_sweep(const Args& args) {
    const std::string started = qkd::io::iso8601_utc_now();
    const qkd::core::ProtocolConfig cfg = load_valid_config(args.config_path);
    const std::string config_hash = qkd::io::file_hash(args.config_path);

    std::vector<double> losses;
    std::string token;
    std::istringstream in(args.losses);
    while (std::getline(in, token, ',')) {
        if (token.empty()) continue;
        try {
            size_t pos = 0;
            const double v = std::stod(token, &pos);
            if (pos != token.size()) throw std::invalid_argument(token);
            losses.push_back(v);
        } catch (const std::exception&) {
            throw qkd::io::ValidationError("malformed loss value \"" + token + "\"");
        }
    }
    if (losses.empty()) throw qkd::io::ValidationError("no losses given");
    std::vector<double> unique;
    for (double v : losses) {
        if (std::find(unique.begin(), unique.end(), v) != unique.end())
            std::fprintf(stderr, "warning: duplicate loss %g dB dropped\n", v);
        else
            unique.push_back(v);
    }

    const qkd::report::SweepMode mode = qkd::report::sweep_mode_from_string(args.mode);
    const std::vector<qkd::report::SweepRow> rows =
        qkd::report::sweep_rate_vs_loss(cfg, unique, mode, args.seed, args.workers);

    qkd::io::write_file_atomic(args.out_path, qkd::io::sweep_to_csv(rows));
    write_manifest(args, "sweep", config_hash, started,
                   qkd::report::kParameterInterpolationNote);

    std::vector<qkd::report::RateCurvePoint> points;
    for (const auto& r : rows)
        points.push_back({r.loss_db, r.eta, r.rate_per_pulse, r.rate_bps, "simulated"});
    std::fputs(
        qkd::report::comparison_table(points, qkd::report::builtin_comparison_rows()).c_str(),
        stdout);
    return kExitOk;
}

int cmd_validate(const Args& args) {
    const qkd::core::ProtocolConfig cfg = qkd::io::load_config(args.config_path);
    const auto validation = qkd::core::validate_config(cfg);
    if (!validation.ok()) {
        std::fputs(validation.to_string().c_str(), stderr);
        return kExitValidation;
    }
    std::printf("ok: per-arm loss %.3f dB, effective clock %.4g MHz, vacuum probability %.4g\n",
                cfg.per_arm_loss_db(), cfg.effective_clock_hz() / 1e6, cfg.vacuum_prob());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"time-bin MDI-QKD desk simulator and decoy-state analyzer"};
    app.require_subcommand(1);

    Args args;
    for (int i = 1; i < argc; ++i) args.raw.emplace_back(argv[i]);

    CLI::App* simulate = app.add_subcommand("simulate", "run the Monte Carlo, write a tally file");
    simulate->add_option("--config", args.config_path, "protocol config (JSON)")->required();
    simulate->add_option("--seed", args.seed, "run seed (default 1)");
    simulate->add_option("--workers", args.workers, "batch partition count (default 1)");
    simulate->add_option("--out", args.out_path, "output tally CSV")->required();

    CLI::App* analyze = app.add_subcommand("analyze", "decoy analysis of a tally or gains file");
    analyze->add_option("gains", args.gains_path, "tally CSV or aggregated gains CSV")->required();
    analyze->add_option("--config", args.config_path, "protocol config (JSON)")->required();
    analyze->add_option("--out", args.out_path, "output result JSON")->required();
    analyze->add_flag("--force", args.force, "analyze despite a config-hash mismatch");

    CLI::App* sweep = app.add_subcommand("sweep", "rate vs loss with reference bounds");
    sweep->add_option("--config", args.config_path, "template config (JSON)")->required();
    sweep->add_option("--losses", args.losses, "comma-separated total losses in dB")->required();
    sweep->add_option("--mode", args.mode, "analytic-gains (default) or full-simulation");
    sweep->add_option("--seed", args.seed, "run seed for full-simulation mode");
    sweep->add_option("--workers", args.workers, "batch partition count");
    sweep->add_option("--out", args.out_path, "output sweep CSV")->required();

    CLI::App* validate = app.add_subcommand("validate", "check a config against all invariants");
    validate->add_option("--config", args.config_path, "protocol config (JSON)")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitValidation;
    }

    try {
        if (simulate->parsed()) return cmd_simulate(args);
        if (analyze->parsed()) return cmd_analyze(args);
        if (sweep->parsed()) return cmd_sweep(args);
        return cmd_validate(args);
    } catch (const qkd::io::IoError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    } catch (const qkd::io::ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const qkd::decoy::AnalysisError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitAnalysis;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitValidation;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitIo;
    }
}
