// Command-line runner for brokerage experiments.
//
//   brokerage_cli run --config exp.json [--seed N] [--out DIR] [--rounds-log]
//                     [--format csv|json] [--threads N] [--strict]
//   brokerage_cli validate --config exp.json
//   brokerage_cli report --in DIR/results.json [--strict]
//
// Exit codes: 0 ok, 1 runtime failure, 2 invalid config, 3 bound violation
// (only with --strict).

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "brokerage.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitInvalidConfig = 2;
constexpr int kExitBoundViolation = 3;

void print_check(const char* label, const nlohmann::json& c) {
    if (!c.value("applicable", false)) {
        std::printf("    %-22s n/a\n", label);
        return;
    }
    std::printf("    %-22s %s  value=%.6g budget=%.6g slack=%.6g\n", label, c["pass"].get<bool>() ? "pass" : "FAIL",
                c["value"].get<double>(), c["budget"].get<double>(), c["slack"].get<double>());
}

int print_report(const nlohmann::json& s, bool strict) {
    std::printf("policy %s on %s, T=%llu, seed %llu, config %s (library %s)\n",
                s["policy"].get<std::string>().c_str(), s["family"].get<std::string>().c_str(),
                static_cast<unsigned long long>(s["horizon"].get<std::uint64_t>()),
                static_cast<unsigned long long>(s["seed"].get<std::uint64_t>()),
                s["config_hash"].get<std::string>().c_str(), s["library_version"].get<std::string>().c_str());
    const auto& agg = s["aggregates"]["regret"];
    std::printf("regret over %zu replicates: mean %.6g  std %.6g  min %.6g  max %.6g\n", s["replicates"].size(),
                agg["mean"].get<double>(), agg["std"].get<double>(), agg["min"].get<double>(),
                agg["max"].get<double>());
    for (const auto& r : s["replicates"]) {
        std::printf("  replicate %llu (seed %llu): regret %.6g, explorations %llu\n",
                    static_cast<unsigned long long>(r["replicate"].get<std::uint64_t>()),
                    static_cast<unsigned long long>(r["seed"].get<std::uint64_t>()), r["regret"].get<double>(),
                    static_cast<unsigned long long>(r["explorations"].get<std::uint64_t>()));
        const auto& b = r["bounds"];
        print_check("full-feedback regret", b["full_feedback_regret"]);
        print_check("two-bit regret", b["two_bit_regret"]);
        print_check("exploration count", b["exploration_count"]);
        print_check("elliptical potential", b["elliptical_potential"]);
    }
    const bool ok = s["all_bounds_pass"].get<bool>();
    std::printf("bounds: %s\n", ok ? "all pass" : "VIOLATED");
    return (strict && !ok) ? kExitBoundViolation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Online brokerage experiment runner"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    bool rounds_log = false;
    std::string format = "json";
    std::optional<std::size_t> threads;
    bool strict = false;

    auto* run = app.add_subcommand("run", "Run an experiment sweep and write results");
    run->add_option("--config", config_path, "Experiment config (JSON)")->required();
    run->add_option("--seed", seed, "Override the base seed");
    run->add_option("--out", out_dir, "Output directory (overrides config.output)");
    run->add_flag("--rounds-log", rounds_log, "Write a per-round CSV for every replicate");
    run->add_option("--format", format, "Summary format")->check(CLI::IsMember({"csv", "json"}));
    run->add_option("--threads", threads, "Worker threads for replicates");
    run->add_flag("--strict", strict, "Exit with code 3 when a bound check fails");

    auto* validate_cmd = app.add_subcommand("validate", "Check a config and the instance it builds");
    validate_cmd->add_option("--config", config_path, "Experiment config (JSON)")->required();

    std::string results_path;
    auto* report = app.add_subcommand("report", "Summarize a results.json file");
    report->add_option("--in", results_path, "results.json written by run")->required();
    report->add_flag("--strict", strict, "Exit with code 3 when a bound check fails");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*report) {
            std::ifstream in(results_path);
            if (!in) throw brokerage::IoError(results_path, "cannot open results");
            nlohmann::json s;
            in >> s;
            return print_report(s, strict);
        }

        brokerage::ExperimentConfig cfg;
        try {
            cfg = brokerage::load_config(config_path);
        } catch (const brokerage::IoError& e) {
            std::fprintf(stderr, "invalid config: %s\n", e.what());
            return kExitInvalidConfig;
        }

        if (*validate_cmd) {
            const brokerage::Instance inst = brokerage::build_instance(cfg, cfg.seed);
            if (auto v = brokerage::validate(inst)) {
                std::fprintf(stderr, "invalid instance: %s at t=%zu: %s\n", v->kind.c_str(), v->round,
                             v->message.c_str());
                return kExitInvalidConfig;
            }
            auto policy = brokerage::build_policy(cfg, inst, cfg.seed);
            brokerage::resolve_feedback(*policy, cfg.feedback);
            std::printf("ok: %s instance, d=%zu, T=%zu, policy %s, config %s\n", inst.family.c_str(), inst.dim,
                        inst.horizon, policy->name().c_str(), brokerage::hex64(brokerage::config_hash(cfg)).c_str());
            return kExitOk;
        }

        if (seed) {
            cfg.seed = *seed;
            cfg.raw["seed"] = *seed;
        }
        if (out_dir) cfg.output = *out_dir;
        cfg.rounds_log = cfg.rounds_log || rounds_log;

        const brokerage::SweepResult res = brokerage::sweep(cfg, threads);
        const auto fmt = format == "csv" ? brokerage::EmitFormat::csv : brokerage::EmitFormat::json;
        for (const auto& p : brokerage::emit(cfg, res, cfg.output, fmt)) std::printf("wrote %s\n", p.string().c_str());
        std::printf("mean regret %.6g over %zu replicates; bounds %s\n", res.regret.mean, res.replicates.size(),
                    res.all_bounds_pass ? "pass" : "VIOLATED");
        return (strict && !res.all_bounds_pass) ? kExitBoundViolation : kExitOk;
    } catch (const brokerage::ConfigError& e) {
        std::fprintf(stderr, "invalid config: %s\n", e.what());
        return kExitInvalidConfig;
    } catch (const brokerage::InvalidInstance& e) {
        std::fprintf(stderr, "invalid config: %s\n", e.what());
        return kExitInvalidConfig;
    } catch (const brokerage::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitFailure;
    }
}
