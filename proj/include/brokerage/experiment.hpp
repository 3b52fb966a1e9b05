#pragma once

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "brokerage/environments.hpp"
#include "brokerage/errors.hpp"
#include "brokerage/harness.hpp"
#include "brokerage/policies.hpp"
#include "brokerage/random.hpp"
#include "brokerage/version.hpp"

namespace brokerage {

inline constexpr int kSchemaVersion = 1;

struct InstanceSpec {
    std::string family = "random_linear";
    std::size_t d = 1;
    double L = 2.0;
    std::optional<double> margin;  // random_linear; defaults to 1/(2L)
    NoiseShape noise = NoiseShape::uniform;
    std::vector<double> eps;       // appendix_a
    std::vector<int> sigma;        // appendix_b
    double mixture_eps = 0.05;     // appendix_c
};

struct PolicySpec {
    std::string name = "full_ridge";
    double price = 0.5;               // constant
    std::optional<double> density_bound;  // scouting override
};

struct ExperimentConfig {
    InstanceSpec instance;
    PolicySpec policy;
    std::size_t horizon = 0;
    std::size_t replicates = 1;
    std::uint64_t seed = 0;
    FeedbackKind feedback = FeedbackKind::full;
    std::string output = "out";
    std::size_t threads = 1;
    bool instance_per_replicate = false;
    bool rounds_log = false;
    nlohmann::json raw = nlohmann::json::object();
};

namespace detail {

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
    }
}

template <typename T>
T require(const nlohmann::json& j, const char* key) {
    if (!j.contains(key)) throw ConfigError(std::string("config: missing '") + key + "'");
    return get_or<T>(j, key, T{});
}

inline FeedbackKind parse_feedback(const std::string& s) {
    if (s == "full") return FeedbackKind::full;
    if (s == "two_bit") return FeedbackKind::two_bit;
    throw ConfigError("config: feedback must be 'full' or 'two_bit', got '" + s + "'");
}

inline bool is_known_policy(const std::string& name) {
    return name == "full_ridge" || name == "scouting_ridge" || name == "oracle" || name == "constant" ||
           name == "uniform_random";
}

}  // namespace detail

/// Parses and checks a config document. Structural problems and parameter
/// range violations surface as ConfigError.
inline ExperimentConfig parse_config(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    const int version = detail::get_or<int>(j, "schema_version", kSchemaVersion);
    if (version != kSchemaVersion) {
        throw ConfigError("config: unsupported schema_version " + std::to_string(version));
    }

    ExperimentConfig cfg;
    cfg.raw = j;
    cfg.horizon = detail::require<std::size_t>(j, "horizon");
    if (cfg.horizon == 0) throw ConfigError("config: horizon must be positive");
    cfg.replicates = detail::get_or<std::size_t>(j, "replicates", 1);
    if (cfg.replicates == 0) throw ConfigError("config: replicates must be >= 1");
    cfg.seed = detail::get_or<std::uint64_t>(j, "seed", 0);
    cfg.feedback = detail::parse_feedback(detail::get_or<std::string>(j, "feedback", "full"));
    cfg.output = detail::get_or<std::string>(j, "output", "out");
    cfg.threads = std::max<std::size_t>(1, detail::get_or<std::size_t>(j, "threads", 1));
    cfg.instance_per_replicate = detail::get_or<bool>(j, "instance_per_replicate", false);
    cfg.rounds_log = detail::get_or<bool>(j, "rounds_log", false);

    if (!j.contains("instance") || !j["instance"].is_object()) throw ConfigError("config: missing 'instance' object");
    const auto& ji = j["instance"];
    InstanceSpec& is = cfg.instance;
    is.family = detail::require<std::string>(ji, "family");
    is.d = detail::get_or<std::size_t>(ji, "d", 1);
    if (is.d == 0) throw ConfigError("config: instance.d must be positive");
    is.L = detail::get_or<double>(ji, "L", 2.0);
    if (ji.contains("margin")) is.margin = detail::get_or<double>(ji, "margin", 0.0);
    const std::string noise = detail::get_or<std::string>(ji, "noise", "uniform");
    if (noise == "uniform") {
        is.noise = NoiseShape::uniform;
    } else if (noise == "random_radius") {
        is.noise = NoiseShape::random_radius;
    } else {
        throw ConfigError("config: unknown noise shape '" + noise + "'");
    }
    if (is.family == "random_linear") {
        // defaults resolved at build time
    } else if (is.family == "appendix_a") {
        is.eps = detail::get_or<std::vector<double>>(ji, "eps", std::vector<double>(is.d, 0.0));
    } else if (is.family == "appendix_b") {
        is.sigma = detail::get_or<std::vector<int>>(ji, "sigma", std::vector<int>(is.d, 1));
    } else if (is.family == "appendix_c") {
        is.mixture_eps = detail::get_or<double>(ji, "eps", 0.05);
    } else {
        throw ConfigError("config: unknown instance family '" + is.family + "'");
    }

    if (!j.contains("policy") || !j["policy"].is_object()) throw ConfigError("config: missing 'policy' object");
    const auto& jp = j["policy"];
    cfg.policy.name = detail::require<std::string>(jp, "name");
    if (!detail::is_known_policy(cfg.policy.name)) {
        throw ConfigError("config: unknown policy '" + cfg.policy.name + "'");
    }
    cfg.policy.price = detail::get_or<double>(jp, "price", 0.5);
    if (jp.contains("L")) cfg.policy.density_bound = detail::get_or<double>(jp, "L", 1.0);

    if (cfg.policy.name == "full_ridge" && cfg.feedback != FeedbackKind::full) {
        throw ConfigError("config: full_ridge requires full feedback");
    }
    if (cfg.policy.name == "scouting_ridge" && cfg.feedback != FeedbackKind::two_bit) {
        throw ConfigError("config: scouting_ridge requires two_bit feedback");
    }
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError(path, "cannot open config");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j);
}

// Stable 64-bit identity of a config, excluding seed and run-location keys.
inline std::uint64_t config_hash(const ExperimentConfig& cfg) {
    nlohmann::json j = cfg.raw;
    for (const char* key : {"seed", "output", "threads", "rounds_log"}) j.erase(key);
    const std::string s = j.dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char ch : s) {
        h ^= ch;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

/// Builds the configured instance. Random families draw from the instance
/// stream of `seed`; parameter violations become ConfigError.
inline Instance build_instance(const ExperimentConfig& cfg, std::uint64_t seed) {
    const InstanceSpec& is = cfg.instance;
    Rng rng(derive_seed(seed, Stream::instance));
    try {
        if (is.family == "random_linear") {
            const double margin = is.margin.value_or(1.0 / (2.0 * is.L));
            return random_linear_instance(is.d, cfg.horizon, is.L, margin, rng, is.noise);
        }
        if (is.family == "appendix_a") return appendix_a_instance(is.d, cfg.horizon, is.L, is.eps);
        if (is.family == "appendix_b") return appendix_b_instance(is.d, cfg.horizon, is.L, is.sigma);
        if (is.family == "appendix_c") return appendix_c_instance(is.d, cfg.horizon, is.mixture_eps, rng).first;
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("instance: ") + e.what());
    }
    throw ConfigError("config: unknown instance family '" + is.family + "'");
}

inline double policy_density_bound(const ExperimentConfig& cfg, const Instance& inst) {
    if (cfg.policy.density_bound) return *cfg.policy.density_bound;
    if (!inst.bounded()) throw ConfigError("scouting_ridge on an unbounded instance needs policy.L");
    return inst.declared_bound;
}

inline std::unique_ptr<Policy> build_policy(const ExperimentConfig& cfg, const Instance& inst, std::uint64_t seed) {
    const std::uint64_t pseed = derive_seed(seed, Stream::policy);
    const std::string& name = cfg.policy.name;
    try {
        if (name == "full_ridge") return full_ridge_policy(inst.dim);
        if (name == "scouting_ridge") {
            return scouting_ridge_policy(make_scouting_config(inst.horizon, policy_density_bound(cfg, inst), inst.dim),
                                         pseed);
        }
        if (name == "oracle") return oracle_policy(inst.phi);
        if (name == "constant") return constant_price_policy(cfg.policy.price);
        if (name == "uniform_random") return uniform_random_policy(pseed);
    } catch (const InvalidParameter& e) {
        throw ConfigError(std::string("policy: ") + e.what());
    }
    throw ConfigError("config: unknown policy '" + name + "'");
}

struct ReplicateResult {
    std::size_t index = 0;
    RunResult run;
    BoundReport bounds;
};

struct SweepResult {
    std::vector<ReplicateResult> replicates;
    Aggregate regret;
    Aggregate explorations;
    bool all_bounds_pass = true;
};

/// Runs `cfg.replicates` episodes with seeds seed + i on up to `threads`
/// workers. Results are ordered by replicate index and do not depend on the
/// thread count.
inline SweepResult sweep(const ExperimentConfig& cfg, std::optional<std::size_t> threads = std::nullopt) {
    const std::size_t n = cfg.replicates;
    if (n == 0) throw ConfigError("sweep: replicates must be >= 1");

    std::shared_ptr<const Instance> shared;
    if (!cfg.instance_per_replicate) {
        shared = std::make_shared<const Instance>(build_instance(cfg, cfg.seed));
        require_valid(*shared);
    }

    std::vector<std::optional<ReplicateResult>> slots(n);
    std::vector<std::exception_ptr> errors(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const std::uint64_t seed = cfg.seed + i;
            try {
                std::shared_ptr<const Instance> inst = shared;
                if (!inst) inst = std::make_shared<const Instance>(build_instance(cfg, seed));
                auto policy = build_policy(cfg, *inst, seed);
                RunOptions opts;
                opts.feedback = cfg.feedback;
                opts.keep_rounds = cfg.rounds_log;
                RunResult run = run_episode(*inst, *policy, seed, opts);
                std::optional<double> pb;
                if (cfg.policy.name == "scouting_ridge") pb = policy_density_bound(cfg, *inst);
                BoundReport br = bound_report(run, *inst, pb);
                slots[i] = ReplicateResult{i, std::move(run), br};
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };

    const std::size_t nthreads = std::min(n, std::max<std::size_t>(1, threads.value_or(cfg.threads)));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (std::size_t k = 0; k < nthreads; ++k) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (!errors[i]) continue;
        const std::string seed = std::to_string(cfg.seed + i);
        try {
            std::rethrow_exception(errors[i]);
        } catch (const ConfigError& e) {
            throw ConfigError("replicate " + std::to_string(i) + " (seed " + seed + "): " + e.what());
        } catch (const std::exception& e) {
            throw Error("replicate " + std::to_string(i) + " (seed " + seed + "): " + e.what());
        }
    }

    SweepResult out;
    out.replicates.reserve(n);
    std::vector<double> regrets;
    std::vector<double> explorations;
    for (auto& slot : slots) {
        regrets.push_back(slot->run.cumulative_regret);
        explorations.push_back(static_cast<double>(slot->run.explorations));
        out.all_bounds_pass = out.all_bounds_pass && slot->bounds.all_pass();
        out.replicates.push_back(std::move(*slot));
    }
    out.regret = aggregate(regrets);
    out.explorations = aggregate(explorations);
    return out;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string format_real(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

inline constexpr const char* kRoundsCsvHeader = "t,explored,price,regret_increment,cum_regret,realized_gft";

inline std::string rounds_csv(const RunResult& run) {
    if (run.horizon == 0) throw InvalidParameter("emit: empty run");
    if (run.rounds.size() != run.horizon) throw InvalidParameter("emit: run was recorded without a round log");
    std::string out;
    out.reserve(run.rounds.size() * 96);
    out += kRoundsCsvHeader;
    out += '\n';
    for (const RoundLog& r : run.rounds) {
        out += std::to_string(r.t);
        out += ',';
        out += r.explored ? '1' : '0';
        out += ',';
        out += format_real(r.price);
        out += ',';
        out += format_real(r.exact_regret_increment);
        out += ',';
        out += format_real(r.cum_regret);
        out += ',';
        out += format_real(r.realized_gft);
        out += '\n';
    }
    return out;
}

inline std::string replicates_csv(const SweepResult& sweep_result) {
    std::string out = "replicate,seed,regret,realized_gft,expected_gft,explorations\n";
    for (const auto& r : sweep_result.replicates) {
        out += std::to_string(r.index) + ',' + std::to_string(r.run.seed) + ',' + format_real(r.run.cumulative_regret) +
               ',' + format_real(r.run.cumulative_realized_gft) + ',' + format_real(r.run.cumulative_expected_gft) +
               ',' + std::to_string(r.run.explorations) + '\n';
    }
    return out;
}

inline nlohmann::json to_json(const BoundCheck& c) {
    if (!c.applicable) return {{"applicable", false}};
    return {{"applicable", true}, {"value", c.value}, {"budget", c.budget}, {"slack", c.slack}, {"pass", c.pass}};
}

inline nlohmann::json to_json(const BoundReport& b) {
    return {{"full_feedback_regret", to_json(b.full_feedback_regret)},
            {"two_bit_regret", to_json(b.two_bit_regret)},
            {"exploration_count", to_json(b.exploration_count)},
            {"elliptical_potential", to_json(b.elliptical_potential)},
            {"all_pass", b.all_pass()}};
}

inline nlohmann::json to_json(const Aggregate& a) {
    return {{"mean", a.mean}, {"std", a.stddev}, {"min", a.min}, {"max", a.max}};
}

inline nlohmann::json summary_json(const ExperimentConfig& cfg, const SweepResult& res) {
    nlohmann::json reps = nlohmann::json::array();
    for (const auto& r : res.replicates) {
        reps.push_back({{"replicate", r.index},
                        {"seed", r.run.seed},
                        {"regret", r.run.cumulative_regret},
                        {"realized_gft", r.run.cumulative_realized_gft},
                        {"expected_gft", r.run.cumulative_expected_gft},
                        {"explorations", r.run.explorations},
                        {"ridge_updates", r.run.ridge_updates},
                        {"estimate", r.run.estimate},
                        {"bounds", to_json(r.bounds)}});
    }
    return {{"schema_version", kSchemaVersion},
            {"library_version", kVersion},
            {"config", cfg.raw},
            {"config_hash", hex64(config_hash(cfg))},
            {"seed", cfg.seed},
            {"horizon", cfg.horizon},
            {"policy", cfg.policy.name},
            {"family", cfg.instance.family},
            {"replicates", reps},
            {"aggregates", {{"regret", to_json(res.regret)}, {"explorations", to_json(res.explorations)}}},
            {"all_bounds_pass", res.all_bounds_pass}};
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(path.string(), "cannot open for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError(path.string(), "write failed");
}

enum class EmitFormat { json, csv };

/// Writes results.json (always), replicates.csv for the csv format, and
/// rounds_<i>.csv per replicate when round logs were recorded.
inline std::vector<std::filesystem::path> emit(const ExperimentConfig& cfg, const SweepResult& res,
                                               const std::filesystem::path& dir, EmitFormat format) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError(dir.string(), ec.message());
    std::vector<std::filesystem::path> written;
    const auto summary = dir / "results.json";
    write_file(summary, summary_json(cfg, res).dump(2) + "\n");
    written.push_back(summary);
    if (format == EmitFormat::csv) {
        const auto p = dir / "replicates.csv";
        write_file(p, replicates_csv(res));
        written.push_back(p);
    }
    for (const auto& r : res.replicates) {
        if (r.run.rounds.empty()) continue;
        const auto p = dir / ("rounds_" + std::to_string(r.index) + ".csv");
        write_file(p, rounds_csv(r.run));
        written.push_back(p);
    }
    return written;
}

}  // namespace brokerage
