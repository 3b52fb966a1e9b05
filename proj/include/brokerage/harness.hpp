#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "brokerage/core.hpp"
#include "brokerage/distributions.hpp"
#include "brokerage/environments.hpp"
#include "brokerage/errors.hpp"
#include "brokerage/policies.hpp"
#include "brokerage/random.hpp"

namespace brokerage {

struct RoundLog {
    std::size_t t = 0;  // 1-based
    Context context;
    Price price = 0.0;
    bool explored = false;
    Feedback feedback;
    double exact_regret_increment = 0.0;
    double realized_gft = 0.0;
    double cum_regret = 0.0;
};

struct RunResult {
    std::uint64_t seed = 0;
    std::size_t horizon = 0;
    std::size_t dim = 0;
    FeedbackKind feedback = FeedbackKind::full;
    std::string policy;
    double cumulative_regret = 0.0;
    double cumulative_realized_gft = 0.0;
    // Sum of the oracle's expected GFT at the posted prices.
    double cumulative_expected_gft = 0.0;
    std::size_t explorations = 0;
    bool has_ridge = false;
    std::size_t ridge_updates = 0;
    double potential_sum = 0.0;
    std::vector<double> estimate;
    std::vector<RoundLog> rounds;  // filled only when requested
};

struct RunOptions {
    // Feedback to generate; defaults to the policy's requirement.
    std::optional<FeedbackKind> feedback;
    bool keep_rounds = false;
};

inline FeedbackKind resolve_feedback(const Policy& policy, std::optional<FeedbackKind> requested) {
    const FeedbackKind kind = requested.value_or(policy.requirement());
    if (!policy.accepts_any_feedback() && kind != policy.requirement()) {
        throw ConfigError(std::string("policy ") + policy.name() + " needs " + to_string(policy.requirement()) +
                          " feedback, configured " + to_string(kind));
    }
    return kind;
}

/// Plays one episode. Valuations come from the stream derived from `seed`;
/// regret increments come from the exact oracle, not from sampled GFT.
/// Per round the valuation stream yields V then W.
inline RunResult run_episode(const Instance& instance, Policy& policy, std::uint64_t seed,
                             const RunOptions& opts = {}) {
    require_valid(instance);
    const FeedbackKind kind = resolve_feedback(policy, opts.feedback);

    RunResult res;
    res.seed = seed;
    res.horizon = instance.horizon;
    res.dim = instance.dim;
    res.feedback = kind;
    res.policy = policy.name();
    if (opts.keep_rounds) res.rounds.reserve(instance.horizon);

    Rng valuations(derive_seed(seed, Stream::valuations));
    for (std::size_t t = 0; t < instance.horizon; ++t) {
        const Context& c = instance.contexts[t];
        const RoundLaw& law = instance.rounds[t];

        const Price p = policy.post_price(c);
        if (!in_unit(p)) throw NumericError("policy posted a price outside [0,1]");
        const bool explored = policy.explored_last();

        const Valuation v = sample(*law.v, valuations);
        const Valuation w = sample(*law.w, valuations);

        Feedback fb;
        if (kind == FeedbackKind::full) {
            fb = FullFeedback{v, w};
        } else {
            fb = TwoBitFeedback{p <= v, p <= w};
        }

        const OptimalPrice opt = optimal_price_and_value(*law.v, *law.w);
        const double egft = expected_gft(p, *law.v, *law.w);
        const double inc = std::max(0.0, opt.value - egft);
        const double realized = gain_from_trade(p, v, w);

        res.cumulative_regret += inc;
        res.cumulative_expected_gft += egft;
        res.cumulative_realized_gft += realized;
        if (explored) ++res.explorations;

        if (opts.keep_rounds) {
            res.rounds.push_back(RoundLog{t + 1, c, p, explored, fb, inc, realized, res.cumulative_regret});
        }
        policy.observe(fb);
    }

    if (const RidgeState* ridge = policy.ridge()) {
        res.has_ridge = true;
        res.ridge_updates = ridge->updates();
        res.potential_sum = ridge->potential_sum();
        res.estimate.assign(ridge->estimate().data(), ridge->estimate().data() + ridge->estimate().size());
    }
    return res;
}

// ---------------------------------------------------------------------------
// Bound compliance
// ---------------------------------------------------------------------------

struct BoundCheck {
    bool applicable = false;
    double value = 0.0;
    double budget = 0.0;
    double slack = 0.0;  // budget - value
    bool pass = true;
};

struct BoundReport {
    BoundCheck full_feedback_regret;
    BoundCheck two_bit_regret;
    BoundCheck exploration_count;
    BoundCheck elliptical_potential;

    bool all_pass() const {
        for (const BoundCheck* c : {&full_feedback_regret, &two_bit_regret, &exploration_count, &elliptical_potential}) {
            if (c->applicable && !c->pass) return false;
        }
        return true;
    }
};

inline double full_feedback_budget(double L, std::size_t d, std::size_t T) {
    return 1.0 + 4.0 * L * static_cast<double>(d) * std::log(static_cast<double>(T));
}

inline double two_bit_budget(double L, std::size_t d, std::size_t T) {
    const double td = static_cast<double>(T);
    return 1.0 + 4.0 * std::sqrt(L * static_cast<double>(d) * td * std::log(td));
}

inline double exploration_budget(double L, std::size_t d, std::size_t T) {
    return 1.0 + std::sqrt(L * static_cast<double>(T) * exploration_log_term(d, T));
}

namespace detail {
inline BoundCheck make_check(double value, double budget) {
    return {true, value, budget, budget - value, value <= budget};
}
}  // namespace detail

/// Regret and exploration budgets for a finished run. Regret bounds need a
/// finite declared density bound; `policy_bound` is the L a scouting policy
/// was tuned with, defaulting to the instance's.
inline BoundReport bound_report(const RunResult& result, const Instance& instance,
                                std::optional<double> policy_bound = std::nullopt) {
    BoundReport rep;
    const std::size_t d = instance.dim;
    const std::size_t T = instance.horizon;
    if (instance.bounded()) {
        const double L = instance.declared_bound;
        if (result.feedback == FeedbackKind::full) {
            rep.full_feedback_regret = detail::make_check(result.cumulative_regret, full_feedback_budget(L, d, T));
        } else {
            rep.two_bit_regret = detail::make_check(result.cumulative_regret, two_bit_budget(L, d, T));
        }
        if (result.policy == "scouting_ridge") {
            rep.exploration_count = detail::make_check(static_cast<double>(result.explorations),
                                                       exploration_budget(policy_bound.value_or(L), d, T));
        }
    }
    if (result.has_ridge) {
        rep.elliptical_potential =
            detail::make_check(result.potential_sum, potential_budget(d, result.ridge_updates));
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Aggregates
// ---------------------------------------------------------------------------

struct Aggregate {
    double mean = 0.0;
    double stddev = 0.0;
    double min = 0.0;
    double max = 0.0;
};

// Sample standard deviation; zero for a single value.
inline Aggregate aggregate(const std::vector<double>& xs) {
    Aggregate a;
    if (xs.empty()) return a;
    a.min = a.max = xs.front();
    double sum = 0.0;
    for (double x : xs) {
        sum += x;
        a.min = std::min(a.min, x);
        a.max = std::max(a.max, x);
    }
    a.mean = sum / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - a.mean) * (x - a.mean);
        a.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
    }
    return a;
}

}  // namespace brokerage
