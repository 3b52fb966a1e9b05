#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>

#include "brokerage/core.hpp"
#include "brokerage/errors.hpp"
#include "brokerage/estimator.hpp"
#include "brokerage/random.hpp"

namespace brokerage {

/// Stateful pricer. Each round the harness calls post_price() with the
/// context, then observe() with the feedback of that same round.
class Policy {
public:
    virtual ~Policy() = default;

    virtual std::string name() const = 0;

    // Feedback kind this policy consumes. Baselines accept either kind.
    virtual FeedbackKind requirement() const = 0;
    virtual bool accepts_any_feedback() const { return false; }

    virtual Price post_price(std::span<const double> context) = 0;
    virtual void observe(const Feedback& feedback) = 0;

    // Whether the price of the latest round came from an exploration step.
    virtual bool explored_last() const { return false; }

    // Ridge state, for policies that keep one.
    virtual const RidgeState* ridge() const { return nullptr; }
};

/// Ridge regression pricing with full feedback: post 1/2 first, then the
/// clamped ridge prediction, refitting on both revealed valuations.
class FullRidgePolicy final : public Policy {
public:
    explicit FullRidgePolicy(std::size_t d) : state_(d) {}

    std::string name() const override { return "full_ridge"; }
    FeedbackKind requirement() const override { return FeedbackKind::full; }

    Price post_price(std::span<const double> context) override {
        last_context_.assign(context.begin(), context.end());
        if (!started_) {
            started_ = true;
            return 0.5;
        }
        return clamp_unit(state_.predict(context));
    }

    void observe(const Feedback& feedback) override {
        const auto* full = std::get_if<FullFeedback>(&feedback);
        if (full == nullptr) throw FeedbackMismatch("full_ridge: received two-bit feedback");
        state_.update(last_context_, full->v, full->w);
    }

    const RidgeState* ridge() const override { return &state_; }

private:
    RidgeState state_;
    Context last_context_;
    bool started_ = false;
};

struct ScoutingConfig {
    std::size_t horizon = 1;
    double density_bound = 1.0;
    std::size_t dim = 1;
    double threshold = 0.0;
};

inline double exploration_log_term(std::size_t d, std::size_t horizon) {
    const double dd = static_cast<double>(d);
    return 2.0 * dd * std::log1p(2.0 * dd * (static_cast<double>(horizon) - 1.0));
}

// Validates the horizon condition L T >= 2d ln(1 + 2d(T-1)) and caches
// the exploration threshold sqrt(2d ln(1 + 2d(T-1)) / (L T)).
inline ScoutingConfig make_scouting_config(std::size_t horizon, double L, std::size_t d) {
    if (horizon == 0) throw ConfigError("scouting: horizon must be positive");
    if (d == 0) throw ConfigError("scouting: dimension must be positive");
    if (!std::isfinite(L) || L < 1.0) throw ConfigError("scouting: density bound must be >= 1");
    const double log_term = exploration_log_term(d, horizon);
    const double lt = L * static_cast<double>(horizon);
    if (lt < log_term) {
        throw ConfigError("scouting: horizon too short, L*T = " + std::to_string(lt) +
                          " < 2d ln(1+2d(T-1)) = " + std::to_string(log_term));
    }
    return {horizon, L, d, std::sqrt(log_term / lt)};
}

inline double scouting_threshold(const ScoutingConfig& cfg) { return cfg.threshold; }

/// Two-bit pricing: explore with a uniform price whenever the context's
/// design norm exceeds the threshold (always on round one), otherwise
/// exploit the ridge estimate. Only exploration rounds update the state.
///
/// Randomness: one uniform draw per exploration round, nothing otherwise.
class ScoutingRidgePolicy final : public Policy {
public:
    ScoutingRidgePolicy(ScoutingConfig cfg, std::uint64_t seed)
        : cfg_(cfg), state_(cfg.dim), rng_(seed) {}

    std::string name() const override { return "scouting_ridge"; }
    FeedbackKind requirement() const override { return FeedbackKind::two_bit; }

    Price post_price(std::span<const double> context) override {
        last_context_.assign(context.begin(), context.end());
        if (round_ == 0) {
            explored_ = true;
        } else {
            // strict comparison; ties exploit
            explored_ = state_.design_norm_sq(context) > cfg_.threshold;
        }
        ++round_;
        if (explored_) {
            ++explorations_;
            return rng_.uniform();
        }
        return clamp_unit(state_.predict(context));
    }

    void observe(const Feedback& feedback) override {
        const auto* bits = std::get_if<TwoBitFeedback>(&feedback);
        if (bits == nullptr) throw FeedbackMismatch("scouting_ridge: received full feedback");
        if (!explored_) return;
        state_.update(last_context_, bits->d_bit ? 1.0 : 0.0, bits->e_bit ? 1.0 : 0.0);
    }

    bool explored_last() const override { return explored_; }
    const RidgeState* ridge() const override { return &state_; }

    const ScoutingConfig& config() const { return cfg_; }
    std::size_t explorations() const { return explorations_; }

private:
    ScoutingConfig cfg_;
    RidgeState state_;
    Rng rng_;
    Context last_context_;
    std::size_t round_ = 0;
    std::size_t explorations_ = 0;
    bool explored_ = false;
};

// Baselines ignore feedback of either kind.
class BaselinePolicy : public Policy {
public:
    FeedbackKind requirement() const override { return FeedbackKind::full; }
    bool accepts_any_feedback() const override { return true; }
    void observe(const Feedback&) override {}
};

/// Knows the weight vector and posts the market value.
class OraclePolicy final : public BaselinePolicy {
public:
    explicit OraclePolicy(WeightVector phi) : phi_(std::move(phi)) {
        check_unit_vector(phi_, "oracle weight");
    }

    std::string name() const override { return "oracle"; }

    Price post_price(std::span<const double> context) override {
        return clamp_unit(market_value(context, phi_));
    }

private:
    WeightVector phi_;
};

class ConstantPricePolicy final : public BaselinePolicy {
public:
    explicit ConstantPricePolicy(Price p) : price_(p) {
        if (!std::isfinite(p) || !in_unit(p)) throw InvalidParameter("constant price outside [0,1]");
    }

    std::string name() const override { return "constant"; }
    Price post_price(std::span<const double>) override { return price_; }

private:
    Price price_;
};

class UniformRandomPolicy final : public BaselinePolicy {
public:
    explicit UniformRandomPolicy(std::uint64_t seed) : rng_(seed) {}

    std::string name() const override { return "uniform_random"; }
    Price post_price(std::span<const double>) override { return rng_.uniform(); }

private:
    Rng rng_;
};

inline std::unique_ptr<Policy> full_ridge_policy(std::size_t d) {
    return std::make_unique<FullRidgePolicy>(d);
}

inline std::unique_ptr<Policy> scouting_ridge_policy(const ScoutingConfig& cfg, std::uint64_t seed) {
    return std::make_unique<ScoutingRidgePolicy>(cfg, seed);
}

inline std::unique_ptr<Policy> oracle_policy(WeightVector phi) {
    return std::make_unique<OraclePolicy>(std::move(phi));
}

inline std::unique_ptr<Policy> constant_price_policy(Price p) {
    return std::make_unique<ConstantPricePolicy>(p);
}

inline std::unique_ptr<Policy> uniform_random_policy(std::uint64_t seed) {
    return std::make_unique<UniformRandomPolicy>(seed);
}

}  // namespace brokerage
