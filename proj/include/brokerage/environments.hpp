#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <json.hpp>

#include "brokerage/core.hpp"
#include "brokerage/distributions.hpp"
#include "brokerage/errors.hpp"
#include "brokerage/random.hpp"

namespace brokerage {

inline constexpr double kUnbounded = std::numeric_limits<double>::infinity();

struct RoundLaw {
    std::shared_ptr<const ValuationDistribution> v;
    std::shared_ptr<const ValuationDistribution> w;
};

/// Full environment description: contexts, hidden weights and the law of
/// each round's pair of valuations. Immutable once built.
struct Instance {
    std::size_t horizon = 0;
    std::size_t dim = 0;
    std::vector<Context> contexts;
    WeightVector phi;
    std::vector<RoundLaw> rounds;
    double declared_bound = kUnbounded;
    std::string family;
    nlohmann::json params = nlohmann::json::object();

    double market_value_at(std::size_t t) const { return market_value(contexts[t], phi); }
    bool bounded() const { return std::isfinite(declared_bound); }
};

struct AdversarySchedule {
    std::vector<int> theta;
    double eps = 0.0;
};

struct Violation {
    std::string kind;
    std::size_t round = 0;  // 1-based; 0 for instance-level problems
    std::string message;
};

/// Checks every Instance invariant and reports the first violation found.
inline std::optional<Violation> validate(const Instance& inst) {
    auto fail = [](std::string kind, std::size_t round, std::string msg) {
        return std::optional<Violation>(Violation{std::move(kind), round, std::move(msg)});
    };
    if (inst.horizon == 0) return fail("shape", 0, "horizon must be positive");
    if (inst.dim == 0) return fail("shape", 0, "dimension must be positive");
    if (inst.contexts.size() != inst.horizon || inst.rounds.size() != inst.horizon) {
        return fail("shape", 0, "contexts/rounds length differs from horizon");
    }
    if (inst.phi.size() != inst.dim) return fail("shape", 0, "weight vector has wrong dimension");
    for (double x : inst.phi) {
        if (!std::isfinite(x) || !in_unit(x)) return fail("phi-range", 0, "weight outside [0,1]");
    }
    if (!(inst.declared_bound >= 1.0)) return fail("density-bound", 0, "declared bound below 1");

    for (std::size_t t = 0; t < inst.horizon; ++t) {
        const std::size_t round = t + 1;
        const Context& c = inst.contexts[t];
        if (c.size() != inst.dim) return fail("shape", round, "context has wrong dimension");
        for (double x : c) {
            if (!std::isfinite(x) || !in_unit(x)) {
                return fail("context-range", round, "context coordinate outside [0,1]");
            }
        }
        const RoundLaw& law = inst.rounds[t];
        if (!law.v || !law.w) return fail("shape", round, "missing round distribution");
        const double m = inst.market_value_at(t);
        if (!in_unit(m)) return fail("context-range", round, "market value outside [0,1]");
        for (const auto* dist : {law.v.get(), law.w.get()}) {
            if (std::abs(dist->mean() - m) > kEqualMeanTolerance) {
                return fail("mean-mismatch", round,
                            "trader mean " + std::to_string(dist->mean()) +
                                " differs from market value " + std::to_string(m));
            }
            if (inst.bounded() && dist->density_bound() > inst.declared_bound + kMassTolerance) {
                return fail("density-bound", round,
                            "density bound " + std::to_string(dist->density_bound()) +
                                " exceeds declared " + std::to_string(inst.declared_bound));
            }
        }
    }
    return std::nullopt;
}

inline void require_valid(const Instance& inst) {
    if (auto v = validate(inst)) {
        throw InvalidInstance(v->kind + " at t=" + std::to_string(v->round) + ": " + v->message);
    }
}

// ---------------------------------------------------------------------------
// Random learnable instances
// ---------------------------------------------------------------------------

enum class NoiseShape {
    uniform,       // both traders uniform with radius = margin
    random_radius  // each trader gets its own radius in [margin, min(m, 1-m)]
};

/// Random linear instance: phi and contexts drawn uniformly, contexts
/// rejection-sampled so every market value lies in [margin, 1 - margin];
/// noise is symmetric uniform with density at most 1/(2 margin) <= L.
inline Instance random_linear_instance(std::size_t d, std::size_t T, double L, double margin, Rng& rng,
                                       NoiseShape shape = NoiseShape::uniform) {
    if (d == 0 || T == 0) throw InvalidParameter("random_linear: d and T must be positive");
    if (!std::isfinite(L) || L < 1.0) throw InvalidParameter("random_linear: need L >= 1");
    if (!(margin > 0.0 && margin < 0.5)) throw InvalidParameter("random_linear: need margin in (0, 1/2)");
    if (1.0 / (2.0 * margin) > L * (1.0 + 1e-12)) {
        throw InvalidParameter("random_linear: infeasible, need 1/(2 margin) <= L");
    }

    Instance inst;
    inst.horizon = T;
    inst.dim = d;
    inst.declared_bound = L;
    inst.family = "random_linear";
    inst.params = {{"d", d}, {"T", T}, {"L", L}, {"margin", margin},
                   {"noise", shape == NoiseShape::uniform ? "uniform" : "random_radius"}};

    std::vector<double> raw(d);
    double total = 0.0;
    while (total <= 0.0) {
        total = 0.0;
        for (double& x : raw) total += (x = rng.uniform());
    }
    const double scale = 0.75 + 0.25 * rng.uniform();
    inst.phi.resize(d);
    for (std::size_t i = 0; i < d; ++i) inst.phi[i] = std::min(1.0, raw[i] * scale / total);

    constexpr std::size_t kMaxAttempts = 1000000;
    inst.contexts.reserve(T);
    inst.rounds.reserve(T);
    const double radius = margin;
    std::shared_ptr<const ValuationDistribution> shared;
    for (std::size_t t = 0; t < T; ++t) {
        Context c(d);
        double m = -1.0;
        std::size_t attempts = 0;
        while (!(m >= margin && m <= 1.0 - margin)) {
            if (++attempts > kMaxAttempts) throw InvalidParameter("random_linear: context rejection failed");
            for (double& x : c) x = rng.uniform();
            m = market_value(c, inst.phi);
        }
        inst.contexts.push_back(std::move(c));
        if (shape == NoiseShape::uniform) {
            auto dist = std::make_shared<const ValuationDistribution>(centered_uniform(m, radius));
            inst.rounds.push_back({dist, dist});
        } else {
            const double cap = std::min(m, 1.0 - m);
            const double rv = margin + (cap - margin) * rng.uniform();
            const double rw = margin + (cap - margin) * rng.uniform();
            inst.rounds.push_back({std::make_shared<const ValuationDistribution>(centered_uniform(m, rv)),
                                   std::make_shared<const ValuationDistribution>(centered_uniform(m, rw))});
        }
    }
    return inst;
}

// ---------------------------------------------------------------------------
// Spike-density block instances
// ---------------------------------------------------------------------------

inline double spike_eps_limit(double L) { return std::min(1.0, 7.0 / L); }

namespace detail {

// d blocks of floor(T/d) rounds; block i sees context e_i and valuations
// with density f_{eps_i}.
inline Instance spike_blocks(std::size_t d, std::size_t T, double L, const std::vector<double>& eps,
                             double eps_limit, const char* family) {
    if (d == 0) throw InvalidParameter(std::string(family) + ": d must be positive");
    if (!std::isfinite(L) || L < 2.0) throw InvalidParameter(std::string(family) + ": need L >= 2");
    if (eps.size() != d) throw InvalidParameter(std::string(family) + ": need one eps per dimension");
    const std::size_t n = T / d;
    if (n == 0) throw InvalidParameter(std::string(family) + ": need T >= d");
    for (double e : eps) {
        if (!std::isfinite(e) || std::abs(e) > eps_limit) {
            throw InvalidParameter(std::string(family) + ": |eps| exceeds " + std::to_string(eps_limit));
        }
    }

    Instance inst;
    inst.horizon = n * d;
    inst.dim = d;
    inst.declared_bound = L;
    inst.family = family;
    inst.phi.resize(d);
    inst.contexts.reserve(inst.horizon);
    inst.rounds.reserve(inst.horizon);
    for (std::size_t i = 0; i < d; ++i) {
        inst.phi[i] = spike_mean(eps[i]);
        auto dist = std::make_shared<const ValuationDistribution>(spike_distribution(L, eps[i]));
        Context e(d, 0.0);
        e[i] = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            inst.contexts.push_back(e);
            inst.rounds.push_back({dist, dist});
        }
    }
    return inst;
}

}  // namespace detail

inline Instance appendix_a_instance(std::size_t d, std::size_t T, double L, const std::vector<double>& eps) {
    Instance inst = detail::spike_blocks(d, T, L, eps, spike_eps_limit(L), "appendix_a");
    inst.params = {{"d", d}, {"T", T}, {"L", L}, {"eps", eps}};
    return inst;
}

inline double appendix_b_eps(std::size_t d, std::size_t T, double L) {
    return std::pow(L * static_cast<double>(T) / static_cast<double>(d), -0.25);
}

/// Two-bit hard instance: every block uses |eps| = (LT/d)^{-1/4} with the
/// sign given by sigma.
inline Instance appendix_b_instance(std::size_t d, std::size_t T, double L, const std::vector<int>& sigma) {
    if (d == 0) throw InvalidParameter("appendix_b: d must be positive");
    if (!std::isfinite(L) || L < 2.0) throw InvalidParameter("appendix_b: need L >= 2");
    if (sigma.size() != d) throw InvalidParameter("appendix_b: need one sign per dimension");
    const double td = static_cast<double>(T);
    if (td < static_cast<double>(d) * L * L * L / std::pow(14.0, 4)) {
        throw InvalidParameter("appendix_b: horizon too small, need T >= d L^3 / 14^4");
    }
    const double eps = appendix_b_eps(d, T, L);
    if (eps > 1.0) throw InvalidParameter("appendix_b: horizon too small, need L T >= d");
    std::vector<double> eps_vec(d);
    for (std::size_t i = 0; i < d; ++i) {
        if (sigma[i] != 1 && sigma[i] != -1) throw InvalidParameter("appendix_b: sigma must be +-1");
        eps_vec[i] = sigma[i] * eps;
    }
    // eps <= 14/L keeps the optimum inside the spike window
    Instance inst = detail::spike_blocks(d, T, L, eps_vec, std::min(1.0, 14.0 / L), "appendix_b");
    inst.params = {{"d", d}, {"T", T}, {"L", L}, {"sigma", sigma}, {"eps", eps}};
    return inst;
}

/// Replica of the compositional construction of the spike law:
/// with probability 1/7 a point of [1/7, 2/7] whose half is chosen by a
/// Bernoulli((1+eps)/2) coin, otherwise the inverse CDF of (7/6) f off
/// [1/7, 2/7]. Draw order per sample: B~, U, B.
class CompositionalSpikeSampler {
public:
    CompositionalSpikeSampler(double L, double eps) : eps_(eps), outside_(outside_density(L)) {
        if (!std::isfinite(eps) || std::abs(eps) > 1.0) {
            throw InvalidParameter("compositional sampler: need |eps| <= 1");
        }
    }

    double value(bool b_tilde, bool b, double u) const {
        if (b_tilde) return b ? (3.0 + u) / 14.0 : (2.0 + u) / 14.0;
        return outside_.quantile(u);
    }

    double operator()(Rng& rng) const {
        const bool b_tilde = rng.bernoulli(1.0 / 7.0);
        const double u = rng.uniform();
        const bool b = rng.bernoulli(0.5 * (1.0 + eps_));
        return value(b_tilde, b, u);
    }

private:
    static PiecewiseConstantDensity outside_density(double L) {
        if (!std::isfinite(L) || L < 2.0) throw InvalidParameter("compositional sampler: need L >= 2");
        const double hw = spike_half_width(L);
        const double k = 7.0 / 6.0;
        return PiecewiseConstantDensity(
            {0.0, 1.0 / 7.0, 2.0 / 7.0, 3.0 / 7.0, 0.5 - hw, 0.5 + hw, 4.0 / 7.0, 1.0},
            {k, 0.0, k, 0.0, k * L, 0.0, k});
    }

    double eps_;
    PiecewiseConstantDensity outside_;
};

inline double compositional_spike_sampler(double L, double eps, Rng& rng) {
    return CompositionalSpikeSampler(L, eps)(rng);
}

// ---------------------------------------------------------------------------
// Unbounded-density instance
// ---------------------------------------------------------------------------

/// Distinct contexts with constant market value 1/2 and i.i.d. fair-coin
/// choices between the two Dirac mixtures. d == 1 uses context 1 and phi = 1/2.
inline std::pair<Instance, AdversarySchedule> appendix_c_instance(std::size_t d, std::size_t T, double eps,
                                                                  Rng& rng) {
    if (d == 0 || T == 0) throw InvalidParameter("appendix_c: d and T must be positive");
    if (!(eps > 0.0 && eps < 1.0 / 16.0)) throw InvalidParameter("appendix_c: need eps in (0, 1/16)");

    Instance inst;
    inst.horizon = T;
    inst.dim = d;
    inst.declared_bound = kUnbounded;
    inst.family = "appendix_c";
    inst.params = {{"d", d}, {"T", T}, {"eps", eps}};
    inst.phi.assign(d, 0.0);
    if (d == 1) {
        inst.phi[0] = 0.5;
    } else {
        inst.phi[0] = 0.5;
        inst.phi[1] = 0.5;
    }

    const std::shared_ptr<const ValuationDistribution> laws[2] = {
        std::make_shared<const ValuationDistribution>(dirac_mixture_distribution(0, eps)),
        std::make_shared<const ValuationDistribution>(dirac_mixture_distribution(1, eps))};

    AdversarySchedule schedule;
    schedule.eps = eps;
    schedule.theta.reserve(T);
    inst.contexts.reserve(T);
    inst.rounds.reserve(T);
    for (std::size_t t = 1; t <= T; ++t) {
        Context c(d, 0.0);
        if (d == 1) {
            c[0] = 1.0;
        } else {
            const double a = static_cast<double>(t) / (2.0 * static_cast<double>(T));
            c[0] = a;
            c[1] = 1.0 - a;
        }
        inst.contexts.push_back(std::move(c));
        const int theta = rng.bernoulli(0.5) ? 1 : 0;
        schedule.theta.push_back(theta);
        inst.rounds.push_back({laws[theta], laws[theta]});
    }
    return {std::move(inst), std::move(schedule)};
}

// ---------------------------------------------------------------------------
// Posterior diagnostic
// ---------------------------------------------------------------------------

/// E[Z | k successes in n Bernoulli(Z) trials] for Z uniform on
/// [(1 - eps_bar)/2, (1 + eps_bar)/2], by adaptive Gauss-Kronrod quadrature.
inline double bernoulli_posterior_mean(std::size_t k, std::size_t n, double eps_bar) {
    if (k > n) throw InvalidParameter("posterior: successes exceed trials");
    if (!(eps_bar > 0.0 && eps_bar <= 1.0)) throw InvalidParameter("posterior: need eps_bar in (0, 1]");
    const double lo = 0.5 * (1.0 - eps_bar);
    const double hi = 0.5 * (1.0 + eps_bar);
    if (n == 0) return 0.5;

    const double kk = static_cast<double>(k);
    const double fails = static_cast<double>(n - k);
    auto log_lik = [&](double z) {
        double s = 0.0;
        if (k > 0) s += kk * std::log(z);
        if (n > k) s += fails * std::log1p(-z);
        return s;
    };
    const double mode = std::clamp(kk / static_cast<double>(n), lo, hi);
    const double peak = log_lik(mode);
    auto weight = [&](double z) {
        if ((z <= 0.0 && k > 0) || (z >= 1.0 && n > k)) return 0.0;
        return std::exp(log_lik(z) - peak);
    };

    // The log-likelihood is concave, so beyond 40 widths of the peak the
    // weight is below e^-40 of its maximum; integrate only that window, split
    // around the peak so the adaptive rule sees its scale.
    const double width = std::sqrt(mode * (1.0 - mode) / static_cast<double>(n)) + 1.0 / static_cast<double>(n);
    const double a = std::max(lo, mode - 40.0 * width);
    const double b = std::min(hi, mode + 40.0 * width);
    std::vector<double> cuts{a, b};
    for (double off : {-8.0, -2.0, 0.0, 2.0, 8.0}) {
        const double x = mode + off * width;
        if (x > a && x < b) cuts.push_back(x);
    }
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

    using Rule = boost::math::quadrature::gauss_kronrod<double, 31>;
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        den += Rule::integrate(weight, cuts[i], cuts[i + 1], 10, 1e-11);
        num += Rule::integrate([&](double z) { return z * weight(z); }, cuts[i], cuts[i + 1], 10, 1e-11);
    }
    if (!(den > 0.0)) throw NumericError("posterior: vanishing normalizer");
    return num / den;
}

}  // namespace brokerage
