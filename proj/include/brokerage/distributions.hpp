#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "brokerage/core.hpp"
#include "brokerage/errors.hpp"
#include "brokerage/random.hpp"

namespace brokerage {

inline constexpr double kMassTolerance = 1e-12;
inline constexpr double kMeanTolerance = 1e-12;
// Two traders' means must agree this closely before the representation
// formula is applied.
inline constexpr double kEqualMeanTolerance = 1e-9;

/// Density on [0,1] that is constant on each segment [b_{i}, b_{i+1}].
///
/// Besides the CDF this keeps the running integral of the CDF at every
/// breakpoint, which makes the expected gain from trade a closed-form
/// piecewise-quadratic evaluation.
class PiecewiseConstantDensity {
public:
    PiecewiseConstantDensity(std::vector<double> breakpoints, std::vector<double> heights)
        : breakpoints_(std::move(breakpoints)), heights_(std::move(heights)) {
        if (breakpoints_.size() < 2 || heights_.size() + 1 != breakpoints_.size()) {
            throw InvalidParameter("density: need k heights and k+1 breakpoints");
        }
        if (breakpoints_.front() != 0.0 || breakpoints_.back() != 1.0) {
            throw InvalidParameter("density: breakpoints must start at 0 and end at 1");
        }
        for (std::size_t i = 0; i + 1 < breakpoints_.size(); ++i) {
            if (!(breakpoints_[i] < breakpoints_[i + 1])) {
                throw InvalidParameter("density: breakpoints must be strictly increasing");
            }
        }
        for (double h : heights_) {
            if (!std::isfinite(h) || h < 0.0) {
                throw InvalidParameter("density: heights must be finite and nonnegative");
            }
        }
        cum_mass_.assign(breakpoints_.size(), 0.0);
        cum_integral_.assign(breakpoints_.size(), 0.0);
        for (std::size_t i = 0; i < heights_.size(); ++i) {
            const double width = breakpoints_[i + 1] - breakpoints_[i];
            cum_mass_[i + 1] = cum_mass_[i] + heights_[i] * width;
            cum_integral_[i + 1] =
                cum_integral_[i] + cum_mass_[i] * width + 0.5 * heights_[i] * width * width;
        }
        if (std::abs(cum_mass_.back() - 1.0) > kMassTolerance) {
            throw InvalidParameter("density: total mass " + std::to_string(cum_mass_.back()) +
                                   " differs from 1");
        }
    }

    const std::vector<double>& breakpoints() const { return breakpoints_; }
    const std::vector<double>& heights() const { return heights_; }

    double cdf(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return 1.0;
        const std::size_t i = segment_of(x);
        return std::min(1.0, cum_mass_[i] + heights_[i] * (x - breakpoints_[i]));
    }

    // Integral of the CDF over [0, x].
    double cdf_integral(double x) const {
        if (x <= 0.0) return 0.0;
        if (x >= 1.0) return cum_integral_.back() + (x - 1.0);
        const std::size_t i = segment_of(x);
        const double dx = x - breakpoints_[i];
        return cum_integral_[i] + cum_mass_[i] * dx + 0.5 * heights_[i] * dx * dx;
    }

    double mean() const {
        double m = 0.0;
        for (std::size_t i = 0; i < heights_.size(); ++i) {
            const double a = breakpoints_[i];
            const double b = breakpoints_[i + 1];
            m += 0.5 * heights_[i] * (b - a) * (b + a);
        }
        return m;
    }

    double quantile(double u) const {
        u = std::clamp(u, 0.0, 1.0);
        std::size_t last_positive = 0;
        for (std::size_t i = 0; i < heights_.size(); ++i) {
            if (heights_[i] <= 0.0) continue;
            last_positive = i;
            if (u < cum_mass_[i + 1]) {
                const double x = breakpoints_[i] + (u - cum_mass_[i]) / heights_[i];
                return std::clamp(x, breakpoints_[i], breakpoints_[i + 1]);
            }
        }
        return breakpoints_[last_positive + 1];
    }

    double max_height() const { return *std::max_element(heights_.begin(), heights_.end()); }

private:
    std::size_t segment_of(double x) const {
        auto it = std::upper_bound(breakpoints_.begin(), breakpoints_.end(), x);
        std::size_t i = static_cast<std::size_t>(it - breakpoints_.begin());
        return std::min(i == 0 ? 0 : i - 1, heights_.size() - 1);
    }

    std::vector<double> breakpoints_;
    std::vector<double> heights_;
    std::vector<double> cum_mass_;
    std::vector<double> cum_integral_;
};

struct Atom {
    double location = 0.0;
    double probability = 0.0;
};

/// Finitely many atoms in [0,1], stored sorted by location with duplicates merged.
class DiscreteDistribution {
public:
    explicit DiscreteDistribution(std::vector<Atom> atoms) {
        if (atoms.empty()) throw InvalidParameter("discrete: no atoms");
        double total = 0.0;
        for (const Atom& a : atoms) {
            if (!std::isfinite(a.location) || !in_unit(a.location)) {
                throw InvalidParameter("discrete: atom location outside [0,1]");
            }
            if (!std::isfinite(a.probability) || a.probability < 0.0) {
                throw InvalidParameter("discrete: negative probability");
            }
            total += a.probability;
        }
        if (std::abs(total - 1.0) > kMassTolerance) {
            throw InvalidParameter("discrete: probabilities sum to " + std::to_string(total));
        }
        std::stable_sort(atoms.begin(), atoms.end(),
                         [](const Atom& a, const Atom& b) { return a.location < b.location; });
        for (const Atom& a : atoms) {
            if (!atoms_.empty() && atoms_.back().location == a.location) {
                atoms_.back().probability += a.probability;
            } else {
                atoms_.push_back(a);
            }
        }
        cum_.reserve(atoms_.size());
        double c = 0.0;
        for (const Atom& a : atoms_) cum_.push_back(c += a.probability);
    }

    const std::vector<Atom>& atoms() const { return atoms_; }

    double cdf(double x) const {
        double c = 0.0;
        for (std::size_t i = 0; i < atoms_.size() && atoms_[i].location <= x; ++i) c = cum_[i];
        return std::min(1.0, c);
    }

    double mean() const {
        double m = 0.0;
        for (const Atom& a : atoms_) m += a.location * a.probability;
        return m;
    }

    double quantile(double u) const {
        for (std::size_t i = 0; i < atoms_.size(); ++i) {
            if (u < cum_[i]) return atoms_[i].location;
        }
        return atoms_.back().location;
    }

private:
    std::vector<Atom> atoms_;
    std::vector<double> cum_;
};

/// A trader's valuation law: either a piecewise-constant density or a
/// finite set of atoms. Immutable; the first moment is cached.
class ValuationDistribution {
public:
    explicit ValuationDistribution(PiecewiseConstantDensity density)
        : law_(std::move(density)) {
        mean_ = std::get<PiecewiseConstantDensity>(law_).mean();
    }

    explicit ValuationDistribution(DiscreteDistribution discrete) : law_(std::move(discrete)) {
        mean_ = std::get<DiscreteDistribution>(law_).mean();
    }

    // Caches a closed-form mean when one is known; it must agree with the
    // segment/atom sum to within kMeanTolerance.
    template <typename Law>
    ValuationDistribution(Law law, double exact_mean) : ValuationDistribution(std::move(law)) {
        if (std::abs(exact_mean - mean_) > kMeanTolerance) {
            throw InvalidParameter("distribution: declared mean disagrees with computed mean");
        }
        mean_ = exact_mean;
    }

    bool is_density() const { return std::holds_alternative<PiecewiseConstantDensity>(law_); }
    bool is_discrete() const { return std::holds_alternative<DiscreteDistribution>(law_); }

    const PiecewiseConstantDensity& density() const {
        return std::get<PiecewiseConstantDensity>(law_);
    }
    const DiscreteDistribution& discrete() const { return std::get<DiscreteDistribution>(law_); }

    double mean() const { return mean_; }

    double cdf(double x) const {
        return std::visit([x](const auto& law) { return law.cdf(x); }, law_);
    }

    double quantile(double u) const {
        return std::visit([u](const auto& law) { return law.quantile(u); }, law_);
    }

    // +infinity for atoms, which have no density.
    double density_bound() const {
        if (is_discrete()) return std::numeric_limits<double>::infinity();
        return density().max_height();
    }

private:
    std::variant<PiecewiseConstantDensity, DiscreteDistribution> law_;
    double mean_ = 0.0;
};

inline double cdf(const ValuationDistribution& dist, double x) { return dist.cdf(x); }
inline double mean(const ValuationDistribution& dist) { return dist.mean(); }
inline double density_bound(const ValuationDistribution& dist) { return dist.density_bound(); }

// Inverse-CDF draw: consumes exactly one uniform from `rng`.
inline Valuation sample(const ValuationDistribution& dist, Rng& rng) {
    return dist.quantile(rng.uniform());
}

struct OptimalPrice {
    Price price = 0.0;
    double value = 0.0;
};

namespace detail {

inline double common_mean(const ValuationDistribution& dv, const ValuationDistribution& dw) {
    if (std::abs(dv.mean() - dw.mean()) > kEqualMeanTolerance) {
        throw InvalidInstance("expected_gft: trader means differ (" + std::to_string(dv.mean()) +
                              " vs " + std::to_string(dw.mean()) + ")");
    }
    return dv.mean();
}

inline void require_same_variant(const ValuationDistribution& dv, const ValuationDistribution& dw) {
    if (dv.is_density() != dw.is_density()) {
        throw UnsupportedCombination("expected_gft: cannot mix a density with a discrete law");
    }
}

inline double discrete_gft(Price p, const DiscreteDistribution& dv, const DiscreteDistribution& dw) {
    double total = 0.0;
    for (const Atom& a : dv.atoms()) {
        for (const Atom& b : dw.atoms()) {
            total += a.probability * b.probability * gain_from_trade(p, a.location, b.location);
        }
    }
    return total;
}

// E[g(p,V,W)] = int_0^p (F+G) + (m-p)(F+G)(p), evaluated exactly.
inline double density_gft(Price p, double m, const PiecewiseConstantDensity& dv,
                          const PiecewiseConstantDensity& dw) {
    return dv.cdf_integral(p) + dw.cdf_integral(p) + (m - p) * (dv.cdf(p) + dw.cdf(p));
}

}  // namespace detail

inline double expected_gft(Price p, const ValuationDistribution& dv, const ValuationDistribution& dw) {
    detail::require_same_variant(dv, dw);
    if (dv.is_discrete()) return detail::discrete_gft(p, dv.discrete(), dw.discrete());
    const double m = detail::common_mean(dv, dw);
    return detail::density_gft(p, m, dv.density(), dw.density());
}

inline OptimalPrice optimal_price_and_value(const ValuationDistribution& dv,
                                            const ValuationDistribution& dw) {
    detail::require_same_variant(dv, dw);
    if (dv.is_density()) {
        const double m = detail::common_mean(dv, dw);
        return {m, detail::density_gft(m, m, dv.density(), dw.density())};
    }
    // Expected GFT is piecewise constant between atoms and only jumps at
    // atoms, so atoms plus the midpoints of the gaps cover every level.
    std::vector<double> cands;
    for (const Atom& a : dv.discrete().atoms()) cands.push_back(a.location);
    for (const Atom& a : dw.discrete().atoms()) cands.push_back(a.location);
    std::sort(cands.begin(), cands.end());
    cands.erase(std::unique(cands.begin(), cands.end()), cands.end());
    const std::size_t n_atoms = cands.size();
    for (std::size_t i = 0; i + 1 < n_atoms; ++i) cands.push_back(0.5 * (cands[i] + cands[i + 1]));
    if (cands.front() > 0.0) cands.push_back(0.0);
    if (cands[n_atoms - 1] < 1.0) cands.push_back(1.0);
    std::sort(cands.begin(), cands.end());

    OptimalPrice best{cands.front(), -1.0};
    for (double p : cands) {
        const double v = detail::discrete_gft(p, dv.discrete(), dw.discrete());
        if (v > best.value) best = {p, v};
    }
    return best;
}

// Shortfall of price p against the per-round optimum; never negative.
inline double expected_regret_increment(Price p, const ValuationDistribution& dv,
                                        const ValuationDistribution& dw) {
    const OptimalPrice opt = optimal_price_and_value(dv, dw);
    return std::max(0.0, opt.value - expected_gft(p, dv, dw));
}

// ---------------------------------------------------------------------------
// Constructors
// ---------------------------------------------------------------------------

inline ValuationDistribution uniform_density(double lo, double hi) {
    if (!(0.0 <= lo && lo < hi && hi <= 1.0)) {
        throw InvalidParameter("uniform_density: need 0 <= lo < hi <= 1");
    }
    std::vector<double> bp{0.0};
    std::vector<double> h;
    if (lo > 0.0) {
        bp.push_back(lo);
        h.push_back(0.0);
    }
    bp.push_back(hi);
    h.push_back(1.0 / (hi - lo));
    if (hi < 1.0) {
        bp.push_back(1.0);
        h.push_back(0.0);
    }
    return ValuationDistribution(PiecewiseConstantDensity(std::move(bp), std::move(h)),
                                 0.5 * (lo + hi));
}

// Uniform law on [center - radius, center + radius] with the mean pinned to
// `center` exactly.
inline ValuationDistribution centered_uniform(double center, double radius) {
    if (!(radius > 0.0) || center - radius < -1e-15 || center + radius > 1.0 + 1e-15) {
        throw InvalidParameter("centered_uniform: support leaves [0,1]");
    }
    const double lo = std::max(0.0, center - radius);
    const double hi = std::min(1.0, center + radius);
    std::vector<double> bp{0.0};
    std::vector<double> h;
    if (lo > 0.0) {
        bp.push_back(lo);
        h.push_back(0.0);
    }
    bp.push_back(hi);
    h.push_back(1.0 / (hi - lo));
    if (hi < 1.0) {
        bp.push_back(1.0);
        h.push_back(0.0);
    }
    return ValuationDistribution(PiecewiseConstantDensity(std::move(bp), std::move(h)), center);
}

inline double spike_mean(double eps) { return 0.5 + eps / 196.0; }

inline double spike_half_width(double L) { return 1.0 / (14.0 * L); }

/// Hard density with a tall window of height L around 1/2 and a +-eps bump
/// on [1/7, 2/7] that shifts the mean by eps/196.
inline PiecewiseConstantDensity spike_density(double L, double eps) {
    if (!std::isfinite(L) || L < 2.0) throw InvalidParameter("spike_density: need L >= 2");
    if (!std::isfinite(eps) || std::abs(eps) > 1.0) {
        throw InvalidParameter("spike_density: need |eps| <= 1");
    }
    const double hw = spike_half_width(L);
    return PiecewiseConstantDensity(
        {0.0, 1.0 / 7.0, 3.0 / 14.0, 2.0 / 7.0, 3.0 / 7.0, 0.5 - hw, 0.5 + hw, 4.0 / 7.0, 1.0},
        {1.0, 1.0 - eps, 1.0 + eps, 1.0, 0.0, L, 0.0, 1.0});
}

inline ValuationDistribution spike_distribution(double L, double eps) {
    return ValuationDistribution(spike_density(L, eps), spike_mean(eps));
}

/// Three-atom law 1/2 + xi where xi has atoms -1/2, +-2 eps, 1/2 and the
/// middle atom's side is selected by theta.
inline DiscreteDistribution dirac_mixture(int theta, double eps) {
    if (theta != 0 && theta != 1) throw InvalidParameter("dirac_mixture: theta must be 0 or 1");
    if (!(eps > 0.0 && eps < 1.0 / 16.0)) {
        throw InvalidParameter("dirac_mixture: need eps in (0, 1/16)");
    }
    const double s = 1.0 - 2.0 * theta;
    const double middle = 0.5 + 2.0 * (1 - theta) * eps - 2.0 * theta * eps;
    return DiscreteDistribution({{0.0, 0.25 + s * eps}, {middle, 0.5}, {1.0, 0.25 - s * eps}});
}

inline ValuationDistribution dirac_mixture_distribution(int theta, double eps) {
    return ValuationDistribution(dirac_mixture(theta, eps), 0.5);
}

}  // namespace brokerage
