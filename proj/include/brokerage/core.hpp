#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "brokerage/errors.hpp"

namespace brokerage {

// Prices, valuations and market values all live in [0, 1]; plain doubles
// keep the arithmetic readable, and the constructors below enforce ranges.
using Price = double;
using Valuation = double;

using Context = std::vector<double>;
using WeightVector = std::vector<double>;

enum class FeedbackKind { full, two_bit };

inline const char* to_string(FeedbackKind kind) {
    return kind == FeedbackKind::full ? "full" : "two_bit";
}

struct FullFeedback {
    Valuation v = 0.0;
    Valuation w = 0.0;
};

struct TwoBitFeedback {
    bool d_bit = false;  // 1{P <= V}
    bool e_bit = false;  // 1{P <= W}
};

using Feedback = std::variant<FullFeedback, TwoBitFeedback>;

inline FeedbackKind kind_of(const Feedback& fb) {
    return std::holds_alternative<FullFeedback>(fb) ? FeedbackKind::full : FeedbackKind::two_bit;
}

inline bool in_unit(double x) { return x >= 0.0 && x <= 1.0; }

// Surplus realized when the posted price sits between the two valuations.
// Both inequalities are closed: a price equal to a valuation still trades.
inline double gain_from_trade(Price p, Valuation v, Valuation w) {
    const double lo = std::min(v, w);
    const double hi = std::max(v, w);
    return (lo <= p && p <= hi) ? hi - lo : 0.0;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw ConfigError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                          std::to_string(b.size()));
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double market_value(std::span<const double> context, std::span<const double> phi) {
    return dot(context, phi);
}

inline Price clamp_unit(double x) {
    if (!std::isfinite(x)) throw NumericError("clamp_unit: non-finite input");
    return std::min(1.0, std::max(0.0, x));
}

inline void check_unit_vector(std::span<const double> x, const char* what) {
    for (double c : x) {
        if (!std::isfinite(c) || !in_unit(c)) {
            throw InvalidParameter(std::string(what) + " coordinate outside [0,1]");
        }
    }
}

}  // namespace brokerage
