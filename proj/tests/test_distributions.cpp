#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "brokerage/distributions.hpp"
#include "brokerage/random.hpp"
#include "test_util.hpp"

using namespace brokerage;
using namespace brokerage::testing;

namespace {

// Brute-force E[g(p,V,W)] by midpoint rule on an n x n grid (independent of
// the closed-form representation used by the library).
double brute_force_gft(double p, const ValuationDistribution& dv, const ValuationDistribution& dw, int n) {
    const double h = 1.0 / n;
    std::vector<double> pv(n), pw(n);
    for (int i = 0; i < n; ++i) {
        pv[i] = dv.cdf((i + 1) * h) - dv.cdf(i * h);
        pw[i] = dw.cdf((i + 1) * h) - dw.cdf(i * h);
    }
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) total += pv[i] * pw[j] * gain_from_trade(p, (i + 0.5) * h, (j + 0.5) * h);
    }
    return total;
}

std::pair<ValuationDistribution, ValuationDistribution> random_equal_mean_pair(Rng& rng) {
    const std::size_t cells_v = 5 + static_cast<std::size_t>(rng.uniform() * 30);
    const std::size_t cells_w = 5 + static_cast<std::size_t>(rng.uniform() * 30);
    const auto hv = random_grid_heights(rng, cells_v, 3.0);
    const double m = grid_mean(hv);
    const auto hw = shift_mean_to(random_grid_heights(rng, cells_w, 3.0), m);
    ValuationDistribution dv(grid_density(hv));
    ValuationDistribution dw(grid_density(hw));
    return {dv, dw};
}

}  // namespace

TEST(PiecewiseConstantDensity, RejectsBadInput) {
    EXPECT_THROW(PiecewiseConstantDensity({0.0, 1.0}, {0.5}), InvalidParameter);
    EXPECT_THROW(PiecewiseConstantDensity({0.0, 0.5, 1.0}, {2.0, -0.0001}), InvalidParameter);
    EXPECT_THROW(PiecewiseConstantDensity({0.0, 0.5, 0.5, 1.0}, {1.0, 1.0, 1.0}), InvalidParameter);
    EXPECT_THROW(PiecewiseConstantDensity({0.1, 1.0}, {1.0 / 0.9}), InvalidParameter);
    EXPECT_THROW(PiecewiseConstantDensity({0.0, 1.0}, {1.0, 1.0}), InvalidParameter);
}

TEST(DiscreteDistribution, RejectsBadInput) {
    EXPECT_THROW(DiscreteDistribution({}), InvalidParameter);
    EXPECT_THROW(DiscreteDistribution({{1.5, 1.0}}), InvalidParameter);
    EXPECT_THROW(DiscreteDistribution({{0.2, 0.6}, {0.8, 0.6}}), InvalidParameter);
    EXPECT_THROW(DiscreteDistribution({{0.2, -0.1}, {0.8, 1.1}}), InvalidParameter);
}

TEST(DiscreteDistribution, MergesDuplicates) {
    DiscreteDistribution d({{0.7, 0.25}, {0.2, 0.5}, {0.7, 0.25}});
    ASSERT_EQ(d.atoms().size(), 2u);
    EXPECT_DOUBLE_EQ(d.atoms()[1].probability, 0.5);
    EXPECT_DOUBLE_EQ(d.cdf(0.2), 0.5);
    EXPECT_DOUBLE_EQ(d.cdf(0.19), 0.0);
}

TEST(ExpectedGft, UniformHalf) {
    const auto u = uniform_density(0.0, 1.0);
    EXPECT_NEAR(expected_gft(0.5, u, u), 0.25, 1e-15);
    EXPECT_NEAR(brute_force_gft(0.5, u, u, 2000), 0.25, 1e-6);
}

TEST(ExpectedGft, ZeroPriceContinuous) {
    const auto u = uniform_density(0.0, 1.0);
    EXPECT_EQ(expected_gft(0.0, u, u), 0.0);
    const auto s = spike_distribution(3.0, 0.4);
    EXPECT_EQ(expected_gft(0.0, s, s), 0.0);
}

TEST(ExpectedGft, DiracMixtureTheta0) {
    // atoms {0, 0.6, 1} with {0.3, 0.5, 0.2}: only (0,0.6) and (0,1) trade at 1/2
    const auto mu = dirac_mixture_distribution(0, 0.05);
    const double enumerated = 2 * 0.3 * 0.5 * 0.6 + 2 * 0.3 * 0.2 * 1.0;
    EXPECT_NEAR(expected_gft(0.5, mu, mu), enumerated, 1e-15);
    // interior piecewise value 1/4 + eps
    EXPECT_NEAR(expected_gft(0.5, mu, mu), 0.25 + 0.05, 1e-15);
}

TEST(ExpectedGft, Errors) {
    const auto u = uniform_density(0.0, 1.0);
    const auto mu = dirac_mixture_distribution(0, 0.05);
    EXPECT_THROW(expected_gft(0.5, u, mu), UnsupportedCombination);
    EXPECT_THROW(optimal_price_and_value(mu, u), UnsupportedCombination);
    const auto shifted = uniform_density(0.0, 0.9);
    EXPECT_THROW(expected_gft(0.5, u, shifted), InvalidInstance);
}

TEST(OptimalPrice, Examples) {
    const auto u = uniform_density(0.0, 1.0);
    const auto opt = optimal_price_and_value(u, u);
    EXPECT_DOUBLE_EQ(opt.price, 0.5);
    EXPECT_NEAR(opt.value, 0.25, 1e-15);

    for (double eps : {-0.7, 0.0, 0.3, 1.0}) {
        const auto s = spike_distribution(2.0, eps);
        EXPECT_NEAR(optimal_price_and_value(s, s).price, 0.5 + eps / 196.0, 1e-15);
    }

    const auto mu1 = dirac_mixture_distribution(1, 0.05);
    const auto o1 = optimal_price_and_value(mu1, mu1);
    EXPECT_NEAR(o1.value, 3.0 / 8.0 + 2 * 0.05 * 0.05, 1e-12);
    EXPECT_NEAR(o1.value, 0.38, 1e-12);
    const auto mu0 = dirac_mixture_distribution(0, 0.05);
    EXPECT_NEAR(optimal_price_and_value(mu0, mu0).value, 0.38, 1e-12);
}

TEST(OptimalPrice, DiscreteMatchesFineGrid) {
    Rng rng(77);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<Atom> a, b;
        double sa = 0, sb = 0;
        for (int i = 0; i < 4; ++i) {
            a.push_back({rng.uniform(), rng.uniform() + 0.05});
            b.push_back({rng.uniform(), rng.uniform() + 0.05});
            sa += a.back().probability;
            sb += b.back().probability;
        }
        for (auto& x : a) x.probability /= sa;
        for (auto& x : b) x.probability /= sb;
        double tot_a = 0, tot_b = 0;
        for (auto& x : a) tot_a += x.probability;
        for (auto& x : b) tot_b += x.probability;
        a[0].probability += 1.0 - tot_a;
        b[0].probability += 1.0 - tot_b;
        const ValuationDistribution dv{DiscreteDistribution(a)}, dw{DiscreteDistribution(b)};
        const auto opt = optimal_price_and_value(dv, dw);
        double grid_best = 0.0;
        for (int k = 0; k <= 10000; ++k) grid_best = std::max(grid_best, expected_gft(k / 10000.0, dv, dw));
        for (const auto& x : a) grid_best = std::max(grid_best, expected_gft(x.location, dv, dw));
        for (const auto& x : b) grid_best = std::max(grid_best, expected_gft(x.location, dv, dw));
        EXPECT_NEAR(opt.value, grid_best, 1e-12);
        EXPECT_NEAR(expected_gft(opt.price, dv, dw), opt.value, 1e-15);
    }
}

TEST(RegretIncrement, Examples) {
    const auto s = spike_distribution(2.0, 0.0);
    EXPECT_NEAR(expected_regret_increment(0.51, s, s), 2 * 0.01 * 0.01, 1e-15);
    const auto u = uniform_density(0.0, 1.0);
    EXPECT_EQ(expected_regret_increment(0.5, u, u), 0.0);
    EXPECT_NEAR(expected_gft(0.4, u, u), 0.24, 1e-15);
    EXPECT_NEAR(expected_regret_increment(0.4, u, u), 0.01, 1e-15);
}

TEST(SpikeDensity, Shape) {
    const auto f = spike_density(2.0, 0.0);
    EXPECT_NEAR(f.cdf(1.0), 1.0, 1e-15);
    const double lo = 0.5 - 1.0 / 28.0, hi = 0.5 + 1.0 / 28.0;
    EXPECT_NEAR(lo, 0.4642857142857143, 1e-15);
    EXPECT_NEAR(f.cdf(hi) - f.cdf(lo), 2.0 * (hi - lo), 1e-15);
    EXPECT_EQ(f.max_height(), 2.0);

    const auto g = spike_density(7.0, 1.0);
    EXPECT_NEAR(g.cdf(3.0 / 14.0) - g.cdf(1.0 / 7.0), 0.0, 1e-15);
    EXPECT_NEAR(g.cdf(2.0 / 7.0) - g.cdf(3.0 / 14.0), 2.0 / 14.0, 1e-15);
    EXPECT_EQ(g.max_height(), 7.0);

    EXPECT_THROW(spike_density(1.5, 0.0), InvalidParameter);
    EXPECT_THROW(spike_density(3.0, 1.01), InvalidParameter);
}

TEST(SpikeDensity, Mean) {
    Rng rng(5);
    for (int i = 0; i < 50; ++i) {
        const double L = 2.0 + 20.0 * rng.uniform();
        const double eps = -1.0 + 2.0 * rng.uniform();
        EXPECT_NEAR(spike_density(L, eps).mean(), 0.5 + eps / 196.0, 1e-15);
        EXPECT_NO_THROW(spike_distribution(L, eps));
    }
}

TEST(SpikeDensity, QuadraticRegretInsideWindow) {
    Rng rng(6);
    for (double L : {2.0, 3.0, 7.0, 20.0}) {
        for (int i = 0; i < 50; ++i) {
            const double eps = std::min(1.0, 7.0 / L) * (-1.0 + 2.0 * rng.uniform());
            const auto s = spike_distribution(L, eps);
            const double hw = 1.0 / (14.0 * L);
            const double p = 0.5 - hw + 2.0 * hw * rng.uniform();
            const double nu = 0.5 + eps / 196.0;
            EXPECT_NEAR(expected_regret_increment(p, s, s), L * (nu - p) * (nu - p), 1e-12);
        }
    }
}

TEST(DiracMixture, Atoms) {
    const auto d0 = dirac_mixture(0, 0.05);
    ASSERT_EQ(d0.atoms().size(), 3u);
    EXPECT_EQ(d0.atoms()[0].location, 0.0);
    EXPECT_NEAR(d0.atoms()[0].probability, 0.3, 1e-15);
    EXPECT_NEAR(d0.atoms()[1].location, 0.6, 1e-15);
    EXPECT_NEAR(d0.atoms()[1].probability, 0.5, 1e-15);
    EXPECT_NEAR(d0.atoms()[2].probability, 0.2, 1e-15);

    const auto d1 = dirac_mixture(1, 0.05);
    EXPECT_NEAR(d1.atoms()[0].probability, 0.2, 1e-15);
    EXPECT_NEAR(d1.atoms()[1].location, 0.4, 1e-15);
    EXPECT_NEAR(d1.atoms()[2].probability, 0.3, 1e-15);

    EXPECT_NEAR(d0.mean(), 0.5, 1e-15);
    EXPECT_NEAR(d1.mean(), 0.5, 1e-15);
    EXPECT_THROW(dirac_mixture(0, 0.0625), InvalidParameter);
    EXPECT_THROW(dirac_mixture(2, 0.01), InvalidParameter);
    EXPECT_THROW(dirac_mixture(0, 0.0), InvalidParameter);
}

TEST(ValuationDistribution, CdfInvariants) {
    Rng rng(8);
    std::vector<ValuationDistribution> all{uniform_density(0.0, 1.0), uniform_density(0.2, 0.3),
                                           centered_uniform(0.4, 0.1), spike_distribution(2.0, 0.5),
                                           spike_distribution(9.0, -0.7), dirac_mixture_distribution(0, 0.03),
                                           dirac_mixture_distribution(1, 0.06)};
    for (int i = 0; i < 5; ++i) all.emplace_back(grid_density(random_grid_heights(rng, 17, 4.0)));
    for (const auto& d : all) {
        EXPECT_DOUBLE_EQ(d.cdf(1.0), 1.0);
        EXPECT_GE(d.mean(), 0.0);
        EXPECT_LE(d.mean(), 1.0);
        double prev = 0.0;
        for (int k = 0; k <= 2000; ++k) {
            const double c = d.cdf(k / 2000.0);
            EXPECT_GE(c, prev);
            prev = c;
        }
    }
}

TEST(ValuationDistribution, DeclaredMeanMustAgree) {
    EXPECT_THROW(ValuationDistribution(spike_density(2.0, 0.1), 0.5), InvalidParameter);
}

TEST(Sampler, KolmogorovSmirnov) {
    const std::size_t n = 100000;
    const double crit = kKsCritical001 / std::sqrt(static_cast<double>(n));
    Rng rng(2024);
    const std::vector<ValuationDistribution> all{uniform_density(0.0, 1.0), centered_uniform(0.3, 0.2),
                                                 spike_distribution(2.0, 0.9), spike_distribution(12.0, -0.5),
                                                 dirac_mixture_distribution(0, 0.05),
                                                 dirac_mixture_distribution(1, 0.02)};
    for (const auto& d : all) {
        std::vector<double> xs(n);
        for (auto& x : xs) x = sample(d, rng);
        EXPECT_LE(ks_statistic(xs, d), crit);
    }
}

TEST(EqualMeanPair, ArgmaxAndQuadraticBound) {
    Rng rng(31337);
    for (int pair = 0; pair < 200; ++pair) {
        const auto [dv, dw] = random_equal_mean_pair(rng);
        const double m = dv.mean();
        const double L = std::max(dv.density_bound(), dw.density_bound());
        const double opt = optimal_price_and_value(dv, dw).value;
        double best = -1.0, arg = 0.0;
        for (int k = 0; k <= 1000; ++k) {
            const double p = k / 1000.0;
            const double g = expected_gft(p, dv, dw);
            if (g > best) best = g, arg = p;
            const double r = opt - g;
            EXPECT_GE(r, -1e-15);
            EXPECT_LE(r, L * (m - p) * (m - p) + 1e-9);
        }
        EXPECT_LE(std::abs(arg - m), 1e-3 + 1e-12) << "pair " << pair;
    }
}

TEST(EqualMeanPair, RepresentationMatchesBruteForce) {
    Rng rng(4);
    for (int i = 0; i < 5; ++i) {
        const auto [dv, dw] = random_equal_mean_pair(rng);
        const double p = rng.uniform();
        EXPECT_NEAR(expected_gft(p, dv, dw), brute_force_gft(p, dv, dw, 1500), 2e-3);
    }
}

TEST(EqualMeanPair, RepresentationMatchesMonteCarlo) {
    Rng rng(99);
    Rng draws(100);
    const int n = 100000;
    for (int i = 0; i < 20; ++i) {
        const auto [dv, dw] = random_equal_mean_pair(rng);
        const double p = rng.uniform();
        double s = 0.0, s2 = 0.0;
        for (int k = 0; k < n; ++k) {
            const double g = gain_from_trade(p, sample(dv, draws), sample(dw, draws));
            s += g;
            s2 += g * g;
        }
        const double mean = s / n;
        const double se = std::sqrt(std::max(0.0, s2 / n - mean * mean) / n);
        EXPECT_LE(std::abs(mean - expected_gft(p, dv, dw)), 4 * se + 1e-12);
    }
}
