#include <gtest/gtest.h>

#include <cmath>

#include "levyreg/tail.hpp"

using namespace levyreg;

namespace {

const LevyModel cpp{CompoundPoissonExp{1.0, 1.0, 2.0}};
const LevyModel cpp_fast{CompoundPoissonExp{1.5, 2.0, 1.5}};
const LevyModel bm{BrownianDrift{1.0, 1.0}};
const LevyModel mixed{CppPlusBm{0.5, 1.0, 1.0, 2.0}};

RegulationPolicy clearing_policy(double L, double K, double rate) {
    return {Reset{same_for_all_flags(Exponential{rate})}, InputRule::LowIfHighSup, Thresholds(L, K), 1.0};
}

// Pareto jumps, stable: lambda E J = 0.5 * 5/3 < 1.5.
PathModel pareto_model() { return PathModel{0.0, 1.5, 0.5, Pareto{1.0, 2.5}}; }

}  // namespace

TEST(CramerRate, SolvesTheInputExponent) {
    for (const auto* m : {&cpp, &cpp_fast, &bm, &mixed})
        for (double q : {0.5, 1.0, 5.0}) {
            const double g = cramer_rate(*m, q);
            EXPECT_GT(g, 0.0);
            EXPECT_NEAR(psi_x(PathModel::from(*m), g), q, 1e-9 * q) << m->describe();
        }
    EXPECT_NEAR(cramer_rate(cpp, 1.0), std::sqrt(2.0), 1e-12);
}

TEST(CramerRate, IncreasingInQ) {
    for (const auto* m : {&cpp, &bm, &mixed}) {
        double prev = 0.0;
        for (int k = 1; k <= 40; ++k) {
            const double g = cramer_rate(*m, 0.25 * k);
            EXPECT_GT(g, prev);
            prev = g;
        }
    }
}

TEST(SupTailCoefficient, MatchesDirectLimit) {
    for (const auto* m : {&cpp, &cpp_fast, &mixed}) {
        const double g = cramer_rate(*m, 1.0);
        const double direct = std::exp(g * 30.0) * sup_tail(*m, 1.0, 30.0);
        EXPECT_NEAR(sup_tail_coefficient(*m, 1.0), direct, 1e-8 * direct) << m->describe();
    }
}

TEST(Regime, Exclusivity) {
    EXPECT_EQ(classify_regime(pareto_model(), 1.0), TailRegime::ConvolutionEquivalent);
    for (const auto* m : {&cpp, &bm, &mixed}) EXPECT_EQ(classify_regime(PathModel::from(*m), 1.0), TailRegime::Cramer);
    EXPECT_EQ(classify_regime(PathModel{0.0, 1.0, 1.0, Uniform{0.0, 1.0}}, 1.0), TailRegime::Cramer);
    EXPECT_EQ(classify_regime(PathModel{0.0, 1.0, 0.0, PointMass{0.0}}, 1.0), TailRegime::Neither);
}

TEST(Regime, OrderingOfTails) {
    // alpha_0 = 0 (Pareto) against alpha_1 = 2 (exponential): Pi_1 = o(Pi_0).
    const PathModel light{0.0, 1.0, 1.0, Exponential{2.0}};
    EXPECT_LT(levy_tail(light, 10.0) / levy_tail(pareto_model(), 10.0), 1e-3);
    double prev = 1.0;
    for (double x : {5.0, 10.0, 20.0, 40.0}) {
        const double r = levy_tail(light, x) / levy_tail(pareto_model(), x);
        EXPECT_LT(r, prev);
        prev = r;
    }
}

TEST(CramerTail, CaseSplit) {
    SimConfig cfg;
    cfg.n_cycles = 20000;
    const auto pol = clearing_policy(0.5, 3.0, 1.5);
    const auto chain = run_chain(cpp_fast, cpp, pol, cfg);
    const auto r = cramer_tail(cpp_fast, cpp, 1.0, chain);
    ASSERT_LT(r.gamma[0], r.gamma[1]);
    EXPECT_EQ(r.rate, r.gamma[0]);
    EXPECT_EQ(r.constant, r.C[0]);
    const auto same = cramer_tail(cpp, cpp, 1.0, chain);
    EXPECT_DOUBLE_EQ(same.constant, same.C[0] + same.C[1]);
}

TEST(CramerTail, TransformAndSampleRoutesAgree) {
    // Clearing with Exp(mu) resets: E[e^{-Phi F1}; F2 = i] = P(F2 = i) mu / (mu + Phi).
    SimConfig cfg;
    cfg.n_cycles = 100000;
    const double mu = 1.5;
    const auto chain = run_chain(cpp, cpp, clearing_policy(0.5, 3.0, mu), cfg);
    const auto r = cramer_tail(cpp, cpp, 1.0, chain);
    const double ph = phi(cpp, 1.0);
    for (int i = 0; i < 2; ++i) {
        const auto p = chain.estimate([i](const ChainSample& c) { return c.env_next == i ? 1.0 : 0.0; });
        const double via_transform = p.mean * mu / (mu + ph);
        EXPECT_LE(std::abs(r.below[i].mean - via_transform), 3.0 * r.below[i].se + 1e-3) << i;
    }
}

TEST(CramerTail, SimulatedSlope) {
    SimConfig cfg;
    cfg.n_cycles = 300000;
    const auto chain = run_chain(cpp, cpp, clearing_policy(0.5, 3.0, 1.5), cfg);
    std::vector<double> grid;
    for (int i = 0; i <= 60; ++i) grid.push_back(0.1 * i);
    const auto t = empirical_tail(chain.workloads(), grid);
    const auto fit = fit_log_slope(t, 1e-2, 1e-3);
    EXPECT_NEAR(fit.slope, -std::sqrt(2.0), 0.05 * std::sqrt(2.0));
}

TEST(CramerTail, OvershootConstantMatchesSimulation) {
    SimConfig cfg;
    cfg.n_cycles = 1000000;
    const auto chain = run_chain(cpp, cpp, clearing_policy(0.5, 3.0, 3.0), cfg);
    const auto r = cramer_tail(cpp, cpp, 1.0, chain);
    const std::vector<double> grid{3.0, 4.0, 5.0};
    const auto t = empirical_tail(chain.workloads(), grid);
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double scaled = t.surv[g] * std::exp(r.rate * grid[g]);
        EXPECT_NEAR(scaled, r.constant_full, 0.1 * r.constant_full) << grid[g];
    }
    EXPECT_LT(r.constant, r.constant_full);
    for (int i = 0; i < 2; ++i) EXPECT_GE(r.overshoot[i].mean, r.below[i].mean);
}

TEST(CramerTail, MomentCondition) {
    EXPECT_TRUE(cramer_moment_finite(clearing_policy(0.5, 3.0, 1.5), std::sqrt(2.0)));
    EXPECT_FALSE(cramer_moment_finite(clearing_policy(0.5, 3.0, 1.2), std::sqrt(2.0)));
    const RegulationPolicy tcp{Multiply{0.5}, InputRule::HighIfLow, Thresholds::unbounded(), 1.0};
    EXPECT_TRUE(cramer_moment_finite(tcp, 10.0));
}

TEST(StationaryIdentity, ClearingPolicy) {
    SimConfig cfg;
    cfg.n_cycles = 100000;
    const auto chain = run_chain(cpp, cpp_fast, clearing_policy(0.5, 3.0, 1.5), cfg);
    std::vector<double> grid;
    for (int i = 0; i <= 12; ++i) grid.push_back(0.5 * i);
    const auto r = stationary_identity_check(chain, PathModel::from(cpp), PathModel::from(cpp_fast), 1.0, grid);
    EXPECT_LT(r.ks, r.ks_critical);
    EXPECT_TRUE(r.sandwich_ok);
    for (std::size_t g = 0; g < grid.size(); ++g) EXPECT_LE(r.lower[g], r.upper[g]);
}

TEST(StationaryIdentity, DetectsAWrongModel) {
    SimConfig cfg;
    cfg.n_cycles = 100000;
    const auto chain = run_chain(cpp, cpp_fast, clearing_policy(0.5, 3.0, 1.5), cfg);
    const std::vector<double> grid{0.5, 1.0};
    const auto r = stationary_identity_check(chain, PathModel::from(cpp), PathModel::from(cpp), 1.0, grid);
    EXPECT_GT(r.ks, r.ks_critical);
}

TEST(HeavyTail, SubexponentialConstants) {
    SimConfig cfg;
    cfg.n_cycles = 20000;
    const PathModel pm = pareto_model();
    const auto chain = run_chain(pm, pm, clearing_policy(0.5, 3.0, 2.0), cfg);
    HeavyTailSpec spec{{pm, pm}, {0.0, 0.0}, {0.0, 0.0}, 1.0};
    const auto r = heavy_tail_constants(spec, chain);
    for (int i = 0; i < 2; ++i) EXPECT_NEAR(r.D[i], r.p_env[i] / spec.q, 1e-12);
    EXPECT_NEAR(r.p_env[0] + r.p_env[1], 1.0, 1e-12);
    EXPECT_NEAR(r.predictor(10.0), (r.D[0] + r.D[1]) * levy_tail(pm, 10.0), 1e-15);
    EXPECT_GT(r.x_min, 0.0);
}

TEST(HeavyTail, HypothesisError) {
    SimConfig cfg;
    cfg.n_cycles = 5000;
    const auto chain = run_chain(cpp, cpp, clearing_policy(0.5, 3.0, 2.0), cfg);
    // psi_x(alpha) >= q for alpha past the Cramer root.
    HeavyTailSpec spec{{PathModel::from(cpp), PathModel::from(cpp)}, {1.9, 1.9}, {0.0, 0.0}, 1.0};
    EXPECT_THROW(heavy_tail_constants(spec, chain), DomainError);
}

TEST(HeavyTail, ParetoPlateau) {
    SimConfig cfg;
    cfg.n_cycles = 2000000;
    const PathModel pm = pareto_model();
    const RegulationPolicy pol{Reset{same_for_all_flags(Exponential{2.0})}, InputRule::ConstantLow,
                               Thresholds::unbounded(0.0), 1.0};
    const auto chain = run_chain(pm, pm, pol, cfg);
    HeavyTailSpec spec{{pm, pm}, {0.0, 0.0}, {0.0, 0.0}, 1.0};
    const auto r = heavy_tail_constants(spec, chain);
    const std::vector<double> grid{10.0, 20.0, 30.0};
    const auto t = empirical_tail(chain.workloads(), grid);
    // Largest grid point with at least 200 exceedances.
    std::size_t g = 0;
    for (std::size_t k = 0; k < grid.size(); ++k)
        if (t.surv[k] * chain.samples.size() >= 200) g = k;
    const double ratio = t.surv[g] / levy_tail(pm, grid[g]);
    EXPECT_NEAR(ratio, r.D[0] + r.D[1], 0.15 * (r.D[0] + r.D[1])) << grid[g];
}

TEST(FitLogSlope, NeedsThreePoints) {
    TailEstimate t;
    t.x = {1.0, 2.0};
    t.surv = {5e-3, 2e-3};
    t.se = {0.0, 0.0};
    EXPECT_THROW(fit_log_slope(t), DomainError);
}
