#include <gtest/gtest.h>

#include <cmath>

#include "levyreg/stationary.hpp"
#include "support/clearing_displays.hpp"

using namespace levyreg;
using levyreg::fixtures::TwoTerm;
using levyreg::fixtures::z_closed;

namespace {

const LevyModel cpp{CompoundPoissonExp{1.0, 1.0, 2.0}};
const LevyModel cpp_fast{CompoundPoissonExp{1.5, 2.0, 1.5}};
const LevyModel bm{BrownianDrift{1.0, 1.0}};

std::array<double, 8> clearing_rates() { return {1.5, 1.0, 2.0, 0.8, 1.2, 0.7, 3.0, 1.1}; }

}  // namespace

TEST(MixedKernels, AgreeWithClosedFormForExponentialCorrections) {
    const Thresholds th(0.5, 3.0);
    for (const auto& [model, c] : {std::pair{cpp, TwoTerm(1.0, 1.0, 2.0, 1.0)},
                                   std::pair{cpp_fast, TwoTerm(1.5, 2.0, 1.5, 1.0)}}) {
        const auto w = scale_w(model, 1.0);
        for (double m : {1.5, 0.7})
            for (double s : {0.5, 1.0, 2.0}) {
                const auto expected = z_closed(c, 0.5, 3.0, m, s);
                for (int k = 0; k < 4; ++k)
                    EXPECT_NEAR(mixed_kernel_lst(w, th, Exponential{m}, k, s), expected[k], 1e-8)
                        << "k=" << k << " s=" << s << " m=" << m;
            }
    }
}

TEST(MixedKernels, PointMassIsKernelEvaluation) {
    const Thresholds th(0.5, 3.0);
    const auto w = scale_w(cpp, 1.0);
    const auto k = kernels(w, th, 1.3);
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(mixed_kernel_lst(w, th, PointMass{1.3}, i, 0.7), k[i].lst(0.7));
}

TEST(AssembleEquation, ColumnsAreStochasticAtZero) {
    const RegulationPolicy clearing{Reset{same_for_all_flags(Exponential{1.5})}, InputRule::LowIfHighSup,
                                    Thresholds(0.5, 3.0), 1.0};
    const RegulationPolicy identity{Multiply{1.0}, InputRule::NeverChange, Thresholds::unbounded(0.0), 1.0};
    for (const auto& pol : {clearing, identity}) {
        const auto eq = assemble_transform_equation(cpp, cpp_fast, pol, 0.0);
        std::array<double, 8> col{};
        for (const auto& t : eq.terms) col[t.source.index()] += t.coef;
        for (double c : col) EXPECT_NEAR(c, 1.0, 1e-10);
    }
}

TEST(AssembleEquation, RejectsUnsupportedPolicies) {
    const RegulationPolicy add{AddImpulse{same_for_all_flags(Exponential{1.0})}, InputRule::NeverChange,
                               Thresholds::unbounded(0.0), 1.0};
    EXPECT_THROW(assemble_transform_equation(cpp, cpp, add, 0.5), DomainError);
    const RegulationPolicy mult_k{Multiply{0.5}, InputRule::NeverChange, Thresholds(0.0, 2.0), 1.0};
    EXPECT_THROW(assemble_transform_equation(cpp, cpp, mult_k, 0.5), DomainError);
    const RegulationPolicy below_k{Reset{same_for_all_flags(Exponential{1.0})}, InputRule::HighIffBelowK,
                                   Thresholds(0.5, 2.0), 1.0};
    EXPECT_THROW(assemble_transform_equation(cpp, cpp, below_k, 0.5), DomainError);
}

TEST(SolveClearing, ProbabilitiesAndTransformInvariants) {
    const auto st = solve_clearing(cpp, cpp_fast, Thresholds(0.5, 3.0), clearing_rates(), 1.0);
    double sum = 0.0;
    for (int k = 0; k < 8; ++k) {
        EXPECT_GE(st.probs[k], 0.0);
        EXPECT_LE(st.probs[k], 1.0);
        EXPECT_NEAR(st.v[k](0.0), st.probs[k], 1e-10);
        sum += st.probs[k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-10);
    for (int k = 0; k < 8; ++k) {
        double prev = st.v[k](0.0);
        for (int i = 1; i <= 20; ++i) {
            const double cur = st.v[k](i * 1.0);
            EXPECT_GE(cur, -1e-12);
            EXPECT_LE(cur, prev + 1e-12);
            prev = cur;
        }
    }
}

TEST(SolveClearing, SatisfiesTheTransformEquation) {
    const Thresholds th(0.5, 3.0);
    const auto rates = clearing_rates();
    const auto st = solve_clearing(cpp, cpp_fast, th, rates, 1.0);
    FlagDistributions b;
    for (int k = 0; k < 8; ++k) b[k] = Exponential{rates[k]};
    const RegulationPolicy pol{Reset{b}, InputRule::LowIfHighSup, th, 1.0};
    for (double s : {0.0, 0.5, 2.0}) {
        const auto eq = assemble_transform_equation(cpp, cpp_fast, pol, s);
        for (int k = 0; k < 8; ++k) {
            const auto f = EnvFlags::from_index(k);
            EXPECT_NEAR(st(f, s), eq.rhs(f, st), 1e-10);
        }
    }
}

TEST(SolveClearing, SingleEnvironmentReachability) {
    // Input switches to env 0 only after a high supremum; env-0 states with j_e = 1 are unreachable.
    const auto st = solve_clearing(cpp, cpp, Thresholds(0.5, 3.0), clearing_rates(), 1.0);
    double env1 = 0.0;
    for (int k = 0; k < 8; ++k)
        if (EnvFlags::from_index(k).j_e == 1) env1 += st.probs[k];
    EXPECT_GT(env1, 0.5);
}

TEST(SolveClearing, RejectsInfiniteK) {
    EXPECT_THROW(solve_clearing(cpp, cpp, Thresholds::unbounded(0.5), clearing_rates(), 1.0), DomainError);
}

TEST(SolveTcp, NormalizationAndFunctionalEquation) {
    const auto st = solve_tcp(cpp, cpp_fast, 0.5, 1.0);
    EXPECT_NEAR(st.total(0.0), 1.0, 1e-10);
    const double delta = 0.5, q = 1.0;
    const double ph0 = phi(cpp, q), ph1 = phi(cpp_fast, q);
    auto v = [&](int i, int e, double s) { return st.v[2 * i + e](s); };
    for (double s : {0.3, 1.0, 3.0}) {
        const double g0 = q / (q - psi(cpp, s)), g1 = q / (q - psi(cpp_fast, s));
        const double r00 = v(0, 0, s) - g0 * (v(0, 0, delta * s) + v(0, 1, delta * s) - v(0, 0, delta * ph0) -
                                              v(0, 1, delta * ph0));
        EXPECT_LE(std::abs(r00), 1e-8);
        const double r01 = v(0, 1, s) - g1 * (v(1, 0, delta * s) + v(1, 1, delta * s) - v(1, 0, delta * ph1) -
                                              v(1, 1, delta * ph1));
        EXPECT_LE(std::abs(r01), 1e-8);
        const double k0 = q / ph0 * (s - ph0) / (psi(cpp, s) - q);
        EXPECT_NEAR(v(1, 0, s), k0 * (v(0, 0, delta * ph0) + v(0, 1, delta * ph0)), 1e-10);
    }
}

TEST(SolveTcp, InfiniteProductFormOfV00) {
    // v00(s) = prod_{j>=0} g0(d^j s) v00(0) + sum_k prod_{j<=k} g0(d^j s) (v01(d^{k+1} s) - c0)
    const double delta = 0.6, q = 1.0;
    const auto st = solve_tcp(cpp, cpp_fast, delta, q);
    const double ph0 = phi(cpp, q);
    const double c0 = st.v[0](delta * ph0) + st.v[1](delta * ph0);
    EXPECT_NEAR(st.v[1](0.0), c0, 1e-10);
    for (double s : {0.4, 1.5}) {
        double prod = 1.0, series = 0.0, t = s;
        for (int k = 0; k < 200; ++k) {
            prod *= q / (q - psi(cpp, t));
            t *= delta;
            series += prod * (st.v[1](t) - c0);
        }
        EXPECT_NEAR(st.v[0](s), prod * st.v[0](0.0) + series, 1e-9) << s;
    }
}

TEST(SolveTcp, TruncationStability) {
    const auto a = solve_tcp(cpp, cpp_fast, 0.5, 1.0);
    const auto b = solve_tcp(cpp, cpp_fast, 0.5, 1.0, TcpTruncation{0, 1e-14, 10});
    EXPECT_LE(std::abs(a.v[0](1.0) - b.v[0](1.0)), 1e-10);
}

TEST(SolveTcp, MonotoneAndNonnegative) {
    const auto st = solve_tcp(cpp, bm, 0.5, 1.0);
    for (int k = 0; k < 4; ++k) {
        double prev = st.v[k](0.0);
        EXPECT_NEAR(prev, st.probs[k], 1e-12);
        for (int i = 1; i <= 100; ++i) {
            const double s = 0.2 * i + 1e-3;
            const double cur = st.v[k](s);
            EXPECT_GE(cur, -1e-10);
            EXPECT_LE(cur, prev + 1e-10);
            prev = cur;
        }
    }
}

TEST(SolveTcp, PoleOnTrajectoryIsADomainError) {
    const auto st = solve_tcp(cpp, cpp, 0.5, 1.0);
    EXPECT_THROW(st.v[0](phi(cpp, 1.0)), DomainError);
    EXPECT_THROW(solve_tcp(cpp, cpp, 1.0, 1.0), DomainError);
}

TEST(SolveMultiplicative, IdentityPolicySatisfiedByReflectedStationaryLaw) {
    // F1 = u: the embedded chain samples the stationary reflected process,
    // so V(s) = psi'(0) s / psi(s) solves the assembled equation.
    const RegulationPolicy pol{Multiply{1.0}, InputRule::ConstantLow, Thresholds::unbounded(0.0), 1.0};
    const double c = psi_prime(cpp, 0.0);
    StationaryTransform cand;
    cand.v[0] = [&](double s) { return s == 0.0 ? 1.0 : c * s / psi(cpp, s); };
    for (double s : {0.3, 1.0, 2.0, 5.0}) {
        const auto eq = assemble_transform_equation(cpp, cpp_fast, pol, s);
        double rhs = 0.0;
        for (int k = 0; k < 8; ++k) rhs += eq.rhs(EnvFlags::from_index(k), cand);
        EXPECT_NEAR(rhs, cand.total(s), 1e-12) << s;
    }
    EXPECT_THROW(solve_multiplicative(cpp, cpp_fast, pol), DomainError);
}

TEST(SolveMultiplicative, StrongShrinkApproachesOneCycleLaw) {
    // delta -> 0: every cycle restarts from ~0, so U ~ Y(e_q) from 0 (the sup law).
    const RegulationPolicy pol{Multiply{1e-6}, InputRule::ConstantLow, Thresholds::unbounded(0.0), 1.0};
    const auto st = solve_multiplicative(cpp, cpp, pol);
    for (double s : {0.5, 2.0}) EXPECT_NEAR(st.total(s), sup_law_lst(cpp, 1.0, s), 1e-5);
}

TEST(SolveInventory, NormalizationAndIdentity) {
    const auto inv = solve_inventory(cpp, 1.0, PointMass{2.0}, 1.0);
    EXPECT_NEAR(inv.w(0.0), 1.0, 1e-12);
    EXPECT_NEAR(inv.w(1e-7), 1.0, 1e-6);
    for (double s : {0.5, 1.0, 2.0}) EXPECT_NEAR(inv.w(s), inv.v0(s) + inv.v1(s) * std::exp(-2.0 * s), 1e-10);
    EXPECT_NEAR(inv.v0(0.0) + inv.v1(0.0), 1.0, 1e-10);
    EXPECT_NEAR(inv.w(inv.phi), inv.w_at_phi, 1e-10);
}

TEST(SolveInventory, MeanRoutesAgree) {
    for (double L : {0.0, 0.5, 1.0, 2.0}) {
        const auto inv = solve_inventory(cpp, L, PointMass{L + 1.0}, 1.0);
        EXPECT_NEAR(inv.mean_y, inv.mean_y_fd, 1e-6);
    }
    const auto invb = solve_inventory(bm, 1.0, ShiftedExponential{1.0, 2.0}, 2.0);
    EXPECT_NEAR(invb.mean_y, invb.mean_y_fd, 1e-6);
}

TEST(SolveInventory, TransformsAreMonotone) {
    const auto inv = solve_inventory(cpp, 1.0, ShiftedExponential{1.0, 1.0}, 1.0);
    double pw = inv.w(0.0), p0 = inv.v0(0.0), p1 = inv.v1(0.0);
    for (int i = 1; i <= 100; ++i) {
        const double s = 0.2 * i;
        EXPECT_LE(inv.w(s), pw + 1e-12);
        EXPECT_LE(inv.v0(s), p0 + 1e-10);
        EXPECT_LE(inv.v1(s), p1 + 1e-12);
        EXPECT_GE(inv.v0(s), -1e-10);
        pw = inv.w(s);
        p0 = inv.v0(s);
        p1 = inv.v1(s);
    }
}

TEST(SolveInventory, Preconditions) {
    EXPECT_THROW(solve_inventory(LevyModel{CompoundPoissonExp{1.0, 3.0, 2.0}}, 1.0, PointMass{2.0}, 1.0),
                 DomainError);
    EXPECT_THROW(solve_inventory(cpp, 1.0, PointMass{0.5}, 1.0), DomainError);
    EXPECT_THROW(solve_inventory(cpp, 1.0, Pareto{2.0, 3.0}, 1.0), DomainError);
}

TEST(InvertLst, ExponentialCdf) {
    const std::vector<double> x{0.5, 1.0, 2.0};
    const auto r = invert_lst([](double s) { return 1.0 / (1.0 + s); }, x);
    EXPECT_NEAR(r.values[1], 1.0 - std::exp(-1.0), 1e-6);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(r.values[i], 1.0 - std::exp(-x[i]), 1e-6);
    EXPECT_FALSE(r.oscillation_warning);
}

TEST(InvertLst, PointMassAtZero) {
    const std::vector<double> x{0.0, 0.1, 1.0, 10.0};
    const auto r = invert_lst([](double) { return 1.0; }, x);
    for (double v : r.values) EXPECT_NEAR(v, 1.0, 1e-9);
}

TEST(InvertLst, ReflectedStationaryLawWithAtom) {
    // 0.5 (2 + s)/(1 + s): atom 1/2 at zero plus (1/2) Exp(1).
    const std::vector<double> x{0.25, 1.0, 3.0};
    const auto r = invert_lst([](double s) { return 0.5 * (2.0 + s) / (1.0 + s); }, x);
    for (std::size_t i = 0; i < x.size(); ++i) EXPECT_NEAR(r.values[i], 1.0 - 0.5 * std::exp(-x[i]), 1e-6);
}

TEST(InvertLst, SubProbabilityAndMonotone) {
    const auto st = solve_clearing(cpp, cpp_fast, Thresholds(0.5, 3.0), clearing_rates(), 1.0);
    std::vector<double> x;
    for (int i = 1; i <= 20; ++i) x.push_back(0.25 * i);
    for (int k = 0; k < 8; ++k) {
        const auto r = invert_lst(st.v[k], x);
        for (std::size_t i = 0; i < x.size(); ++i) {
            EXPECT_GE(r.values[i], 0.0);
            EXPECT_LE(r.values[i], st.probs[k] + 1e-12);
            if (i > 0) {
                EXPECT_GE(r.values[i], r.values[i - 1]);
            }
        }
    }
}
