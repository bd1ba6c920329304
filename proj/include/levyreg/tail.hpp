#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "levyreg/errors.hpp"
#include "levyreg/fluctuation.hpp"
#include "levyreg/levy_model.hpp"
#include "levyreg/scale.hpp"
#include "levyreg/simulator.hpp"
#include "levyreg/stats.hpp"

// Tail asymptotics of the stationary workload U.

namespace levyreg {

enum class TailRegime { ConvolutionEquivalent, Cramer, Neither };

inline std::string to_string(TailRegime r) {
    switch (r) {
        case TailRegime::ConvolutionEquivalent: return "convolution_equivalent";
        case TailRegime::Cramer: return "cramer";
        case TailRegime::Neither: return "neither";
    }
    return "?";
}

/// log E e^{alpha X(1)}; +inf where the jump mgf diverges.
inline double psi_x(const PathModel& m, double alpha) {
    double v = 0.5 * m.sigma * m.sigma * alpha * alpha - m.drift * alpha;
    if (m.lambda > 0.0) v += m.lambda * (m.jump.mgf(alpha) - 1.0);
    return v;
}

/// Levy tail Pi(x, inf) = lambda P(J > x).
inline double levy_tail(const PathModel& m, double x) { return m.lambda > 0.0 ? m.lambda * m.jump.survival(x) : 0.0; }

/// Cramer root gamma > 0 with psi_x(gamma) = q, the decay rate of P(sup X(e_q) > x).
/// Equals minus the largest negative root of the dual psi = q.
inline double cramer_rate(const LevyModel& m, double q) {
    const auto w = scale_w(m, q);
    if (w.terms().size() < 2) throw DomainError("cramer_rate: no negative root");
    return -w.terms()[1].rate;
}

/// lim_{x -> inf} e^{gamma x} P(sup X(e_q) > x): the coefficient of the dominant
/// decaying term of the exact sup tail.
inline double sup_tail_coefficient(const LevyModel& m, double q) {
    const auto w = scale_w(m, q);
    if (w.terms().size() < 2) throw DomainError("sup_tail_coefficient: no negative root");
    const auto& t = w.terms()[1];
    return t.coef * q * (t.rate / w.phi() - 1.0) / (-t.rate);
}

/// Which tail theorem's hypotheses hold for input model m at rate q.
inline TailRegime classify_regime(const PathModel& m, double q) {
    if (m.lambda > 0.0 && std::holds_alternative<Pareto>(m.jump.kind())) {
        // Regularly varying jumps: S^(0) with psi_x(0) = 0 < q; no Cramer root.
        return TailRegime::ConvolutionEquivalent;
    }
    // Light-tailed: psi_x is finite near 0 and convex; look for psi_x(gamma) = q.
    double hi = 1.0;
    for (int k = 0; k < 200; ++k, hi *= 2.0) {
        const double v = psi_x(m, hi);
        if (!std::isfinite(v) || v >= q) return TailRegime::Cramer;
    }
    return TailRegime::Neither;
}

/// Decomposition of U from an embedded-chain run.
struct IdentityCheck {
    double ks = 0.0;
    double ks_critical = 0.0;
    std::vector<double> x;
    std::vector<double> surv;   // empirical P(U > x)
    std::vector<double> se;
    std::vector<double> upper;  // bound with P(X + F1 > x) plus the sup term
    std::vector<double> lower;  // sup term alone
    bool sandwich_ok = true;
    bool passed() const { return ks < ks_critical && sandwich_ok; }
};

namespace detail {

struct CycleDraws {
    std::array<std::vector<CycleSample>, 2> c;
};

inline CycleDraws draw_cycles(const std::array<PathModel, 2>& models, double q, std::size_t n, std::uint64_t seed,
                              double step) {
    CycleDraws d;
    for (int i = 0; i < 2; ++i) {
        Rng rng(seed, 1000 + i);
        d.c[i].reserve(n);
        for (std::size_t k = 0; k < n; ++k) d.c[i].push_back(simulate_cycle(models[i], q, 0.0, rng, step));
    }
    return d;
}

}  // namespace detail

/// Resamples max{F1 + X_i(e_q), sup X_i(e_q)} on F2 = i with independent
/// cycles and compares with U (two-sample KS on disjoint halves of the chain).
/// Also evaluates the upper and lower tail bounds on x_grid; the sandwich
/// holds if each bound is respected up to 3 standard errors.
inline IdentityCheck stationary_identity_check(const ChainResult& chain, const PathModel& m0, const PathModel& m1,
                                               double q, std::span<const double> x_grid, std::uint64_t seed = 7) {
    const auto& s = chain.samples;
    if (s.size() < 1000) throw DomainError("stationary_identity_check: too few samples");
    const std::array<PathModel, 2> models{m0, m1};
    const std::size_t half = s.size() / 2;
    const auto draws = detail::draw_cycles(models, q, half, seed, 1e-3 / q);

    IdentityCheck out;
    std::vector<double> u, rhs;
    for (std::size_t k = 0; k < half; ++k) {
        u.push_back(s[2 * k].u);
        const auto& in = s[2 * k + 1];
        const auto& c = draws.c[in.env_next][k];
        rhs.push_back(std::max(in.u_post + c.net, c.net_sup));
    }
    out.ks = ks_two_sample(u, rhs);
    out.ks_critical = ks_critical_1pct(u.size(), rhs.size());

    // Bound ingredients, all from the full chain with independent draws.
    const double n = static_cast<double>(s.size());
    const std::size_t nd = draws.c[0].size();
    std::array<double, 2> below{};  // P(-inf X_i > F1, F2 = i)
    for (std::size_t k = 0; k < s.size(); ++k) {
        const int i = s[k].env_next;
        below[i] += (-draws.c[i][k % nd].net_inf > s[k].u_post) / n;
    }
    const auto all_u = chain.workloads();
    const auto tail = empirical_tail(all_u, x_grid);
    for (std::size_t g = 0; g < x_grid.size(); ++g) {
        const double x = x_grid[g];
        double lo = 0.0, up = 0.0;
        for (int i = 0; i < 2; ++i) {
            double sup_tail_i = 0.0;
            for (const auto& c : draws.c[i]) sup_tail_i += c.net_sup > x;
            sup_tail_i /= static_cast<double>(nd);
            lo += sup_tail_i * below[i];
        }
        double a = 0.0;
        for (std::size_t k = 0; k < s.size(); ++k) {
            const int i = s[k].env_next;
            a += (s[k].u_post + draws.c[i][(k + nd / 2) % nd].net > x);
        }
        up = lo + a / n;
        out.x.push_back(x);
        out.surv.push_back(tail.surv[g]);
        out.se.push_back(tail.se[g]);
        out.upper.push_back(up);
        out.lower.push_back(lo);
        // Bounds are themselves plug-in estimates; allow their binomial error too.
        const double band = 3.0 * std::sqrt(tail.se[g] * tail.se[g] + std::max(up * (1.0 - up), 1.0 / n) / n);
        if (tail.surv[g] > up + band || tail.surv[g] < lo - band) out.sandwich_ok = false;
    }
    return out;
}

/// Per-environment input for the convolution-equivalent theorem.
struct HeavyTailSpec {
    std::array<PathModel, 2> models;
    std::array<double, 2> alpha{0.0, 0.0};
    std::array<double, 2> c{0.0, 0.0};  // P(F1 > x) ~ c_i Pi_i(x)
    double q = 1.0;
};

struct HeavyTailResult {
    std::array<double, 2> D{};
    std::array<double, 2> p_env{};
    double x_min = 0.0;
    std::function<double(double)> predictor;
};

/// D_i from the stationary samples. Expectations over (U, J) are restricted
/// to F2 = i; the sup-overshoot term uses -inf X_i ~ Exp(Phi_i) draws.
inline HeavyTailResult heavy_tail_constants(const HeavyTailSpec& spec, const ChainResult& chain,
                                            const IdentityCheck* bounds = nullptr, std::uint64_t seed = 11) {
    const auto& s = chain.samples;
    if (s.empty()) throw DomainError("heavy_tail_constants: no samples");
    const double q = spec.q;
    const double n = static_cast<double>(s.size());
    const auto draws = detail::draw_cycles(spec.models, q, std::min<std::size_t>(s.size(), 200000), seed, 1e-3 / q);
    HeavyTailResult out;
    for (int i = 0; i < 2; ++i) {
        const double a = spec.alpha[i];
        const double pa = psi_x(spec.models[i], a);
        if (!(pa < q)) throw DomainError("heavy_tail_constants: hypothesis psi_i(alpha_i) < q fails");
        double p = 0.0, ef = 0.0, over = 0.0;
        const std::size_t nd = draws.c[i].size();
        for (std::size_t k = 0; k < s.size(); ++k) {
            if (s[k].env_next != i) continue;
            p += 1.0;
            ef += std::exp(a * s[k].u_post);
            const double y = -draws.c[i][k % nd].net_inf - s[k].u_post;
            if (y > 0.0) over += 1.0 - std::exp(-a * y);
        }
        p /= n, ef /= n, over /= n;
        double phi_i = 0.0;
        if (a > 0.0) {
            // Phi_i from the draws: -inf X(e_q) ~ Exp(Phi_i).
            double m = 0.0;
            for (const auto& c : draws.c[i]) m += -c.net_inf;
            phi_i = static_cast<double>(nd) / m;
        }
        const double g = q / (q - pa);
        out.D[i] = spec.c[i] * g * p + q / ((q - pa) * (q - pa)) * ef;
        if (a > 0.0) out.D[i] += q / ((q - pa) * (q - pa)) * (phi_i + a) / phi_i * over;
        out.p_env[i] = p;
    }
    double mean_u = 0.0;
    for (const auto& x : s) mean_u += x.u / n;
    out.x_min = 10.0 * mean_u;
    if (bounds) {
        for (std::size_t g = bounds->x.size(); g-- > 0;) {
            if (bounds->lower[g] <= 0.0 || bounds->upper[g] > 1.2 * bounds->lower[g]) {
                if (g + 1 < bounds->x.size()) out.x_min = std::max(out.x_min, bounds->x[g + 1]);
                break;
            }
        }
    }
    out.predictor = [D = out.D, models = spec.models](double x) {
        return D[0] * levy_tail(models[0], x) + D[1] * levy_tail(models[1], x);
    };
    return out;
}

struct CramerResult {
    double rate = 0.0;
    std::array<double, 2> gamma{};
    std::array<double, 2> coefficient{};  // lim e^{gamma_i x} P(sup X_i(e_q) > x)
    std::array<Estimate, 2> below{};      // P(-inf X_i(e_q) > F1, F2 = i)
    std::array<double, 2> C{};
    double constant = 0.0;
    std::array<Estimate, 2> overshoot{};  // E[e^{gamma_i (F1 + inf X_i(e_q))^+}; F2 = i]
    std::array<double, 2> C_full{};
    double constant_full = 0.0;
};

/// Light-tailed asymptotics P(U > x) ~ C e^{-rate x}. The probability factor uses
/// -inf X_i(e_q) ~ Exp(Phi_i(q)), i.e. E[e^{-Phi_i F1}; F2 = i] over the chain.
inline CramerResult cramer_tail(const LevyModel& m0, const LevyModel& m1, double q, const ChainResult& chain) {
    const std::array<const LevyModel*, 2> ms{&m0, &m1};
    CramerResult out;
    for (int i = 0; i < 2; ++i) {
        if (classify_regime(PathModel::from(*ms[i]), q) != TailRegime::Cramer)
            throw DomainError("cramer_tail: Cramer hypothesis fails");
        out.gamma[i] = cramer_rate(*ms[i], q);
        out.coefficient[i] = sup_tail_coefficient(*ms[i], q);
        const double ph = phi(*ms[i], q);
        out.below[i] = chain.estimate(
            [i, ph](const ChainSample& c) { return c.env_next == i ? std::exp(-ph * c.u_post) : 0.0; });
        out.C[i] = out.below[i].mean * out.coefficient[i];
        // U = S + (F1 - I)^+ with S =d sup X_i(e_q) independent of I ~ Exp(Phi_i).
        const double g = out.gamma[i];
        out.overshoot[i] = chain.estimate([i, ph, g](const ChainSample& c) {
            if (c.env_next != i) return 0.0;
            const double u = c.u_post;
            return std::exp(-ph * u) + ph * (std::exp(g * u) - std::exp(-ph * u)) / (ph + g);
        });
        out.C_full[i] = out.overshoot[i].mean * out.coefficient[i];
    }
    out.rate = std::min(out.gamma[0], out.gamma[1]);
    const double tol = 1e-12 * out.rate;
    if (std::abs(out.gamma[0] - out.gamma[1]) <= tol) {
        out.constant = out.C[0] + out.C[1];
        out.constant_full = out.C_full[0] + out.C_full[1];
    } else {
        const int k = out.gamma[0] < out.gamma[1] ? 0 : 1;
        out.constant = out.C[k];
        out.constant_full = out.C_full[k];
    }
    return out;
}

/// E e^{gamma F1} < inf when it can be decided from the rule alone. Rules whose
/// output depends on the moment of U itself (impulses, scaling) report true.
inline bool cramer_moment_finite(const RegulationPolicy& policy, double gamma) {
    auto all = [gamma](const FlagDistributions& b) {
        return std::all_of(b.begin(), b.end(), [gamma](const Distribution& d) { return std::isfinite(d.mgf(gamma)); });
    };
    if (auto* r = std::get_if<Reset>(&policy.workload)) return all(r->b);
    if (auto* r = std::get_if<ResidualTarget>(&policy.workload)) return all(r->b);
    if (auto* r = std::get_if<AddImpulse>(&policy.workload)) return all(r->b);
    return true;
}

struct SlopeFit {
    double slope = 0.0;
    double intercept = 0.0;
    std::size_t points = 0;
};

/// Least-squares fit of log P(U > x) on x over grid points whose empirical
/// survival lies in [p_lo, p_hi].
inline SlopeFit fit_log_slope(const TailEstimate& t, double p_hi = 1e-2, double p_lo = 1e-4) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    std::size_t n = 0;
    for (std::size_t g = 0; g < t.x.size(); ++g) {
        if (t.surv[g] > p_hi || t.surv[g] < p_lo || t.surv[g] <= 0.0) continue;
        const double y = std::log(t.surv[g]);
        sx += t.x[g], sy += y, sxx += t.x[g] * t.x[g], sxy += t.x[g] * y;
        ++n;
    }
    if (n < 3) throw DomainError("fit_log_slope: fewer than three points in the window");
    const double dn = static_cast<double>(n);
    SlopeFit f;
    f.slope = (dn * sxy - sx * sy) / (dn * sxx - sx * sx);
    f.intercept = (sy - f.slope * sx) / dn;
    f.points = n;
    return f;
}

}  // namespace levyreg
