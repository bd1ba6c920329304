#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "levyreg/distribution.hpp"
#include "levyreg/errors.hpp"
#include "levyreg/fluctuation.hpp"
#include "levyreg/levy_model.hpp"
#include "levyreg/scale.hpp"

namespace levyreg {

/// v[j](s) = E[e^{-sU}; J = j] for the embedded chain in steady state,
/// indexed by EnvFlags::index().
struct StationaryTransform {
    std::array<double, 8> probs{};
    std::array<std::function<double(double)>, 8> v;

    double operator()(EnvFlags f, double s) const {
        const auto& fn = v[f.index()];
        return fn ? fn(s) : 0.0;
    }
    double total(double s) const {
        double t = 0.0;
        for (int k = 0; k < 8; ++k) t += (*this)(EnvFlags::from_index(k), s);
        return t;
    }
};

/// One summand coef * v_source(arg) of the right-hand side for v_target(s).
struct TransformTerm {
    EnvFlags target;
    EnvFlags source;
    double coef = 0.0;
    double arg = 0.0;
};

struct TransformEquation {
    double s = 0.0;
    std::vector<TransformTerm> terms;

    /// Right-hand side for `target` given candidate transforms.
    double rhs(EnvFlags target, const StationaryTransform& t) const {
        double r = 0.0;
        for (const auto& term : terms)
            if (term.target == target) r += term.coef * t(term.source, term.arg);
        return r;
    }
};

namespace detail {

inline bool input_rule_is_flag_only(InputRule r) { return r != InputRule::HighIffBelowK; }

inline double gk(auto f, double a, double b) {
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 15, 1e-12);
}

// int g(x) P(B in dx), split at the given breakpoints.
template <class G>
double mix_over(const Distribution& b, G g, std::span<const double> breaks) {
    auto segments = [&](double lo, double hi, auto dens) {
        std::vector<double> cuts{lo};
        for (double c : breaks)
            if (c > lo && c < hi) cuts.push_back(c);
        std::sort(cuts.begin(), cuts.end());
        cuts.push_back(hi);
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i)
            s += gk([&](double x) { return dens(x) * g(x); }, cuts[i], cuts[i + 1]);
        return s;
    };
    constexpr double inf = std::numeric_limits<double>::infinity();
    return std::visit(
        [&](const auto& d) -> double {
            using T = std::decay_t<decltype(d)>;
            if constexpr (std::is_same_v<T, PointMass>) return g(d.value);
            else if constexpr (std::is_same_v<T, Exponential>)
                return segments(0.0, inf, [&](double x) { return d.rate * std::exp(-d.rate * x); });
            else if constexpr (std::is_same_v<T, ShiftedExponential>)
                return segments(d.shift, inf, [&](double x) { return d.rate * std::exp(-d.rate * (x - d.shift)); });
            else if constexpr (std::is_same_v<T, Uniform>) {
                if (d.hi == d.lo) return g(d.lo);
                return segments(d.lo, d.hi, [&](double) { return 1.0 / (d.hi - d.lo); });
            } else
                return segments(d.scale, inf,
                                [&](double x) { return d.shape * std::pow(d.scale, d.shape) / std::pow(x, d.shape + 1); });
        },
        b.kind());
}

}  // namespace detail

/// z_k(s) = int P(B in dx) int e^{-sy} kappa_k(x, dy), k = 2 j_s + j_i.
inline double mixed_kernel_lst(const ScaleFunction& w, const Thresholds& th, const Distribution& b, int k, double s) {
    const std::array<double, 2> breaks{th.lower, th.upper_or_inf()};
    return detail::mix_over(b, [&](double x) { return kernels(w, th, x)[k].lst(s); }, breaks);
}

/// Right-hand side of the stationary transform equation at s, for policies
/// whose correction mixes in closed form with the kernels:
///  - Reset (F1 = B_j independent of u): terms coef * v_j(0);
///  - Multiply (F1 = delta u) with L = 0 and K = inf.
/// The input rule must depend on the flags only.
inline TransformEquation assemble_transform_equation(const LevyModel& model0, const LevyModel& model1,
                                                     const RegulationPolicy& policy, double s) {
    policy.validate();
    if (!(s >= 0.0)) throw DomainError("assemble_transform_equation: s must be nonnegative");
    if (!detail::input_rule_is_flag_only(policy.input))
        throw DomainError("assemble_transform_equation: unsupported policy (input rule depends on u)");
    const std::array<const LevyModel*, 2> models{&model0, &model1};
    const double q = policy.q;
    TransformEquation eq;
    eq.s = s;

    if (const auto* r = std::get_if<Reset>(&policy.workload)) {
        const std::array<ScaleFunction, 2> w{scale_w(model0, q), scale_w(model1, q)};
        for (int j = 0; j < 8; ++j) {
            const auto src = EnvFlags::from_index(j);
            const int l3 = policy.apply_input(0.0, src);
            for (int k = 0; k < 4; ++k) {
                const EnvFlags tgt{static_cast<std::uint8_t>(k >> 1), static_cast<std::uint8_t>(k & 1),
                                   static_cast<std::uint8_t>(l3)};
                eq.terms.push_back({tgt, src, mixed_kernel_lst(w[l3], policy.thresholds, r->b[j], k, s), 0.0});
            }
        }
        return eq;
    }
    if (const auto* m = std::get_if<Multiply>(&policy.workload)) {
        if (policy.thresholds.has_upper() || policy.thresholds.lower != 0.0)
            throw DomainError("assemble_transform_equation: unsupported policy (Multiply needs L = 0, K = inf)");
        for (int j = 0; j < 8; ++j) {
            const auto src = EnvFlags::from_index(j);
            const int a = policy.apply_input(0.0, src);
            const auto& ma = *models[a];
            const double ph = phi(ma, q);
            const double den = q - psi(ma, s);
            if (std::abs(den) <= 1e-12 * q) throw DomainError("assemble_transform_equation: pole psi(s) = q");
            const double g = q / den;
            const double k = s == 0.0 ? 1.0 : sup_law_lst(ma, q, s);
            const auto u8 = static_cast<std::uint8_t>(a);
            eq.terms.push_back({EnvFlags{0, 0, u8}, src, g, m->delta * s});
            eq.terms.push_back({EnvFlags{0, 0, u8}, src, -g, m->delta * ph});
            eq.terms.push_back({EnvFlags{0, 1, u8}, src, k, m->delta * ph});
        }
        return eq;
    }
    throw DomainError("assemble_transform_equation: unsupported policy (workload rule has no closed-form mixing)");
}

namespace detail {

inline std::array<double, 8> stationary_probs(const Eigen::Matrix<double, 8, 8>& M) {
    Eigen::Matrix<double, 9, 8> A;
    A.topRows<8>() = M - Eigen::Matrix<double, 8, 8>::Identity();
    A.row(8).setOnes();
    Eigen::Matrix<double, 9, 1> b = Eigen::Matrix<double, 9, 1>::Zero();
    b(8) = 1.0;
    Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 9, 8>> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 8) throw NumericalError("solve_clearing: singular 8x8 system (degenerate policy)");
    const Eigen::Matrix<double, 8, 1> pi = qr.solve(b);
    if ((A * pi - b).norm() > 1e-9) throw NumericalError("solve_clearing: inconsistent stationary system");
    std::array<double, 8> out{};
    for (int k = 0; k < 8; ++k) out[k] = std::max(pi(k), 0.0);
    return out;
}

}  // namespace detail

/// Stationary transform for Reset corrections (F1 = B_j, any distribution
/// family with a density or atom) and a flag-only input rule.
inline StationaryTransform solve_reset(const LevyModel& model0, const LevyModel& model1, const RegulationPolicy& policy) {
    policy.validate();
    const auto* r = std::get_if<Reset>(&policy.workload);
    if (r == nullptr) throw DomainError("solve_reset: workload rule must be Reset");
    const auto eq0 = assemble_transform_equation(model0, model1, policy, 0.0);
    Eigen::Matrix<double, 8, 8> M = Eigen::Matrix<double, 8, 8>::Zero();
    for (const auto& t : eq0.terms) M(t.target.index(), t.source.index()) += t.coef;

    StationaryTransform out;
    out.probs = detail::stationary_probs(M);
    const std::array<ScaleFunction, 2> w{scale_w(model0, policy.q), scale_w(model1, policy.q)};
    for (int l = 0; l < 8; ++l) {
        out.v[l] = [w, policy, b = r->b, probs = out.probs, l](double s) {
            if (s == 0.0) return probs[l];
            const auto tgt = EnvFlags::from_index(l);
            const int k = 2 * tgt.j_s + tgt.j_i;
            double v = 0.0;
            for (int j = 0; j < 8; ++j) {
                if (probs[j] == 0.0) continue;
                if (policy.apply_input(0.0, EnvFlags::from_index(j)) != tgt.j_e) continue;
                v += probs[j] * mixed_kernel_lst(w[tgt.j_e], policy.thresholds, b[j], k, s);
            }
            return v;
        };
    }
    return out;
}

/// Generalized clearing: F1 = B_j ~ Exp(rates[j]), F2 = 1 - j_s.
inline StationaryTransform solve_clearing(const LevyModel& model0, const LevyModel& model1, const Thresholds& th,
                                          const std::array<double, 8>& rates, double q) {
    if (!th.has_upper()) throw DomainError("solve_clearing: K must be finite");
    FlagDistributions b;
    for (int k = 0; k < 8; ++k) {
        if (!(rates[k] > 0.0)) throw DomainError("solve_clearing: rates must be positive");
        b[k] = Exponential{rates[k]};
    }
    RegulationPolicy policy{Reset{b}, InputRule::LowIfHighSup, th, q};
    return solve_reset(model0, model1, policy);
}

struct TcpTruncation {
    int n_prod = 0;  // 0: ceil(log(tail_tol)/log(delta)) + 5
    double tail_tol = 1e-14;
    int extra_factors = 0;
};

namespace detail {

// Multiplicative decrease with L = 0, K = inf. Unknowns
// theta = (c_0, c_1, v_{0,0}(0), v_{0,1}(0)) with c_a = sum_{F2(j)=a} v_j(delta Phi_a);
// every v_{i,e}(s) (flag index 2i + e) is linear in theta.
class MultiplicativeSystem {
public:
    using Row = Eigen::Matrix<double, 1, 4>;

    MultiplicativeSystem(const LevyModel& m0, const LevyModel& m1, const RegulationPolicy& policy,
                         const TcpTruncation& trunc)
        : models_{m0, m1}, policy_(policy), q_(policy.q), trunc_(trunc) {
        delta_ = std::get<Multiply>(policy.workload).delta;
        for (int a = 0; a < 2; ++a) phi_[a] = phi(models_[a], q_);
        for (int k = 0; k < 4; ++k) target_[k] = policy.apply_input(0.0, EnvFlags::from_index(k));
        if (trunc_.n_prod <= 0)
            trunc_.n_prod = static_cast<int>(std::ceil(std::log(trunc_.tail_tol) / std::log(delta_))) + 5;
    }

    double phi_of(int a) const { return phi_[a]; }
    double delta() const { return delta_; }

    /// Coefficient rows of v_k(s), k = 2 i + e.
    std::array<Row, 4> rows(double s) const {
        std::array<Row, 4> out;
        for (int e = 0; e < 2; ++e) out[2 + e] = unit(e) * k_factor(e, s);
        const auto f = i0_rows(s);
        out[0] = f.row(0);
        out[1] = f.row(1);
        return out;
    }

    /// Row of V_a(t) = sum over k with F2(k) = a.
    Row sum_rows(int a, double t) const {
        const auto r = rows(t);
        Row v = Row::Zero();
        for (int k = 0; k < 4; ++k)
            if (target_[k] == a) v += r[k];
        return v;
    }

    int target(int k) const { return target_[k]; }

private:
    static Row unit(int i) {
        Row r = Row::Zero();
        r(i) = 1.0;
        return r;
    }

    double g_factor(int a, double t) const {
        const double den = q_ - psi(models_[a], t);
        if (std::abs(den) <= 1e-12 * q_) throw DomainError("solve_tcp: pole q = psi(s) on the product trajectory");
        return q_ / den;
    }
    double k_factor(int a, double t) const { return t == 0.0 ? 1.0 : sup_law_lst(models_[a], q_, t); }

    // H(t) - C: row a = sum_{(1,e): F2 = a} k_e(t) e_{c_e} - e_{c_a}.
    Eigen::Matrix<double, 2, 4> forcing(double t) const {
        Eigen::Matrix<double, 2, 4> h = Eigen::Matrix<double, 2, 4>::Zero();
        for (int e = 0; e < 2; ++e) h.row(target_[2 + e]) += unit(e) * k_factor(e, t);
        for (int a = 0; a < 2; ++a) h.row(a) -= unit(a);
        return h;
    }

    Eigen::Matrix2d transfer() const {
        Eigen::Matrix2d p = Eigen::Matrix2d::Zero();
        for (int e = 0; e < 2; ++e) p(target_[e], e) = 1.0;
        return p;
    }

    // F(s) = G(s) [P F(delta s) + H(delta s) - C] for the i = 0 rows.
    Eigen::Matrix<double, 2, 4> i0_rows(double s) const {
        Eigen::Matrix<double, 2, 4> f0 = Eigen::Matrix<double, 2, 4>::Zero();
        f0(0, 2) = 1.0;
        f0(1, 3) = 1.0;
        if (s == 0.0) return f0;
        const Eigen::Matrix2d P = transfer();
        auto G = [&](double t) {
            Eigen::Matrix2d g = Eigen::Matrix2d::Zero();
            g(0, 0) = g_factor(0, t);
            g(1, 1) = g_factor(1, t);
            return g;
        };
        Eigen::Matrix<double, 2, 4> acc = Eigen::Matrix<double, 2, 4>::Zero();
        Eigen::Matrix2d T = Eigen::Matrix2d::Identity();
        double t = s;
        int n = 0;
        const int n_min = trunc_.n_prod + trunc_.extra_factors;
        while (true) {
            const Eigen::Matrix2d g = G(t);
            acc += T * g * forcing(delta_ * t);
            T = T * g * P;
            t *= delta_;
            ++n;
            const bool small = std::abs(psi(models_[0], t)) < trunc_.tail_tol * q_ &&
                               std::abs(psi(models_[1], t)) < trunc_.tail_tol * q_;
            if (n >= n_min && small) break;
            if (n > 100000) throw NumericalError("solve_tcp: product did not converge");
        }
        return acc + T * f0;
    }

    std::array<LevyModel, 2> models_;
    RegulationPolicy policy_;
    double q_;
    TcpTruncation trunc_;
    double delta_ = 0.5;
    std::array<double, 2> phi_{};
    std::array<int, 4> target_{};
};

}  // namespace detail

/// Multiplicative decrease F1 = delta u with L = 0, K = inf and a flag-only input rule.
inline StationaryTransform solve_multiplicative(const LevyModel& model0, const LevyModel& model1,
                                                const RegulationPolicy& policy, const TcpTruncation& trunc = {}) {
    policy.validate();
    if (!std::holds_alternative<Multiply>(policy.workload))
        throw DomainError("solve_multiplicative: workload rule must be Multiply");
    if (policy.thresholds.has_upper() || policy.thresholds.lower != 0.0)
        throw DomainError("solve_multiplicative: requires L = 0 and K = inf");
    if (!detail::input_rule_is_flag_only(policy.input))
        throw DomainError("solve_multiplicative: input rule must depend on the flags only");
    if (!(std::get<Multiply>(policy.workload).delta < 1.0))
        throw DomainError("solve_multiplicative: delta must be below 1 (the constants sit on the pole at delta = 1)");
    if (!(trunc.tail_tol > 0.0)) throw ConfigError("solve_multiplicative: tail_tol must be positive");

    auto sys = std::make_shared<detail::MultiplicativeSystem>(model0, model1, policy, trunc);
    Eigen::Matrix<double, 5, 4> A = Eigen::Matrix<double, 5, 4>::Zero();
    Eigen::Matrix<double, 5, 1> b = Eigen::Matrix<double, 5, 1>::Zero();
    using Row = detail::MultiplicativeSystem::Row;
    for (int a = 0; a < 2; ++a) {
        Row r = -sys->sum_rows(a, sys->delta() * sys->phi_of(a));
        r(a) += 1.0;
        A.row(a) = r;
    }
    for (int e = 0; e < 2; ++e) {
        Row r = -sys->sum_rows(e, 0.0);
        r(2 + e) += 1.0;
        r(e) += 1.0;
        A.row(2 + e) = r;
    }
    const auto r0 = sys->rows(0.0);
    A.row(4) = r0[0] + r0[1] + r0[2] + r0[3];
    b(4) = 1.0;
    Eigen::ColPivHouseholderQR<Eigen::Matrix<double, 5, 4>> qr(A);
    qr.setThreshold(1e-10);
    if (qr.rank() < 4) throw NumericalError("solve_tcp: singular system for the unknown constants");
    const Eigen::Vector4d theta = qr.solve(b);
    if ((A * theta - b).norm() > 1e-9) throw NumericalError("solve_tcp: residual of the constant system exceeds 1e-9");

    StationaryTransform out;
    for (int k = 0; k < 4; ++k) {
        out.probs[k] = std::max(r0[k].dot(theta), 0.0);
        out.v[k] = [sys, theta, k](double s) { return sys->rows(s)[k].dot(theta); };
    }
    for (int k = 4; k < 8; ++k) out.v[k] = [](double) { return 0.0; };
    return out;
}

/// TCP-like control: F1 = delta u, F2 = j_i, L = 0, K = inf.
inline StationaryTransform solve_tcp(const LevyModel& model0, const LevyModel& model1, double delta, double q,
                                     const TcpTruncation& trunc = {}) {
    if (!(delta > 0.0 && delta < 1.0)) throw DomainError("solve_tcp: delta must lie in (0, 1)");
    RegulationPolicy policy{Multiply{delta}, InputRule::HighIfLow, Thresholds::unbounded(0.0), q};
    return solve_multiplicative(model0, model1, policy, trunc);
}

struct InventorySolution {
    std::function<double(double)> w;   // LST of the post-correction workload U + j_i B
    std::function<double(double)> v0;  // E[e^{-sU}; J_I = 0]
    std::function<double(double)> v1;  // E[e^{-sU}; J_I = 1]
    double w_at_phi = 0.0;
    double phi = 0.0;
    double mean_y = 0.0;     // E_L[Y(e_q)], closed form
    double mean_y_fd = 0.0;  // same, by a fourth-order central difference
};

/// Inventory model: F1 = u + j_i B with P(B > L) = 1, single input process, K = inf.
inline InventorySolution solve_inventory(const LevyModel& model, double L, const Distribution& B, double q) {
    if (!(q > 0.0)) throw DomainError("solve_inventory: q must be positive");
    if (!(L >= 0.0)) throw DomainError("solve_inventory: L must be nonnegative");
    if (!(mean_rate(model) < 0.0)) throw DomainError("solve_inventory: stability requires a negative drift");
    if (B.survival(L) < 1.0) throw DomainError("solve_inventory: order size must satisfy P(B > L) = 1");
    const double eb = B.mean();
    if (!std::isfinite(eb)) throw DomainError("solve_inventory: E[B] must be finite");
    (void)B.lst(0.0);  // rejects families without a closed-form transform

    const auto w = scale_w(model, q);
    const auto h = std::make_shared<KernelMeasure>(reflected_density(w, L));
    const double ph = w.phi();
    const double dpsi0 = psi_prime(model, 0.0);

    InventorySolution out;
    out.phi = ph;
    out.mean_y = h->mean();
    const double d = 1e-4;
    out.mean_y_fd = -(-h->lst(2 * d) + 8.0 * h->lst(d) - 8.0 * h->lst(-d) + h->lst(-2 * d)) / (12.0 * d);
    out.w_at_phi = std::exp(-L * ph) / (1.0 + q * (eb + out.mean_y - L) / dpsi0);

    const double scale = std::exp(L * ph) * out.w_at_phi;
    out.v1 = [h, scale](double s) { return scale * h->lst(s); };
    out.w = [h, scale, B, L, q, model](double s) {
        if (s == 0.0) return 1.0;
        const double ps = psi(model, s);
        const double be = B.lst(s) * h->lst(s);
        return scale / ps * (ps * be + q * (std::exp(-L * s) - be));
    };
    out.v0 = [h, scale, B, L, q, model, ph, wphi = out.w_at_phi, wf = out.w, v1 = out.v1](double s) {
        const double den = q - psi(model, s);
        if (std::abs(den) <= 1e-9 * q) return wf(s) - B.lst(s) * v1(s);
        return q / den * (wf(s) - std::exp(-L * (s - ph)) * wphi);
    };
    return out;
}

struct InversionResult {
    std::vector<double> values;
    bool oscillation_warning = false;
};

/// P(U <= x) from the LST of a sub-probability measure by Gaver-Stehfest
/// inversion of v(s)/s; about `digits` correct digits for smooth CDFs.
inline InversionResult invert_lst(const std::function<double(double)>& transform, std::span<const double> x_grid,
                                  int digits = 9) {
    int n = std::clamp(2 * digits, 8, 20);
    if (n % 2) ++n;
    const int half = n / 2;
    std::vector<double> coef(n + 1, 0.0);
    auto fact = [](int k) { return std::tgamma(static_cast<long double>(k) + 1.0L); };
    for (int k = 1; k <= n; ++k) {
        long double s = 0.0L;
        for (int j = (k + 1) / 2; j <= std::min(k, half); ++j)
            s += std::pow(static_cast<long double>(j), half) * fact(2 * j) /
                 (fact(half - j) * fact(j) * fact(j - 1) * fact(k - j) * fact(2 * j - k));
        coef[k] = static_cast<double>(((k + half) % 2 ? -1.0L : 1.0L) * s);
    }
    const double mass = transform(0.0);
    InversionResult out;
    double prev = 0.0;
    for (double x : x_grid) {
        double val;
        if (x < 0.0) {
            val = 0.0;
        } else if (x == 0.0) {
            val = transform(1e8);
        } else {
            const double a = std::numbers::ln2 / x;
            val = 0.0;
            for (int k = 1; k <= n; ++k) {
                const double s = k * a;
                val += coef[k] * transform(s) / s;
            }
            val *= a;
        }
        const double tol = 1e-6 * std::max(1.0, mass);
        if (val < -tol || val > mass + tol || val < prev - tol) out.oscillation_warning = true;
        val = std::clamp(val, 0.0, mass);
        val = std::max(val, prev);
        prev = val;
        out.values.push_back(val);
    }
    return out;
}

}  // namespace levyreg
