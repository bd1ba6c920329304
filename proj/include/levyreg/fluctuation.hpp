#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <vector>

#include "levyreg/errors.hpp"
#include "levyreg/kernel_measure.hpp"
#include "levyreg/levy_model.hpp"
#include "levyreg/scale.hpp"

// Laws of the reflected process Y = X - inf X at an independent exponential
// time e_q, jointly with its running supremum and infimum. Everything is
// expressed through the exponential-sum scale function W = W^(q).

namespace levyreg {

/// E exp(-alpha sup_{t <= e_q} X(t)), alpha > 0.
inline double sup_law_lst(const LevyModel& m, double q, double alpha) {
    if (!(alpha > 0.0)) throw DomainError("sup_law_lst: alpha must be positive");
    const double ph = phi(m, q);
    if (std::abs(alpha - ph) <= 1e-8 * std::max(1.0, ph)) return q / (ph * psi_prime(m, ph));
    const double den = psi(m, alpha) - q;
    if (den == 0.0) throw DomainError("sup_law_lst: pole psi(alpha) = q");
    return q * (alpha - ph) / (ph * den);
}

/// P(sup_{t <= e_q} X(t) > x), x >= 0, from
///   P(sup in dx) = (q/Phi) W(dx) - q W(x) dx.
/// The Phi(q) term of the density cancels identically and is dropped.
inline double sup_tail(const ScaleFunction& w, double x) {
    if (!(x >= 0.0)) throw DomainError("sup_tail: x must be nonnegative");
    const double ph = w.phi(), q = w.q();
    double s = 0.0;
    for (std::size_t j = 1; j < w.terms().size(); ++j) {
        const auto& t = w.terms()[j];
        s += t.coef * q * (t.rate / ph - 1.0) * std::exp(t.rate * x) / (-t.rate);
    }
    return std::clamp(s, 0.0, 1.0);
}

inline double sup_tail(const LevyModel& m, double q, double x) { return sup_tail(scale_w(m, q), x); }

/// -inf_{t <= e_q} X(t) ~ Exp(Phi(q)); returns the rate.
inline double inf_law(const LevyModel& m, double q) {
    if (!(q > 0.0)) throw DomainError("inf_law: q must be positive");
    return phi(m, q);
}

/// Killed q-potential density r(x, y) of X on [0, inf):
///   r(x, y) = exp(-Phi x) W(y) - W(y - x).
/// This is the integral form with W'(dz) read as the measure W(dz), whose
/// atom W(0) sits at the closed left endpoint when y < x.
inline double potential_density(const ScaleFunction& w, double x, double y) {
    if (!(x >= 0.0) || !(y >= 0.0)) throw DomainError("potential_density: x, y must be nonnegative");
    const double ex = std::exp(-w.phi() * x);
    if (y < x) return std::max(ex * w(y), 0.0);
    // The Phi(q) terms cancel exactly for y >= x.
    double v = 0.0;
    for (std::size_t j = 1; j < w.terms().size(); ++j) {
        const auto& t = w.terms()[j];
        v += t.coef * (ex * std::exp(t.rate * y) - std::exp(t.rate * (y - x)));
    }
    return std::max(v, 0.0);
}

inline double potential_density(const LevyModel& m, double q, double x, double y) {
    return potential_density(scale_w(m, q), x, y);
}

namespace detail {

// Terms c_j * coef(r_j) * exp(r_j (y - shift(r_j))), optionally skipping Phi(q).
template <class C, class S>
std::vector<KTerm> map_terms(const ScaleFunction& w, C coef, S shift, bool skip_phi = false) {
    std::vector<KTerm> out;
    for (std::size_t j = 0; j < w.terms().size(); ++j) {
        if (skip_phi && j == ScaleFunction::phi_index) continue;
        const auto& t = w.terms()[j];
        out.push_back({t.coef * coef(t.rate), t.rate, shift(t.rate)});
    }
    return out;
}

// W(a) e^{-Phi a} and W'(a) e^{-Phi a}.
inline double w_scaled(const ScaleFunction& w, double a) {
    double s = 0.0;
    for (const auto& t : w.terms()) s += t.coef * std::exp((t.rate - w.phi()) * a);
    return s;
}
inline double wprime_scaled(const ScaleFunction& w, double a) {
    double s = 0.0;
    for (const auto& t : w.terms()) s += t.coef * t.rate * std::exp((t.rate - w.phi()) * a);
    return s;
}

// Density of q r(x - L, y - L) in y, for x > L (no atom).
inline KernelMeasure shifted_potential(const ScaleFunction& w, double x, double L) {
    const double q = w.q(), ph = w.phi();
    const double d = x - L;
    const double ed = std::exp(-ph * d);
    std::vector<ExpPiece> pieces;
    pieces.push_back({L, x,
                      map_terms(
                          w, [&](double r) { return r > 0.0 ? q : q * ed; },
                          [&](double r) { return r > 0.0 ? x : L; })});
    pieces.push_back({x, std::numeric_limits<double>::infinity(),
                      map_terms(
                          w, [&](double r) { return q * (std::exp((r - ph) * d) - 1.0); }, [&](double) { return x; },
                          true)});
    return KernelMeasure(0.0, std::move(pieces));
}

}  // namespace detail

/// Law of Y(e_q) under P_x: atom (q/Phi) e^{-Phi x} W(0) at zero plus
///   h(x, y) = q r(x, y) + e^{-Phi x} [(q/Phi) W'(y) - q W(y)]
///           = (q/Phi) e^{-Phi x} W'(y) - q W(y - x).
inline KernelMeasure reflected_density(const ScaleFunction& w, double x) {
    if (!(x >= 0.0)) throw DomainError("reflected_density: x must be nonnegative");
    const double q = w.q(), ph = w.phi();
    const double ex = std::exp(-ph * x);
    std::vector<ExpPiece> pieces;
    pieces.push_back({0.0, x,
                      detail::map_terms(
                          w, [&](double r) { return r > 0.0 ? q / ph * r : q / ph * ex * r; },
                          [&](double r) { return r > 0.0 ? x : 0.0; })});
    pieces.push_back({x, std::numeric_limits<double>::infinity(),
                      detail::map_terms(
                          w, [&](double r) { return q / ph * r * std::exp((r - ph) * x) - q; },
                          [&](double) { return x; }, true)});
    return KernelMeasure(q / ph * ex * w.w0(), std::move(pieces));
}

inline KernelMeasure reflected_density(const LevyModel& m, double q, double x) {
    return reflected_density(scale_w(m, q), x);
}

/// P_x(Y(e_q) in dy, sup_{s <= e_q} Y(s) <= K):
///   atom q W(K - x) W(0) / W'(K), density q [W(K - x) W'(y) / W'(K) - W(y - x)] on [0, K].
inline KernelMeasure capped_density(const ScaleFunction& w, double K, double x) {
    if (!(x >= 0.0)) throw DomainError("capped_density: x must be nonnegative");
    if (!(K > 0.0) || std::isinf(K)) throw DomainError("capped_density: K must be finite and positive");
    if (x > K) throw DomainError("capped_density: x exceeds K");
    const double q = w.q(), ph = w.phi();
    // ratio = W(K - x) / W'(K) = e^{-Phi x} rs
    const double rs = detail::w_scaled(w, K - x) / detail::wprime_scaled(w, K);
    const double ratio = std::exp(-ph * x) * rs;
    std::vector<ExpPiece> pieces;
    pieces.push_back({0.0, K,
                      detail::map_terms(
                          w, [&](double r) { return r > 0.0 ? q * rs * r : q * ratio * r; },
                          [&](double r) { return r > 0.0 ? x : 0.0; })});
    pieces.push_back({x, K, detail::map_terms(w, [&](double) { return -q; }, [&](double) { return x; })});
    return KernelMeasure(q * ratio * w.w0(), std::move(pieces));
}

inline KernelMeasure capped_density(const LevyModel& m, double q, double K, double x) {
    return capped_density(scale_w(m, q), K, x);
}

/// kappa[2 * k + l] = P_x(Y(e_q) in dy, J_S = k, J_I = l), with
/// J_S = 1(sup >= K) and J_I = 1(inf <= L) over the cycle including its start.
using KernelSet = std::array<KernelMeasure, 4>;

inline KernelSet kernels(const ScaleFunction& w, const Thresholds& th, double x) {
    th.validate();
    if (!(x >= 0.0)) throw DomainError("kernels: x must be nonnegative");
    const double L = th.lower;
    const auto full = reflected_density(w, x);
    KernelSet out{};
    if (!th.has_upper()) {
        // Sup never reaches K = inf.
        if (x > L) {
            out[0] = detail::shifted_potential(w, x, L);
            out[1] = full - out[0];
        } else {
            out[1] = full;
        }
        return out;
    }
    const double K = *th.upper;
    if (x >= K) {
        out[2] = detail::shifted_potential(w, x, L);
        out[3] = full - out[2];
        return out;
    }
    const auto capped = capped_density(w, K, x);
    if (x <= L) {
        out[1] = capped;
        out[3] = full - capped;
        return out;
    }
    const double q = w.q(), ph = w.phi();
    // ratio = W(K - x) / W(K - L) = e^{-Phi (x - L)} rs
    const double rs = detail::w_scaled(w, K - x) / detail::w_scaled(w, K - L);
    const double ratio = std::exp(-ph * (x - L)) * rs;
    std::vector<ExpPiece> k00;
    k00.push_back({L, K,
                   detail::map_terms(
                       w, [&](double r) { return r > 0.0 ? q * rs : q * ratio; },
                       [&](double r) { return r > 0.0 ? x : L; })});
    k00.push_back({x, K, detail::map_terms(w, [&](double) { return -q; }, [&](double) { return x; })});
    out[0] = KernelMeasure(0.0, std::move(k00));
    out[1] = capped - out[0];
    out[2] = detail::shifted_potential(w, x, L) - out[0];
    out[3] = full - out[0] - out[1] - out[2];
    return out;
}

inline KernelSet kernels(const LevyModel& m, double q, const Thresholds& th, double x) {
    return kernels(scale_w(m, q), th, x);
}

}  // namespace levyreg
