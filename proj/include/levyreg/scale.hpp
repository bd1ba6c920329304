#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "levyreg/errors.hpp"
#include "levyreg/levy_model.hpp"

namespace levyreg {

struct ExpTerm {
    double coef = 0.0;
    double rate = 0.0;
};

/// q-scale function of the dual process as an exact exponential sum
///   W(x) = sum_j coef_j exp(rate_j x),  x >= 0;  W(x) = 0 for x < 0.
/// Exactly one rate is positive and equals Phi(q); the others are negative.
class ScaleFunction {
public:
    ScaleFunction(double q, std::vector<ExpTerm> terms) : q_(q), terms_(std::move(terms)) {
        std::sort(terms_.begin(), terms_.end(), [](const ExpTerm& a, const ExpTerm& b) { return a.rate > b.rate; });
        w0_ = 0.0;
        for (const auto& t : terms_) w0_ += t.coef;
        // Roundoff leaves ~1e-17 where the exact value is 0 (sigma > 0).
        double scale = 0.0;
        for (const auto& t : terms_) scale = std::max(scale, std::abs(t.coef));
        if (std::abs(w0_) < 1e-13 * scale) w0_ = 0.0;
    }

    double q() const { return q_; }
    const std::vector<ExpTerm>& terms() const { return terms_; }
    /// W(0+).
    double w0() const { return w0_; }
    /// Phi(q), the dominant rate.
    double phi() const { return terms_.front().rate; }
    /// Index of the Phi(q) term in terms().
    static constexpr std::size_t phi_index = 0;

    double operator()(double x) const {
        if (x < 0.0) return 0.0;
        if (x == 0.0) return w0_;
        double s = 0.0;
        for (const auto& t : terms_) s += t.coef * std::exp(t.rate * x);
        return s;
    }

    /// Right derivative W'(0+) = sum coef_j rate_j.
    double w_prime_at_zero() const {
        double s = 0.0;
        for (const auto& t : terms_) s += t.coef * t.rate;
        return s;
    }

    double derivative_unchecked(double x) const {
        double s = 0.0;
        for (const auto& t : terms_) s += t.coef * t.rate * std::exp(t.rate * x);
        return s;
    }

    /// Closed-form transform  int_0^inf e^{-theta y} W(y) dy  for theta > Phi(q).
    double laplace(double theta) const {
        double s = 0.0;
        for (const auto& t : terms_) s += t.coef / (theta - t.rate);
        return s;
    }

private:
    double q_;
    std::vector<ExpTerm> terms_;
    double w0_ = 0.0;
};

namespace detail {

// Real roots of a quadratic a x^2 + b x + c without cancellation.
inline std::vector<double> quadratic_roots(double a, double b, double c) {
    const double disc = b * b - 4.0 * a * c;
    if (disc < 0.0) throw NumericalError("scale_w: complex roots of psi(theta) = q");
    const double s = std::sqrt(disc);
    const double qq = -0.5 * (b + std::copysign(s, b));
    if (qq == 0.0) return {0.0, 0.0};
    return {qq / a, c / qq};
}

// Roots of a polynomial given by coefficients (lowest degree first), via
// companion-matrix eigenvalues followed by Newton polishing.
inline std::vector<double> real_polynomial_roots(std::span<const double> coeffs) {
    const int n = static_cast<int>(coeffs.size()) - 1;
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(n, n);
    for (int i = 1; i < n; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < n; ++i) comp(i, n - 1) = -coeffs[i] / coeffs[n];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    auto poly = [&](double x, double& d) {
        double v = 0.0;
        d = 0.0;
        for (int i = n; i >= 0; --i) {
            d = d * x + v;
            v = v * x + coeffs[i];
        }
        return v;
    };
    std::vector<double> out;
    for (int i = 0; i < n; ++i) {
        const std::complex<double> z = es.eigenvalues()[i];
        if (std::abs(z.imag()) > 1e-9 * std::max(1.0, std::abs(z)))
            throw NumericalError("scale_w: psi(theta) = q has a complex root");
        double x = z.real();
        for (int k = 0; k < 3; ++k) {
            double d;
            const double v = poly(x, d);
            if (d == 0.0) break;
            x -= v / d;
        }
        out.push_back(x);
    }
    return out;
}

inline void check_distinct(std::vector<double> roots) {
    std::sort(roots.begin(), roots.end());
    for (std::size_t i = 1; i < roots.size(); ++i)
        if (roots[i] - roots[i - 1] < 1e-9 * std::max(1.0, std::abs(roots[i])))
            throw NumericalError("scale_w: repeated roots of psi(theta) = q (degenerate parameters)");
}

}  // namespace detail

/// Builds W^(q) by partial fractions of 1/(psi(theta) - q) = D(theta)/N(theta).
inline ScaleFunction scale_w(const LevyModel& m, double q) {
    if (!(q > 0.0)) throw DomainError("scale_w: q must be positive");
    const double a2 = 0.5 * m.sigma() * m.sigma();
    const double c = m.drift();
    std::vector<double> num;  // N, lowest degree first
    if (!m.has_jumps()) {
        num = {-q, c, a2};
    } else {
        const double mu = m.mu_jump();
        // (a2 t^2 + c t - q)(mu + t) - lambda t
        num = {-q * mu, c * mu - q - m.lambda(), a2 * mu + c, a2};
    }
    while (!num.empty() && num.back() == 0.0) num.pop_back();

    std::vector<double> roots;
    if (num.size() == 3) roots = detail::quadratic_roots(num[2], num[1], num[0]);
    else roots = detail::real_polynomial_roots(num);
    detail::check_distinct(roots);

    auto denom = [&](double t) { return m.has_jumps() ? m.mu_jump() + t : 1.0; };
    auto num_prime = [&](double t) {
        double d = 0.0;
        for (std::size_t i = num.size(); i-- > 1;) d = d * t + static_cast<double>(i) * num[i];
        return d;
    };
    std::vector<ExpTerm> terms;
    for (double r : roots) terms.push_back({denom(r) / num_prime(r), r});
    return ScaleFunction(q, std::move(terms));
}

/// Z(y) = 1 + q int_0^y W, by term-wise antiderivative.
inline double scale_z(const ScaleFunction& w, double y) {
    if (y <= 0.0) return 1.0;
    double s = 0.0;
    for (const auto& t : w.terms()) s += t.coef * std::expm1(t.rate * y) / t.rate;
    return 1.0 + w.q() * s;
}

inline double scale_w_prime(const ScaleFunction& w, double y) {
    if (!(y > 0.0)) throw DomainError("scale_w_prime: y must be positive (use w_prime_at_zero)");
    return w.derivative_unchecked(y);
}

/// Max deviation between the term-wise transform of W and 1/(psi - q).
inline double verify_laplace_identity(const ScaleFunction& w, const LevyModel& m, std::span<const double> theta_grid) {
    const double ph = phi(m, w.q());
    double worst = 0.0;
    for (double th : theta_grid) {
        if (!(th > ph + 1e-6)) throw DomainError("verify_laplace_identity: theta must exceed Phi(q)");
        const double exact = 1.0 / (psi(m, th) - w.q());
        worst = std::max(worst, std::abs(w.laplace(th) - exact));
    }
    return worst;
}

}  // namespace levyreg
