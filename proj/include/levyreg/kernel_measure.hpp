#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>
#include <vector>

#include "levyreg/errors.hpp"

namespace levyreg {

/// coef * exp(rate * (y - shift)).
struct KTerm {
    double coef = 0.0;
    double rate = 0.0;
    double shift = 0.0;
};

/// Density sum of KTerms on [lo, hi); hi may be +inf.
struct ExpPiece {
    double lo = 0.0;
    double hi = std::numeric_limits<double>::infinity();
    std::vector<KTerm> terms;
};

namespace detail {

inline bool same_rate(double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)); }

// int_u^v exp(r (y - a) - s y) dy, with u < v <= inf; k = 0 or first moment k = 1.
inline double seg_moment(double r, double a, double s, double u, double v, int k) {
    const double b = r - s;
    if (std::isinf(v)) {
        if (!(b < 0.0)) throw NumericalError("KernelMeasure: non-integrable term on an unbounded piece");
        const double pref = std::exp(r * (u - a) - s * u);
        return k == 0 ? pref / -b : pref * (u / -b + 1.0 / (b * b));
    }
    const double len = v - u;
    const double bl = b * len;
    if (std::abs(bl) < 1e-8) {
        const double pref = std::exp(r * (u - a) - s * u);
        const double e0 = len * (1.0 + 0.5 * bl);
        const double e1 = len * len * (0.5 + bl / 3.0);
        return k == 0 ? pref * e0 : pref * (u * e0 + e1);
    }
    if (bl <= 0.0) {
        // anchored at u: int_0^len (u + t)^k e^{b t} dt
        const double pref = std::exp(r * (u - a) - s * u);
        const double ebl = std::exp(bl);
        const double e0 = std::expm1(bl) / b;
        if (k == 0) return pref * e0;
        const double e1 = len * ebl / b - e0 / b;
        return pref * (u * e0 + e1);
    }
    // anchored at v: int_{-len}^0 (v + t)^k e^{b t} dt
    const double pref = std::exp(r * (v - a) - s * v);
    const double emb = std::exp(-bl);
    const double e0 = -std::expm1(-bl) / b;
    if (k == 0) return pref * e0;
    const double e1 = -1.0 / (b * b) + len * emb / b + emb / (b * b);
    return pref * (v * e0 + e1);
}

}  // namespace detail

/// Atom at zero plus a piecewise exponential-polynomial density on (0, inf).
/// Every kernel of the reflected process at an exponential time has this form
/// once W is an exponential sum. Terms are stored anchored at the piece end
/// towards which they grow, so stored coefficients stay bounded.
class KernelMeasure {
public:
    KernelMeasure() = default;
    KernelMeasure(double atom0, std::vector<ExpPiece> pieces) : atom0_(atom0), pieces_(std::move(pieces)) {
        normalize();
    }

    static KernelMeasure zero() { return {}; }

    double atom0() const { return atom0_; }
    const std::vector<ExpPiece>& pieces() const { return pieces_; }

    double density(double y) const {
        double s = 0.0;
        for (const auto& p : pieces_) {
            if (y < p.lo || y >= p.hi) continue;
            for (const auto& t : p.terms) s += t.coef * std::exp(t.rate * (y - t.shift));
        }
        return s;
    }
    double operator()(double y) const { return density(y); }

    /// Smallest interval containing the density's support.
    std::pair<double, double> support_hint() const {
        if (pieces_.empty()) return {0.0, 0.0};
        return {pieces_.front().lo, pieces_.back().hi};
    }

    double mass() const { return lst(0.0); }

    /// atom0 + int_0^inf e^{-s y} density(y) dy.
    double lst(double s) const {
        double v = atom0_;
        for (const auto& p : pieces_)
            for (const auto& t : p.terms) v += t.coef * detail::seg_moment(t.rate, t.shift, s, p.lo, p.hi, 0);
        return v;
    }

    /// int y e^{-s y} density(y) dy, i.e. -d/ds lst(s).
    double lst_neg_derivative(double s) const {
        double v = 0.0;
        for (const auto& p : pieces_)
            for (const auto& t : p.terms) v += t.coef * detail::seg_moment(t.rate, t.shift, s, p.lo, p.hi, 1);
        return v;
    }

    double mean() const { return lst_neg_derivative(0.0); }

    /// atom0 + int_0^x density.
    double cdf(double x) const {
        if (x < 0.0) return 0.0;
        double v = atom0_;
        for (const auto& p : pieces_) {
            if (x <= p.lo) continue;
            const double hi = std::min(x, p.hi);
            for (const auto& t : p.terms) v += t.coef * detail::seg_moment(t.rate, t.shift, 0.0, p.lo, hi, 0);
        }
        return v;
    }

    KernelMeasure scaled(double c) const {
        KernelMeasure out = *this;
        out.atom0_ *= c;
        for (auto& p : out.pieces_)
            for (auto& t : p.terms) t.coef *= c;
        return out;
    }

    friend KernelMeasure operator+(const KernelMeasure& a, const KernelMeasure& b) {
        std::vector<ExpPiece> pieces = a.pieces_;
        pieces.insert(pieces.end(), b.pieces_.begin(), b.pieces_.end());
        return KernelMeasure(a.atom0_ + b.atom0_, std::move(pieces));
    }
    friend KernelMeasure operator-(const KernelMeasure& a, const KernelMeasure& b) { return a + b.scaled(-1.0); }

private:
    // Split on all breakpoints, re-anchor, and merge equal rates so that
    // cancelling terms vanish exactly.
    void normalize() {
        std::vector<double> cuts;
        for (const auto& p : pieces_) {
            if (p.hi <= p.lo) continue;
            cuts.push_back(p.lo);
            cuts.push_back(p.hi);
        }
        std::sort(cuts.begin(), cuts.end());
        cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
        std::vector<ExpPiece> out;
        for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
            const double lo = cuts[i], hi = cuts[i + 1];
            std::vector<KTerm> merged;
            std::vector<double> magnitude;
            for (const auto& p : pieces_) {
                if (p.hi <= p.lo || p.lo > lo || p.hi < hi) continue;
                for (const auto& t : p.terms) {
                    const double anchor = (t.rate > 0.0 && std::isfinite(hi)) ? hi : lo;
                    const KTerm a{t.coef * std::exp(t.rate * (anchor - t.shift)), t.rate, anchor};
                    if (a.coef == 0.0) continue;
                    auto it = std::find_if(merged.begin(), merged.end(),
                                           [&](const KTerm& m) { return detail::same_rate(m.rate, a.rate); });
                    if (it == merged.end()) {
                        merged.push_back(a);
                        magnitude.push_back(std::abs(a.coef));
                    } else {
                        it->coef += a.coef;
                        magnitude[it - merged.begin()] += std::abs(a.coef);
                    }
                }
            }
            std::vector<KTerm> kept;
            for (std::size_t k = 0; k < merged.size(); ++k) {
                if (std::abs(merged[k].coef) <= 64.0 * std::numeric_limits<double>::epsilon() * magnitude[k])
                    continue;
                kept.push_back(merged[k]);
            }
            if (!kept.empty()) out.push_back({lo, hi, std::move(kept)});
        }
        pieces_ = std::move(out);
    }

    double atom0_ = 0.0;
    std::vector<ExpPiece> pieces_;
};

}  // namespace levyreg
