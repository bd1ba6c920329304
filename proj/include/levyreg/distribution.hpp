#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <variant>

#include <boost/math/special_functions/expint.hpp>

#include "levyreg/errors.hpp"
#include "levyreg/random.hpp"

namespace levyreg {

struct PointMass {
    double value = 0.0;
};
struct Exponential {
    double rate = 1.0;
};
/// shift + Exp(rate)
struct ShiftedExponential {
    double shift = 0.0;
    double rate = 1.0;
};
struct Uniform {
    double lo = 0.0;
    double hi = 1.0;
};
/// P(X > x) = (scale / x)^shape for x >= scale.
struct Pareto {
    double scale = 1.0;
    double shape = 2.0;
};

/// Nonnegative distributions used for workload corrections, stability
/// bounds and jump sizes.
class Distribution {
public:
    using Kind = std::variant<PointMass, Exponential, ShiftedExponential, Uniform, Pareto>;

    Distribution() : kind_(PointMass{0.0}) {}
    Distribution(Kind k) : kind_(k) { validate(); }
    Distribution(PointMass d) : Distribution(Kind{d}) {}
    Distribution(Exponential d) : Distribution(Kind{d}) {}
    Distribution(ShiftedExponential d) : Distribution(Kind{d}) {}
    Distribution(Uniform d) : Distribution(Kind{d}) {}
    Distribution(Pareto d) : Distribution(Kind{d}) {}

    const Kind& kind() const { return kind_; }

    bool is_point_mass() const { return std::holds_alternative<PointMass>(kind_); }
    bool is_point_mass_at(double v) const {
        auto* p = std::get_if<PointMass>(&kind_);
        return p != nullptr && p->value == v;
    }

    double mean() const {
        return std::visit(
            [](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) return d.value;
                else if constexpr (std::is_same_v<T, Exponential>) return 1.0 / d.rate;
                else if constexpr (std::is_same_v<T, ShiftedExponential>) return d.shift + 1.0 / d.rate;
                else if constexpr (std::is_same_v<T, Uniform>) return 0.5 * (d.lo + d.hi);
                else {
                    if (d.shape <= 1.0) return std::numeric_limits<double>::infinity();
                    return d.shape * d.scale / (d.shape - 1.0);
                }
            },
            kind_);
    }

    /// E[log X]; -inf when X has an atom at zero.
    double mean_log() const {
        constexpr double euler_gamma = std::numbers::egamma;
        return std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) {
                    return d.value == 0.0 ? -std::numeric_limits<double>::infinity() : std::log(d.value);
                } else if constexpr (std::is_same_v<T, Exponential>) {
                    return -euler_gamma - std::log(d.rate);
                } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                    if (d.shift == 0.0) return -euler_gamma - std::log(d.rate);
                    const double a = d.rate * d.shift;
                    // E1(a) e^a underflows gracefully for large a.
                    return std::log(d.shift) + std::exp(a) * boost::math::expint(1, a);
                } else if constexpr (std::is_same_v<T, Uniform>) {
                    if (d.hi == d.lo) return std::log(d.lo);
                    if (d.lo == 0.0) return std::log(d.hi) - 1.0;
                    return (d.hi * std::log(d.hi) - d.lo * std::log(d.lo)) / (d.hi - d.lo) - 1.0;
                } else {
                    return std::log(d.scale) + 1.0 / d.shape;
                }
            },
            kind_);
    }

    /// Laplace-Stieltjes transform E[exp(-s X)], s >= 0.
    double lst(double s) const {
        return std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) return std::exp(-s * d.value);
                else if constexpr (std::is_same_v<T, Exponential>) return d.rate / (d.rate + s);
                else if constexpr (std::is_same_v<T, ShiftedExponential>)
                    return std::exp(-s * d.shift) * d.rate / (d.rate + s);
                else if constexpr (std::is_same_v<T, Uniform>) {
                    if (s == 0.0 || d.hi == d.lo) return std::exp(-s * d.lo);
                    return (std::exp(-s * d.lo) - std::exp(-s * d.hi)) / (s * (d.hi - d.lo));
                } else {
                    throw DomainError("Distribution::lst: no closed form for Pareto");
                }
            },
            kind_);
    }

    /// E[exp(theta X)] for theta >= 0; +inf when the moment does not exist.
    double mgf(double theta) const {
        constexpr double inf = std::numeric_limits<double>::infinity();
        return std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) return std::exp(theta * d.value);
                else if constexpr (std::is_same_v<T, Exponential>)
                    return theta < d.rate ? d.rate / (d.rate - theta) : inf;
                else if constexpr (std::is_same_v<T, ShiftedExponential>)
                    return theta < d.rate ? std::exp(theta * d.shift) * d.rate / (d.rate - theta) : inf;
                else if constexpr (std::is_same_v<T, Uniform>) {
                    if (theta == 0.0 || d.hi == d.lo) return std::exp(theta * d.lo);
                    return (std::exp(theta * d.hi) - std::exp(theta * d.lo)) / (theta * (d.hi - d.lo));
                } else {
                    return theta == 0.0 ? 1.0 : inf;
                }
            },
            kind_);
    }

    /// P(X > x).
    double survival(double x) const {
        return std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) return x < d.value ? 1.0 : 0.0;
                else if constexpr (std::is_same_v<T, Exponential>) return x <= 0.0 ? 1.0 : std::exp(-d.rate * x);
                else if constexpr (std::is_same_v<T, ShiftedExponential>)
                    return x <= d.shift ? 1.0 : std::exp(-d.rate * (x - d.shift));
                else if constexpr (std::is_same_v<T, Uniform>) {
                    if (x < d.lo) return 1.0;
                    if (x >= d.hi) return 0.0;
                    return (d.hi - x) / (d.hi - d.lo);
                } else {
                    return x <= d.scale ? 1.0 : std::pow(d.scale / x, d.shape);
                }
            },
            kind_);
    }

    double sample(Rng& rng) const {
        return std::visit(
            [&](const auto& d) -> double {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) return d.value;
                else if constexpr (std::is_same_v<T, Exponential>) return rng.exponential(d.rate);
                else if constexpr (std::is_same_v<T, ShiftedExponential>) return d.shift + rng.exponential(d.rate);
                else if constexpr (std::is_same_v<T, Uniform>) return d.lo + (d.hi - d.lo) * rng.uniform();
                else return d.scale * std::pow(rng.uniform(), -1.0 / d.shape);
            },
            kind_);
    }

    std::string describe() const {
        return std::visit(
            [](const auto& d) -> std::string {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) return "point(" + std::to_string(d.value) + ")";
                else if constexpr (std::is_same_v<T, Exponential>) return "exp(" + std::to_string(d.rate) + ")";
                else if constexpr (std::is_same_v<T, ShiftedExponential>)
                    return "shifted_exp(" + std::to_string(d.shift) + "," + std::to_string(d.rate) + ")";
                else if constexpr (std::is_same_v<T, Uniform>)
                    return "uniform(" + std::to_string(d.lo) + "," + std::to_string(d.hi) + ")";
                else return "pareto(" + std::to_string(d.scale) + "," + std::to_string(d.shape) + ")";
            },
            kind_);
    }

private:
    void validate() const {
        std::visit(
            [](const auto& d) {
                using T = std::decay_t<decltype(d)>;
                if constexpr (std::is_same_v<T, PointMass>) {
                    if (!(d.value >= 0.0)) throw ConfigError("point mass must sit on [0, inf)");
                } else if constexpr (std::is_same_v<T, Exponential>) {
                    if (!(d.rate > 0.0)) throw ConfigError("exponential rate must be positive");
                } else if constexpr (std::is_same_v<T, ShiftedExponential>) {
                    if (!(d.rate > 0.0) || !(d.shift >= 0.0))
                        throw ConfigError("shifted exponential needs shift >= 0 and rate > 0");
                } else if constexpr (std::is_same_v<T, Uniform>) {
                    if (!(d.lo >= 0.0) || !(d.hi >= d.lo)) throw ConfigError("uniform needs 0 <= lo <= hi");
                } else {
                    if (!(d.scale > 0.0) || !(d.shape > 0.0)) throw ConfigError("pareto needs scale, shape > 0");
                }
            },
            kind_);
    }

    Kind kind_;
};

}  // namespace levyreg
