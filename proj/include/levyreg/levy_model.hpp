#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>

#include "levyreg/distribution.hpp"
#include "levyreg/errors.hpp"
#include "levyreg/random.hpp"

namespace levyreg {

// X(t) = sigma B(t) - mu t
struct BrownianDrift {
    double sigma = 1.0;
    double mu = 0.0;
};
// X(t) = sum of Exp(mu_jump) jumps at rate lambda - p t
struct CompoundPoissonExp {
    double p = 1.0;
    double lambda = 1.0;
    double mu_jump = 1.0;
};
// X(t) = sigma B(t) + sum of Exp(mu_jump) jumps at rate lambda - p t
struct CppPlusBm {
    double sigma = 1.0;
    double p = 1.0;
    double lambda = 1.0;
    double mu_jump = 1.0;
};

/// Spectrally positive Levy input X. All exponents refer to the dual -X:
///   psi(theta) = log E exp(-theta X(1)) = sigma^2 theta^2 / 2 + c theta - lambda theta / (mu_jump + theta)
/// where c is the drift towards zero (mu for BrownianDrift, p otherwise).
class LevyModel {
public:
    using Kind = std::variant<BrownianDrift, CompoundPoissonExp, CppPlusBm>;

    LevyModel(Kind kind) : kind_(kind) {
        std::visit(
            [this](const auto& m) {
                using T = std::decay_t<decltype(m)>;
                if constexpr (std::is_same_v<T, BrownianDrift>) {
                    if (!(m.sigma > 0.0)) throw ConfigError("BrownianDrift: sigma must be positive");
                    sigma_ = m.sigma;
                    drift_ = m.mu;
                } else if constexpr (std::is_same_v<T, CompoundPoissonExp>) {
                    if (!(m.p > 0.0) || !(m.lambda > 0.0) || !(m.mu_jump > 0.0))
                        throw ConfigError("CompoundPoissonExp: p, lambda and mu_jump must be positive");
                    drift_ = m.p;
                    lambda_ = m.lambda;
                    mu_jump_ = m.mu_jump;
                } else {
                    if (!(m.sigma > 0.0) || !(m.lambda > 0.0) || !(m.mu_jump > 0.0))
                        throw ConfigError("CppPlusBm: sigma, lambda and mu_jump must be positive");
                    sigma_ = m.sigma;
                    drift_ = m.p;
                    lambda_ = m.lambda;
                    mu_jump_ = m.mu_jump;
                }
            },
            kind_);
        if (!std::isfinite(drift_)) throw ConfigError("LevyModel: drift must be finite");
    }

    const Kind& kind() const { return kind_; }
    double sigma() const { return sigma_; }
    /// Linear coefficient of psi: the rate at which X drifts down between jumps.
    double drift() const { return drift_; }
    double lambda() const { return lambda_; }
    double mu_jump() const { return mu_jump_; }
    bool has_jumps() const { return lambda_ > 0.0; }
    bool has_gaussian() const { return sigma_ > 0.0; }

    std::string describe() const {
        if (std::holds_alternative<BrownianDrift>(kind_))
            return "brownian(sigma=" + std::to_string(sigma_) + ",mu=" + std::to_string(drift_) + ")";
        if (std::holds_alternative<CompoundPoissonExp>(kind_))
            return "cpp(p=" + std::to_string(drift_) + ",lambda=" + std::to_string(lambda_) +
                   ",mu=" + std::to_string(mu_jump_) + ")";
        return "cpp_bm(sigma=" + std::to_string(sigma_) + ",p=" + std::to_string(drift_) +
               ",lambda=" + std::to_string(lambda_) + ",mu=" + std::to_string(mu_jump_) + ")";
    }

private:
    Kind kind_;
    double sigma_ = 0.0;
    double drift_ = 0.0;
    double lambda_ = 0.0;
    double mu_jump_ = 1.0;
};

/// psi for theta > -mu_jump; the public entry `psi` restricts to theta >= 0.
inline double psi_unchecked(const LevyModel& m, double theta) {
    double v = 0.5 * m.sigma() * m.sigma() * theta * theta + m.drift() * theta;
    if (m.has_jumps()) v -= m.lambda() * theta / (m.mu_jump() + theta);
    return v;
}

inline double psi(const LevyModel& m, double theta) {
    if (!(theta >= 0.0)) throw DomainError("psi: theta must be nonnegative");
    return psi_unchecked(m, theta);
}

inline double psi_prime(const LevyModel& m, double theta) {
    double v = m.sigma() * m.sigma() * theta + m.drift();
    if (m.has_jumps()) {
        const double d = m.mu_jump() + theta;
        v -= m.lambda() * m.mu_jump() / (d * d);
    }
    return v;
}

/// m = E X(1) = -psi'(0).
inline double mean_rate(const LevyModel& m) { return -psi_prime(m, 0.0); }

/// Largest root of psi(theta) = q.
inline double phi(const LevyModel& m, double q) {
    if (!(q >= 0.0)) throw DomainError("phi: q must be nonnegative");
    constexpr double tol = 1e-12;
    double lo = 0.0;
    if (psi_prime(m, 0.0) < 0.0) {
        // psi decreases first; the largest root lies right of the minimiser.
        double a = 0.0, b = 1.0;
        while (psi_prime(m, b) < 0.0) b *= 2.0;
        for (int i = 0; i < 200 && b - a > tol; ++i) {
            const double c = 0.5 * (a + b);
            (psi_prime(m, c) < 0.0 ? a : b) = c;
        }
        lo = b;
    } else if (q == 0.0) {
        return 0.0;
    }
    double hi = std::max(1.0, 2.0 * lo);
    while (psi_unchecked(m, hi) <= q) hi *= 2.0;
    for (int i = 0; i < 200 && hi - lo > tol * std::max(1.0, hi); ++i) {
        const double c = 0.5 * (lo + hi);
        (psi_unchecked(m, c) <= q ? lo : hi) = c;
    }
    double theta = 0.5 * (lo + hi);
    for (int i = 0; i < 3; ++i) {
        const double d = psi_prime(m, theta);
        if (d <= 0.0) break;
        const double next = theta - (psi_unchecked(m, theta) - q) / d;
        if (!(next >= lo - tol && next <= hi + tol)) break;
        theta = next;
    }
    return theta;
}

/// Threshold pair with explicit sentinels: `upper` empty means K = +inf.
struct Thresholds {
    double lower = 0.0;
    std::optional<double> upper;

    Thresholds() = default;
    Thresholds(double L, std::optional<double> K) : lower(L), upper(K) { validate(); }

    static Thresholds unbounded(double L = 0.0) { return Thresholds(L, std::nullopt); }

    bool has_upper() const { return upper.has_value(); }
    double upper_or_inf() const { return upper.value_or(std::numeric_limits<double>::infinity()); }

    void validate() const {
        if (!(lower >= 0.0)) throw ConfigError("Thresholds: L must be >= 0");
        if (upper && !(*upper > lower)) throw ConfigError("Thresholds: invariant L < K violated");
    }
};

/// (J_S, J_I, J_E) packed as index 4 j_s + 2 j_i + j_e.
struct EnvFlags {
    std::uint8_t j_s = 0;
    std::uint8_t j_i = 0;
    std::uint8_t j_e = 0;

    constexpr int index() const { return 4 * j_s + 2 * j_i + j_e; }
    static constexpr EnvFlags from_index(int k) {
        return EnvFlags{static_cast<std::uint8_t>((k >> 2) & 1), static_cast<std::uint8_t>((k >> 1) & 1),
                        static_cast<std::uint8_t>(k & 1)};
    }
    friend constexpr bool operator==(EnvFlags, EnvFlags) = default;
};

struct EmbeddedState {
    double u = 0.0;
    EnvFlags flags;
};

using FlagDistributions = std::array<Distribution, 8>;

inline FlagDistributions same_for_all_flags(const Distribution& d) {
    FlagDistributions out;
    out.fill(d);
    return out;
}

// Workload corrections F^(1).
struct Reset {
    FlagDistributions b;  // F1 = B_j
};
struct AddImpulse {
    FlagDistributions b;  // F1 = u + B_j
};
struct Multiply {
    double delta = 0.5;  // F1 = delta u
};
struct ResidualTarget {
    FlagDistributions b;  // F1 = (B_j - u)^+
};
struct SetIfLow {
    double level = 0.0;  // F1 = u if j_i = 0, else R
};
using WorkloadRule = std::variant<Reset, AddImpulse, Multiply, ResidualTarget, SetIfLow>;

// Input corrections F^(2).
enum class InputRule {
    HighIfLow,      // j_i
    LowIfHighSup,   // 1 - j_s
    HighIffBelowK,  // 1(u < K)
    NeverChange,    // j_e
    ComplementJs,   // 1 - j_s
    ConstantLow,    // 0
    ConstantHigh,   // 1
};

inline std::string to_string(InputRule r) {
    switch (r) {
        case InputRule::HighIfLow: return "high_if_low";
        case InputRule::LowIfHighSup: return "low_if_high_sup";
        case InputRule::HighIffBelowK: return "high_iff_below_k";
        case InputRule::NeverChange: return "never_change";
        case InputRule::ComplementJs: return "complement_js";
        case InputRule::ConstantLow: return "constant_0";
        case InputRule::ConstantHigh: return "constant_1";
    }
    return "?";
}

struct RegulationPolicy {
    WorkloadRule workload;
    InputRule input = InputRule::NeverChange;
    Thresholds thresholds;
    double q = 1.0;

    void validate() const {
        thresholds.validate();
        if (!(q > 0.0)) throw ConfigError("RegulationPolicy: inspection rate q must be positive");
        if (auto* m = std::get_if<Multiply>(&workload); m && !(m->delta > 0.0 && m->delta <= 1.0))
            throw ConfigError("RegulationPolicy: Multiply needs delta in (0, 1]");
        if (input == InputRule::HighIffBelowK && !thresholds.has_upper())
            throw ConfigError("RegulationPolicy: HighIffBelowK needs a finite K");
    }

    /// F^(1): one draw of the corrected workload.
    double apply_workload(double u, EnvFlags f, Rng& rng) const {
        return std::visit(
            [&](const auto& r) -> double {
                using T = std::decay_t<decltype(r)>;
                if constexpr (std::is_same_v<T, Reset>) return r.b[f.index()].sample(rng);
                else if constexpr (std::is_same_v<T, AddImpulse>) return u + r.b[f.index()].sample(rng);
                else if constexpr (std::is_same_v<T, Multiply>) return r.delta * u;
                else if constexpr (std::is_same_v<T, ResidualTarget>)
                    return std::max(r.b[f.index()].sample(rng) - u, 0.0);
                else return f.j_i ? r.level : u;
            },
            workload);
    }

    /// F^(2): environment for the next cycle.
    int apply_input(double u, EnvFlags f) const {
        switch (input) {
            case InputRule::HighIfLow: return f.j_i;
            case InputRule::LowIfHighSup:
            case InputRule::ComplementJs: return 1 - f.j_s;
            case InputRule::HighIffBelowK: return u < thresholds.upper_or_inf() ? 1 : 0;
            case InputRule::NeverChange: return f.j_e;
            case InputRule::ConstantLow: return 0;
            case InputRule::ConstantHigh: return 1;
        }
        return 0;
    }
};

/// Bounding pair for the stability theorem: F1(u, j) <= A u + B for u >= M,
/// F1(u, j) <= D_M for u <= M (stochastic order).
struct StabilityParams {
    Distribution A;
    Distribution B;
    Distribution D_M;
    double M = 1.0;
};

enum class Stability { StableCond1, StableCond2, Inconclusive };

inline std::string to_string(Stability s) {
    switch (s) {
        case Stability::StableCond1: return "stable_cond1";
        case Stability::StableCond2: return "stable_cond2";
        case Stability::Inconclusive: return "inconclusive";
    }
    return "?";
}

/// Sufficient conditions only: never reports instability.
inline Stability check_stability(const RegulationPolicy& policy, const StabilityParams& params,
                                 const LevyModel& model0) {
    auto checked = [](double v, const char* what) {
        if (std::isnan(v)) throw DomainError(std::string("check_stability: undefined moment ") + what);
        return v;
    };
    const double elog_a = checked(params.A.mean_log(), "E[log A]");
    const double elog_d = checked(params.D_M.mean_log(), "E[log D_M]");
    const double elog_b = checked(params.B.mean_log(), "E[log B]");
    constexpr double inf = std::numeric_limits<double>::infinity();
    if (elog_a < 0.0 && elog_d < inf && elog_b < inf) return Stability::StableCond1;

    if (params.A.is_point_mass_at(1.0)) {
        const double ed = checked(params.D_M.mean(), "E[D_M]");
        const double eb = checked(params.B.mean(), "E[B]");
        if (ed < inf && eb + mean_rate(model0) / policy.q < 0.0) return Stability::StableCond2;
    }
    return Stability::Inconclusive;
}

/// Bounding pair implied by the workload rule itself (D_M taken as the
/// correction's own increment, dominated by M + B).
inline StabilityParams stability_params_for(const RegulationPolicy& policy, double M = 1.0) {
    auto worst = [](const FlagDistributions& b) {
        // Largest mean as a crude stochastic upper representative.
        std::size_t k = 0;
        for (std::size_t i = 1; i < b.size(); ++i)
            if (b[i].mean() > b[k].mean()) k = i;
        return b[k];
    };
    return std::visit(
        [&](const auto& r) -> StabilityParams {
            using T = std::decay_t<decltype(r)>;
            if constexpr (std::is_same_v<T, Reset> || std::is_same_v<T, ResidualTarget>) {
                const auto b = worst(r.b);
                return {PointMass{0.0}, b, b, M};
            } else if constexpr (std::is_same_v<T, AddImpulse>) {
                const auto b = worst(r.b);
                return {PointMass{1.0}, b, b, M};
            } else if constexpr (std::is_same_v<T, Multiply>) {
                return {PointMass{r.delta}, PointMass{0.0}, PointMass{r.delta * M}, M};
            } else {
                return {PointMass{1.0}, PointMass{r.level}, PointMass{std::max(r.level, M)}, M};
            }
        },
        policy.workload);
}

}  // namespace levyreg
