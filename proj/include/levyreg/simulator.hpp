#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "levyreg/distribution.hpp"
#include "levyreg/errors.hpp"
#include "levyreg/levy_model.hpp"
#include "levyreg/random.hpp"
#include "levyreg/stats.hpp"

namespace levyreg {

/// Path-level description of X: sigma B(t) + compound Poisson(lambda, jump) - drift t.
/// Unlike LevyModel the jump law is arbitrary (e.g. Pareto for tail experiments).
struct PathModel {
    double sigma = 0.0;
    double drift = 0.0;
    double lambda = 0.0;
    Distribution jump = PointMass{0.0};

    static PathModel from(const LevyModel& m) {
        PathModel p;
        p.sigma = m.sigma();
        p.drift = m.drift();
        if (m.has_jumps()) {
            p.lambda = m.lambda();
            p.jump = Exponential{m.mu_jump()};
        }
        return p;
    }

    /// E X(1).
    double mean_rate() const { return lambda > 0.0 ? lambda * jump.mean() - drift : -drift; }
};

/// One inter-inspection cycle. Levels of the reflected path Y (started at
/// u_start) plus the unreflected increment X from 0 over the same cycle.
struct CycleSample {
    double u_start = 0.0;
    double u_end = 0.0;
    double sup = 0.0;  // sup of Y over the cycle, start included
    double inf = 0.0;  // inf of Y over the cycle, start included
    int env = 0;
    EnvFlags flags_end;
    double net = 0.0;      // X(e_q)
    double net_sup = 0.0;  // sup_{t <= e_q} X(t)
    double net_inf = 0.0;  // inf_{t <= e_q} X(t)
    double length = 0.0;
};

struct SimConfig {
    std::int64_t n_cycles = 100000;
    std::optional<std::int64_t> burn_in;         // default max(n_cycles / 10, 1000)
    std::uint64_t seed = 1;
    std::optional<double> brownian_step;         // default 1e-3 / q
    int batch_count = 20;
    int replications = 1;
    double probe_rate = 0.0;                     // > 0 samples V at independent Poisson times

    std::int64_t effective_burn_in() const {
        return burn_in.value_or(std::max<std::int64_t>(n_cycles / 10, 1000));
    }
    double effective_step(double q) const { return brownian_step.value_or(1e-3 / q); }

    void validate() const {
        if (n_cycles <= 0) throw ConfigError("SimConfig: n_cycles must be positive");
        if (effective_burn_in() < 0 || effective_burn_in() >= n_cycles)
            throw ConfigError("SimConfig: invariant burn_in < n_cycles violated");
        if (brownian_step && !(*brownian_step > 0.0)) throw ConfigError("SimConfig: brownian_step must be positive");
        if (batch_count < 2) throw ConfigError("SimConfig: batch_count must be at least 2");
        if (replications < 1) throw ConfigError("SimConfig: replications must be at least 1");
        if (!(probe_rate >= 0.0)) throw ConfigError("SimConfig: probe_rate must be nonnegative");
        if ((n_cycles - effective_burn_in()) < batch_count)
            throw ConfigError("SimConfig: fewer retained cycles than batches");
    }
};

namespace detail {

// Tracks X and its running extremes; Y = X + max(x0, -inf X).
struct PathState {
    double x0 = 0.0;
    double x = 0.0;
    double xsup = 0.0;
    double xinf = 0.0;
    double ysup = 0.0;
    double yinf = 0.0;

    double y() const { return x + std::max(x0, -xinf); }

    // Continuous piece from x to x_end whose extremes are xmax, xmin.
    void move(double x_end, double xmax, double xmin) {
        ysup = std::max(ysup, xmax + std::max(x0, -xinf));
        xsup = std::max(xsup, xmax);
        xinf = std::min(xinf, xmin);
        yinf = std::min(yinf, xmin + std::max(x0, -xinf));
        x = x_end;
        ysup = std::max(ysup, y());
    }
    void jump(double j) {
        x += j;
        xsup = std::max(xsup, x);
        ysup = std::max(ysup, y());
    }
};

struct ProbeClock {
    double rate = 0.0;
    double next = 0.0;
    std::vector<double>* out = nullptr;
    bool active() const { return out != nullptr && rate > 0.0; }
};

}  // namespace detail

/// Simulates Y = x0 + X reflected at 0 over an independent Exp(q) time. Pure
/// drift-plus-jump paths are exact; sigma > 0 uses a grid of `brownian_step`
/// with Brownian-bridge extremes inside each step.
inline CycleSample simulate_cycle(const PathModel& m, double q, double x0, Rng& rng, double brownian_step = 0.0,
                                  std::vector<double>* probes = nullptr, double probe_rate = 0.0) {
    if (!(x0 >= 0.0)) throw DomainError("simulate_cycle: x0 must be nonnegative");
    if (!(q > 0.0)) throw DomainError("simulate_cycle: q must be positive");
    const double T = rng.exponential(q);
    const double h = brownian_step > 0.0 ? brownian_step : 1e-3 / q;
    detail::PathState st{x0, 0.0, 0.0, 0.0, x0, x0};
    detail::ProbeClock clock{probe_rate, 0.0, probes};
    if (clock.active()) clock.next = rng.exponential(probe_rate);

    double t = 0.0;
    double next_jump = m.lambda > 0.0 ? rng.exponential(m.lambda) : std::numeric_limits<double>::infinity();
    while (t < T) {
        const double seg_end = std::min(next_jump, T);
        if (m.sigma > 0.0) {
            while (t < seg_end) {
                const double tau = std::min(h, seg_end - t);
                const double sd = m.sigma * std::sqrt(tau);
                const double a = st.x, b = a - m.drift * tau + sd * rng.gaussian();
                const double d2 = (b - a) * (b - a);
                const double var = m.sigma * m.sigma * tau;
                const double xmax = 0.5 * (a + b + std::sqrt(d2 - 2.0 * var * std::log(rng.uniform())));
                const double xmin = 0.5 * (a + b - std::sqrt(d2 - 2.0 * var * std::log(rng.uniform())));
                st.move(b, xmax, xmin);
                t += tau;
                while (clock.active() && clock.next < t && clock.next < T) {
                    clock.out->push_back(st.y());
                    clock.next += rng.exponential(clock.rate);
                }
            }
        } else {
            const double tau = seg_end - t;
            const double x_start = st.x, y_start = st.y();
            while (clock.active() && clock.next < seg_end) {
                clock.out->push_back(std::max(y_start - m.drift * (clock.next - t), 0.0));
                clock.next += rng.exponential(clock.rate);
            }
            st.move(x_start - m.drift * tau, x_start, x_start - m.drift * tau);
            t = seg_end;
        }
        if (next_jump < T) {
            st.jump(m.jump.sample(rng));
            next_jump += rng.exponential(m.lambda);
        }
    }
    CycleSample c;
    c.u_start = x0;
    c.u_end = st.y();
    c.sup = st.ysup;
    c.inf = st.yinf;
    c.net = st.x;
    c.net_sup = st.xsup;
    c.net_inf = st.xinf;
    c.length = T;
    return c;
}

inline CycleSample simulate_cycle(const LevyModel& m, double q, double x0, Rng& rng, double brownian_step = 0.0) {
    return simulate_cycle(PathModel::from(m), q, x0, rng, brownian_step);
}

/// Flags at the end of a cycle: J_S = 1(sup >= K), J_I = 1(inf <= L).
inline EnvFlags cycle_flags(const CycleSample& c, const Thresholds& th) {
    EnvFlags f;
    f.j_s = th.has_upper() && c.sup >= *th.upper ? 1 : 0;
    f.j_i = c.inf <= th.lower ? 1 : 0;
    f.j_e = static_cast<std::uint8_t>(c.env);
    return f;
}

/// One retained inspection epoch.
struct ChainSample {
    double u = 0.0;       // workload just before inspection
    EnvFlags flags;
    double u_post = 0.0;  // F1(u, flags)
    int env_next = 0;     // F2(u, flags)
};

struct ChainResult {
    std::vector<ChainSample> samples;     // replication-major order
    std::vector<double> probes;           // V at independent Poisson times (if requested)
    std::array<Estimate, 8> probs{};
    std::vector<double> s_grid;
    std::array<std::vector<Estimate>, 8> v;  // E[e^{-sU}; J = l] per s
    std::vector<double> batch_mean_u;     // per batch, replication 0
    bool divergence_warning = false;
    int batch_count = 20;

    std::vector<double> workloads() const {
        std::vector<double> u;
        u.reserve(samples.size());
        for (const auto& s : samples) u.push_back(s.u);
        return u;
    }

    /// Batch-means estimate of E f(sample).
    template <class F>
    Estimate estimate(F f) const {
        std::vector<double> vals;
        vals.reserve(samples.size());
        for (const auto& s : samples) vals.push_back(f(s));
        return batch_means(vals, batch_count);
    }
};

/// Replication parallelism: LEVYREG_THREADS if set, else the hardware count.
inline int thread_budget() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("LEVYREG_THREADS")) {
        try {
            const int v = std::stoi(env);
            if (v >= 1) n = v;
        } catch (...) {
            throw ConfigError("LEVYREG_THREADS must be a positive integer");
        }
    }
    return n;
}

namespace detail {

struct ReplicationOutput {
    std::vector<ChainSample> samples;
    std::vector<double> probes;
};

inline ReplicationOutput run_replication(const std::array<PathModel, 2>& models, const RegulationPolicy& policy,
                                         const SimConfig& cfg, int rep) {
    Rng rng(cfg.seed, static_cast<std::uint64_t>(rep));
    const double h = cfg.effective_step(policy.q);
    const std::int64_t burn = cfg.effective_burn_in();
    ReplicationOutput out;
    out.samples.reserve(static_cast<std::size_t>(cfg.n_cycles - burn));
    double u = 0.0;
    int env = 0;
    for (std::int64_t n = 0; n < cfg.n_cycles; ++n) {
        const bool keep = n >= burn;
        auto c = simulate_cycle(models[env], policy.q, u, rng, h, keep ? &out.probes : nullptr, cfg.probe_rate);
        c.env = env;
        const EnvFlags f = cycle_flags(c, policy.thresholds);
        c.flags_end = f;
        const double post = policy.apply_workload(c.u_end, f, rng);
        const int next = policy.apply_input(c.u_end, f);
        if (keep) out.samples.push_back({c.u_end, f, post, next});
        if (!std::isfinite(post)) throw NumericalError("run_chain: workload overflow");
        u = post;
        env = next;
    }
    return out;
}

}  // namespace detail

/// Simulates the embedded chain (U_n, J_n) under `policy`, discarding burn-in.
/// Results depend only on (models, policy, config, s_grid), never on threading.
inline ChainResult run_chain(const PathModel& m0, const PathModel& m1, const RegulationPolicy& policy,
                             const SimConfig& cfg, std::span<const double> s_grid = {}) {
    policy.validate();
    cfg.validate();
    const std::array<PathModel, 2> models{m0, m1};
    std::vector<detail::ReplicationOutput> reps(cfg.replications);
    const int threads = std::min(cfg.replications, thread_budget());
    if (threads <= 1) {
        for (int r = 0; r < cfg.replications; ++r) reps[r] = detail::run_replication(models, policy, cfg, r);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(threads);
        for (int t = 0; t < threads; ++t)
            pool.emplace_back([&, t] {
                try {
                    for (int r = t; r < cfg.replications; r += threads)
                        reps[r] = detail::run_replication(models, policy, cfg, r);
                } catch (...) {
                    errors[t] = std::current_exception();
                }
            });
        for (auto& th : pool) th.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    }

    ChainResult res;
    res.batch_count = cfg.batch_count * cfg.replications;
    for (auto& r : reps) {
        res.samples.insert(res.samples.end(), r.samples.begin(), r.samples.end());
        res.probes.insert(res.probes.end(), r.probes.begin(), r.probes.end());
    }

    std::vector<double> u0;
    for (const auto& s : reps[0].samples) u0.push_back(s.u);
    res.batch_mean_u = batch_averages(u0, cfg.batch_count);
    res.divergence_warning = std::is_sorted(res.batch_mean_u.begin(), res.batch_mean_u.end(),
                                            [](double a, double b) { return a <= b; });

    for (int l = 0; l < 8; ++l)
        res.probs[l] = res.estimate([l](const ChainSample& s) { return s.flags.index() == l ? 1.0 : 0.0; });
    res.s_grid.assign(s_grid.begin(), s_grid.end());
    for (int l = 0; l < 8; ++l)
        for (double s : res.s_grid)
            res.v[l].push_back(res.estimate(
                [l, s](const ChainSample& c) { return c.flags.index() == l ? std::exp(-s * c.u) : 0.0; }));
    return res;
}

inline ChainResult run_chain(const LevyModel& m0, const LevyModel& m1, const RegulationPolicy& policy,
                             const SimConfig& cfg, std::span<const double> s_grid = {}) {
    return run_chain(PathModel::from(m0), PathModel::from(m1), policy, cfg, s_grid);
}

struct TailEstimate {
    std::vector<double> x;
    std::vector<double> surv;
    std::vector<double> se;
    bool sparse_warning = false;
    std::size_t exceedances_at_max = 0;
};

/// Empirical P(U > x) with Greenwood (binomial, no censoring) standard errors.
inline TailEstimate empirical_tail(std::span<const double> samples, std::span<const double> x_grid) {
    if (samples.size() < 10000) throw DomainError("empirical_tail: need at least 1e4 samples");
    if (x_grid.empty() || !std::is_sorted(x_grid.begin(), x_grid.end()))
        throw DomainError("empirical_tail: x grid must be nonempty and ascending");
    std::vector<double> s(samples.begin(), samples.end());
    std::sort(s.begin(), s.end());
    const double n = static_cast<double>(s.size());
    TailEstimate out;
    for (double x : x_grid) {
        const auto k = static_cast<std::size_t>(s.end() - std::upper_bound(s.begin(), s.end(), x));
        const double p = k / n;
        out.x.push_back(x);
        out.surv.push_back(p);
        out.se.push_back(std::sqrt(p * (1.0 - p) / n));
        out.exceedances_at_max = k;
    }
    out.sparse_warning = out.exceedances_at_max < 50;
    return out;
}

}  // namespace levyreg
