#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <limits>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "levyreg/errors.hpp"
#include "levyreg/fluctuation.hpp"
#include "levyreg/levy_model.hpp"
#include "levyreg/scale.hpp"
#include "levyreg/simulator.hpp"
#include "levyreg/stationary.hpp"
#include "levyreg/tail.hpp"

// Config-driven front end: parse an experiment, run its tasks, write CSVs.

namespace levyreg::cli {

namespace fs = std::filesystem;
using boost::property_tree::ptree;

enum class Task { Scale, Kernels, Solve, Simulate, Tail, Compare };

inline std::string to_string(Task t) {
    switch (t) {
        case Task::Scale: return "scale";
        case Task::Kernels: return "kernels";
        case Task::Solve: return "solve";
        case Task::Simulate: return "simulate";
        case Task::Tail: return "tail";
        case Task::Compare: return "compare";
    }
    return "?";
}

struct ModelDecl {
    std::string name;
    std::optional<LevyModel> levy;  // empty for simulation-only jump laws
    PathModel path;
};

struct ExperimentConfig {
    fs::path base_dir;
    std::map<std::string, ModelDecl> models;
    std::string env0, env1;
    RegulationPolicy policy;
    std::string workload_kind;
    std::optional<Distribution> order;  // order_if_low
    std::vector<Task> tasks;
    std::vector<double> s_grid, x_grid, y_grid;
    SimConfig sim;
    fs::path output_dir;
    double z_tolerance = 4.0;
    std::optional<double> solve_delta;
    std::array<double, 2> tail_alpha{0.0, 0.0};
    std::array<double, 2> tail_c{0.0, 0.0};
    std::string scale_model, kernels_model;

    const ModelDecl& model(int env) const { return models.at(env == 0 ? env0 : env1); }
};

/// 17 significant digits.
inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

namespace detail {

inline std::string trim(std::string s) {
    auto ns = [](unsigned char c) { return !std::isspace(c); };
    s.erase(s.begin(), std::find_if(s.begin(), s.end(), ns));
    s.erase(std::find_if(s.rbegin(), s.rend(), ns).base(), s.end());
    return s;
}

inline std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    int depth = 0;
    for (char c : s) {
        if (c == '(') ++depth;
        if (c == ')') --depth;
        if (c == sep && depth == 0) {
            out.push_back(trim(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(trim(cur));
    return out;
}

inline double number(const std::string& text, const std::string& key) {
    const std::string t = lower(trim(text));
    if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
    try {
        std::size_t pos = 0;
        const double v = std::stod(t, &pos);
        if (pos != t.size()) throw std::invalid_argument(t);
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' expects a number, got '" + text + "'");
    }
}

// name(a, b, ...) -> {name, args}
inline std::pair<std::string, std::vector<double>> call(const std::string& text, const std::string& key) {
    const auto open = text.find('('), close = text.rfind(')');
    if (open == std::string::npos || close == std::string::npos || close < open)
        throw ConfigError("config: key '" + key + "' expects name(args), got '" + text + "'");
    std::vector<double> args;
    const std::string inner = trim(text.substr(open + 1, close - open - 1));
    if (!inner.empty())
        for (const auto& a : split(inner, ',')) args.push_back(number(a, key));
    return {lower(trim(text.substr(0, open))), args};
}

inline Distribution distribution(const std::string& text, const std::string& key) {
    const auto [name, a] = call(text, key);
    auto need = [&](std::size_t n) {
        if (a.size() != n)
            throw ConfigError("config: key '" + key + "': " + name + " takes " + std::to_string(n) + " arguments");
    };
    if (name == "point") return need(1), Distribution(PointMass{a[0]});
    if (name == "exp") return need(1), Distribution(Exponential{a[0]});
    if (name == "shifted_exp") return need(2), Distribution(ShiftedExponential{a[0], a[1]});
    if (name == "uniform") return need(2), Distribution(Uniform{a[0], a[1]});
    if (name == "pareto") return need(2), Distribution(Pareto{a[0], a[1]});
    throw ConfigError("config: key '" + key + "': unknown distribution '" + name + "'");
}

inline std::vector<double> grid(const std::string& text, const std::string& key) {
    std::vector<double> g;
    const std::string t = trim(text);
    if (lower(t).rfind("linspace", 0) == 0) {
        const auto [name, a] = call(t, key);
        if (a.size() != 3 || a[2] < 2 || a[2] != std::floor(a[2]))
            throw ConfigError("config: key '" + key + "': linspace(lo, hi, n) with integer n >= 2");
        const int n = static_cast<int>(a[2]);
        for (int i = 0; i < n; ++i) g.push_back(a[0] + (a[1] - a[0]) * i / (n - 1));
    } else {
        for (const auto& v : split(t, ',')) g.push_back(number(v, key));
    }
    if (g.empty()) throw ConfigError("config: grid '" + key + "' must be nonempty");
    for (double v : g)
        if (!std::isfinite(v)) throw ConfigError("config: grid '" + key + "' must be finite");
    if (!std::is_sorted(g.begin(), g.end(), [](double a, double b) { return a <= b; }) && g.size() > 1)
        throw ConfigError("config: grid '" + key + "' must be sorted ascending");
    return g;
}

inline InputRule input_rule(const std::string& text) {
    const std::string t = lower(trim(text));
    for (auto r : {InputRule::HighIfLow, InputRule::LowIfHighSup, InputRule::HighIffBelowK, InputRule::NeverChange,
                   InputRule::ComplementJs, InputRule::ConstantLow, InputRule::ConstantHigh})
        if (to_string(r) == t) return r;
    throw ConfigError("config: unknown input rule '" + text + "'");
}

class Section {
public:
    Section(const ptree* node, std::string name) : node_(node), name_(std::move(name)) {}
    bool present() const { return node_ != nullptr; }
    std::optional<std::string> get(const std::string& key) const {
        if (!node_) return std::nullopt;
        for (const auto& [k, v] : *node_)
            if (k == key) return trim(v.data());
        return std::nullopt;
    }
    std::string key(const std::string& k) const { return name_.empty() ? k : name_ + "." + k; }
    std::string str(const std::string& k) const {
        auto v = get(k);
        if (!v) throw ConfigError("config: missing key '" + key(k) + "'");
        return *v;
    }
    double num(const std::string& k) const { return number(str(k), key(k)); }
    double num(const std::string& k, double def) const {
        auto v = get(k);
        return v ? number(*v, key(k)) : def;
    }
    std::int64_t integer(const std::string& k, std::int64_t def) const {
        auto v = get(k);
        if (!v) return def;
        const double d = number(*v, key(k));
        if (d != std::floor(d) || !std::isfinite(d)) throw ConfigError("config: key '" + key(k) + "' expects an integer");
        return static_cast<std::int64_t>(d);
    }

private:
    const ptree* node_;
    std::string name_;
};

inline ModelDecl model(const std::string& name, const Section& s) {
    const std::string type = lower(s.str("type"));
    ModelDecl d;
    d.name = name;
    if (type == "cpp") {
        d.levy = LevyModel(CompoundPoissonExp{s.num("p"), s.num("lambda"), s.num("mu")});
    } else if (type == "brownian") {
        d.levy = LevyModel(BrownianDrift{s.num("sigma"), s.num("mu")});
    } else if (type == "cpp_bm") {
        d.levy = LevyModel(CppPlusBm{s.num("sigma"), s.num("p"), s.num("lambda"), s.num("mu")});
    } else if (type == "jumps") {
        PathModel p;
        p.sigma = s.num("sigma", 0.0);
        p.drift = s.num("p");
        p.lambda = s.num("lambda");
        p.jump = distribution(s.str("jump"), s.key("jump"));
        if (!(p.sigma >= 0.0) || !(p.lambda > 0.0) || !std::isfinite(p.drift))
            throw ConfigError("config: model '" + name + "': need sigma >= 0, lambda > 0, finite p");
        d.path = p;
        return d;
    } else {
        throw ConfigError("config: model '" + name + "': unknown type '" + type + "'");
    }
    d.path = PathModel::from(*d.levy);
    return d;
}

inline std::string flag_key(int k) {
    const auto f = EnvFlags::from_index(k);
    return "b_" + std::to_string(f.j_s) + std::to_string(f.j_i) + std::to_string(f.j_e);
}

inline FlagDistributions flag_distributions(const Section& s, const char* def_key) {
    std::optional<Distribution> def;
    if (auto v = s.get(def_key)) def = distribution(*v, s.key(def_key));
    FlagDistributions b;
    for (int k = 0; k < 8; ++k) {
        if (auto v = s.get(flag_key(k))) b[k] = distribution(*v, s.key(flag_key(k)));
        else if (def) b[k] = *def;
        else throw ConfigError("config: missing key '" + s.key(def_key) + "' (or " + s.key(flag_key(k)) + ")");
    }
    return b;
}

}  // namespace detail

/// Parses and validates an experiment file.
inline ExperimentConfig parse_config(const fs::path& path) {
    ptree pt;
    try {
        boost::property_tree::ini_parser::read_ini(path.string(), pt);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    ExperimentConfig c;
    c.base_dir = fs::absolute(path).parent_path();

    std::map<std::string, const ptree*> sections;
    std::optional<std::string> schema;
    for (const auto& [k, v] : pt) {
        if (v.empty()) {
            if (k == "schema") schema = detail::trim(v.data());
            else throw ConfigError("config: unknown top-level key '" + k + "'");
        } else {
            sections[k] = &v;
        }
    }
    if (!schema) throw ConfigError("config: missing required key 'schema'");
    if (*schema != "1") throw ConfigError("config: unsupported schema '" + *schema + "' (expected 1)");

    auto section = [&](const std::string& n) {
        auto it = sections.find(n);
        return detail::Section(it == sections.end() ? nullptr : it->second, n);
    };
    for (const auto& [name, node] : sections) {
        if (name.rfind("model.", 0) == 0) {
            const std::string m = name.substr(6);
            if (m.empty()) throw ConfigError("config: empty model name");
            c.models[m] = detail::model(m, detail::Section(node, name));
        } else if (name != "policy" && name != "grid" && name != "sim" && name != "tasks" && name != "compare" &&
                   name != "solve" && name != "tail" && name != "scale" && name != "kernels" && name != "output") {
            throw ConfigError("config: unknown section '" + name + "'");
        }
    }
    if (c.models.empty()) throw ConfigError("config: no [model.NAME] sections");

    const auto pol = section("policy");
    if (!pol.present()) throw ConfigError("config: missing [policy] section");
    c.env0 = pol.str("env0");
    c.env1 = pol.get("env1").value_or(c.env0);
    for (const auto& n : {c.env0, c.env1})
        if (!c.models.count(n)) throw ConfigError("config: policy references unknown model '" + n + "'");

    const double L = pol.num("L", 0.0);
    const double K = pol.num("K", std::numeric_limits<double>::infinity());
    const Thresholds th(L, std::isinf(K) ? std::nullopt : std::optional<double>(K));
    const double q = pol.num("q");
    c.workload_kind = detail::lower(pol.str("workload"));
    WorkloadRule rule;
    if (c.workload_kind == "reset") rule = Reset{detail::flag_distributions(pol, "b")};
    else if (c.workload_kind == "add") rule = AddImpulse{detail::flag_distributions(pol, "b")};
    else if (c.workload_kind == "residual") rule = ResidualTarget{detail::flag_distributions(pol, "b")};
    else if (c.workload_kind == "multiply") rule = Multiply{pol.num("delta")};
    else if (c.workload_kind == "set_if_low") rule = SetIfLow{pol.num("level")};
    else if (c.workload_kind == "order_if_low") {
        c.order = detail::distribution(pol.str("order"), pol.key("order"));
        FlagDistributions b;
        for (int k = 0; k < 8; ++k) b[k] = EnvFlags::from_index(k).j_i ? *c.order : Distribution(PointMass{0.0});
        rule = AddImpulse{b};
    } else {
        throw ConfigError("config: unknown workload rule '" + c.workload_kind + "'");
    }
    c.policy = RegulationPolicy{rule, detail::input_rule(pol.str("input")), th, q};
    c.policy.validate();

    const auto grid = section("grid");
    if (auto v = grid.get("s")) c.s_grid = detail::grid(*v, "grid.s");
    if (auto v = grid.get("x")) c.x_grid = detail::grid(*v, "grid.x");
    if (auto v = grid.get("y")) c.y_grid = detail::grid(*v, "grid.y");
    if (c.y_grid.empty()) c.y_grid = c.x_grid;
    for (double s : c.s_grid)
        if (s < 0.0) throw ConfigError("config: grid.s must be nonnegative");

    const auto sim = section("sim");
    c.sim.n_cycles = sim.integer("n_cycles", c.sim.n_cycles);
    if (sim.get("burn_in")) c.sim.burn_in = sim.integer("burn_in", 0);
    c.sim.seed = static_cast<std::uint64_t>(sim.integer("seed", 1));
    c.sim.batch_count = static_cast<int>(sim.integer("batch_count", 20));
    c.sim.replications = static_cast<int>(sim.integer("replications", 1));
    if (sim.get("brownian_step")) c.sim.brownian_step = sim.num("brownian_step");
    c.sim.validate();

    const auto tasks = section("tasks");
    for (const auto& t : detail::split(tasks.str("run"), ',')) {
        const std::string n = detail::lower(t);
        std::optional<Task> task;
        for (auto k : {Task::Scale, Task::Kernels, Task::Solve, Task::Simulate, Task::Tail, Task::Compare})
            if (to_string(k) == n) task = k;
        if (!task) throw ConfigError("config: unknown task '" + t + "'");
        c.tasks.push_back(*task);
    }
    if (c.tasks.empty()) throw ConfigError("config: tasks.run is empty");

    auto need_grid = [&](const std::vector<double>& g, const char* name, Task t) {
        if (g.empty()) throw ConfigError("config: task " + to_string(t) + " needs grid." + name);
    };
    for (auto t : c.tasks) {
        if (t == Task::Scale || t == Task::Kernels || t == Task::Tail) need_grid(c.x_grid, "x", t);
        if (t == Task::Solve || t == Task::Simulate || t == Task::Compare) need_grid(c.s_grid, "s", t);
    }

    c.z_tolerance = section("compare").num("z_tolerance", 4.0);
    if (!(c.z_tolerance > 0.0)) throw ConfigError("config: compare.z_tolerance must be positive");
    if (auto v = section("solve").get("delta")) c.solve_delta = detail::number(*v, "solve.delta");
    const auto tail = section("tail");
    c.tail_alpha = {tail.num("alpha0", 0.0), tail.num("alpha1", 0.0)};
    c.tail_c = {tail.num("c0", 0.0), tail.num("c1", 0.0)};
    c.scale_model = section("scale").get("model").value_or(c.env0);
    c.kernels_model = section("kernels").get("model").value_or(c.env0);
    for (const auto& n : {c.scale_model, c.kernels_model})
        if (!c.models.count(n)) throw ConfigError("config: unknown model '" + n + "'");
    c.output_dir = c.base_dir / section("output").get("dir").value_or("out");
    return c;
}

namespace detail {

inline const LevyModel& analytic(const ExperimentConfig& c, const std::string& name, const char* op) {
    const auto& d = c.models.at(name);
    if (!d.levy) throw ConfigError(std::string(op) + ": model '" + name + "' has no closed-form exponent");
    return *d.levy;
}

// v per flag index from the analytic route.
inline StationaryTransform solve(const ExperimentConfig& c) {
    const auto& m0 = analytic(c, c.env0, "solve");
    const auto& m1 = analytic(c, c.env1, "solve");
    RegulationPolicy pol = c.policy;
    if (c.solve_delta) {
        auto* m = std::get_if<Multiply>(&pol.workload);
        if (!m) throw ConfigError("solve: solve.delta needs a multiply workload");
        m->delta = *c.solve_delta;
        pol.validate();
    }
    if (std::holds_alternative<Reset>(pol.workload)) return solve_reset(m0, m1, pol);
    if (std::holds_alternative<Multiply>(pol.workload)) return solve_multiplicative(m0, m1, pol);
    if (c.workload_kind == "order_if_low") {
        if (pol.input != InputRule::ConstantLow && pol.input != InputRule::NeverChange)
            throw ConfigError("solve: order_if_low needs input constant_0 or never_change");
        if (pol.thresholds.has_upper()) throw ConfigError("solve: order_if_low needs K = inf");
        const auto inv = solve_inventory(m0, pol.thresholds.lower, *c.order, pol.q);
        StationaryTransform st;
        st.v[EnvFlags{0, 0, 0}.index()] = inv.v0;
        st.v[EnvFlags{0, 1, 0}.index()] = inv.v1;
        st.probs[EnvFlags{0, 0, 0}.index()] = inv.v0(0.0);
        st.probs[EnvFlags{0, 1, 0}.index()] = inv.v1(0.0);
        return st;
    }
    throw ConfigError("solve: workload rule '" + c.workload_kind + "' has no analytic solver");
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::string& header) : path_(path), out_(path) {
        if (!out_) throw ConfigError("output: cannot write " + path.string());
        out_ << header << '\n';
    }
    template <class... T>
    void row(const T&... cols) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cols), first = false), ...);
        out_ << '\n';
    }
    const fs::path& path() const { return path_; }

private:
    static std::string cell(double v) { return fmt(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(const std::string& v) { return v; }
    fs::path path_;
    std::ofstream out_;
};

}  // namespace detail

struct RunReport {
    std::vector<fs::path> files;
    std::vector<std::string> warnings;
    double worst_z = 0.0;
};

/// Runs every task in order. Throws ValidationError after all files are
/// written if a comparison exceeds the z tolerance.
inline RunReport run(const ExperimentConfig& c, std::ostream& log) {
    fs::create_directories(c.output_dir);
    RunReport rep;
    std::optional<StationaryTransform> solved;
    std::optional<ChainResult> chain;
    auto get_solved = [&]() -> const StationaryTransform& {
        if (!solved) solved = detail::solve(c);
        return *solved;
    };
    auto get_chain = [&]() -> const ChainResult& {
        if (!chain) {
            chain = run_chain(c.model(0).path, c.model(1).path, c.policy, c.sim, c.s_grid);
            if (chain->divergence_warning) {
                rep.warnings.push_back("simulate: batch means of U increase monotonically (possible instability)");
                log << "warning: " << rep.warnings.back() << '\n';
            }
        }
        return *chain;
    };
    auto note = [&](const detail::CsvWriter& w) {
        rep.files.push_back(w.path());
        log << "wrote " << w.path().string() << '\n';
    };
    auto write_solve = [&] {
        const auto& st = get_solved();
        detail::CsvWriter w(c.output_dir / "solve.csv", "flag_s,flag_i,flag_e,s,v");
        for (int l = 0; l < 8; ++l) {
            const auto f = EnvFlags::from_index(l);
            for (double s : c.s_grid) w.row(int(f.j_s), int(f.j_i), int(f.j_e), s, st(f, s));
        }
        note(w);
    };
    auto write_simulate = [&] {
        const auto& ch = get_chain();
        detail::CsvWriter w(c.output_dir / "simulate.csv", "flag_s,flag_i,flag_e,s,v_hat,se");
        for (int l = 0; l < 8; ++l) {
            const auto f = EnvFlags::from_index(l);
            for (std::size_t i = 0; i < c.s_grid.size(); ++i)
                w.row(int(f.j_s), int(f.j_i), int(f.j_e), c.s_grid[i], ch.v[l][i].mean, ch.v[l][i].se);
        }
        note(w);
    };

    if (const auto& m0 = c.model(0).levy) {
        try {
                const auto verdict = check_stability(c.policy, stability_params_for(c.policy), *m0);
                log << "stability: " << to_string(verdict) << '\n';
            } catch (const DomainError& e) {
                log << "stability: inconclusive (" << e.what() << ")\n";
            }
        }

        for (Task t : c.tasks) {
            log << "task " << to_string(t) << '\n';
            try {
            switch (t) {
                case Task::Scale: {
                    const auto w = scale_w(detail::analytic(c, c.scale_model, "scale"), c.policy.q);
                    detail::CsvWriter out(c.output_dir / "scale.csv", "x,W,Wprime,Z");
                    for (double x : c.x_grid) {
                        if (x < 0.0) throw ConfigError("scale: grid.x must be nonnegative");
                        const double wp = x > 0.0 ? scale_w_prime(w, x) : w.w_prime_at_zero();
                        out.row(x, w(x), wp, scale_z(w, x));
                    }
                    note(out);
                    break;
                }
                case Task::Kernels: {
                    const auto w = scale_w(detail::analytic(c, c.kernels_model, "kernels"), c.policy.q);
                    detail::CsvWriter out(c.output_dir / "kernels.csv",
                                          "x,y,k00,k01,k10,k11,atom00,atom01,atom10,atom11");
                    for (double x : c.x_grid) {
                        const auto ks = kernels(w, c.policy.thresholds, x);
                        for (double y : c.y_grid)
                            out.row(x, y, ks[0].density(y), ks[1].density(y), ks[2].density(y), ks[3].density(y),
                                    ks[0].atom0(), ks[1].atom0(), ks[2].atom0(), ks[3].atom0());
                    }
                    note(out);
                    break;
                }
                case Task::Solve: write_solve(); break;
                case Task::Simulate: write_simulate(); break;
                case Task::Tail: {
                    const auto& ch = get_chain();
                    const auto est = empirical_tail(ch.workloads(), c.x_grid);
                    if (est.sparse_warning) {
                        rep.warnings.push_back("tail: fewer than 50 exceedances at the largest x");
                        log << "warning: " << rep.warnings.back() << '\n';
                    }
                    const std::array<PathModel, 2> pm{c.model(0).path, c.model(1).path};
                    const std::array<TailRegime, 2> reg{classify_regime(pm[0], c.policy.q),
                                                        classify_regime(pm[1], c.policy.q)};
                    TailRegime regime = TailRegime::Neither;
                    std::function<double(double)> predictor = [](double) { return std::nan(""); };
                    if (reg[0] == TailRegime::ConvolutionEquivalent || reg[1] == TailRegime::ConvolutionEquivalent) {
                        regime = TailRegime::ConvolutionEquivalent;
                        const auto h = heavy_tail_constants({pm, c.tail_alpha, c.tail_c, c.policy.q}, ch);
                        predictor = h.predictor;
                    } else if (reg[0] == TailRegime::Cramer && reg[1] == TailRegime::Cramer && c.model(0).levy &&
                               c.model(1).levy) {
                        regime = TailRegime::Cramer;
                        const auto cr = cramer_tail(*c.model(0).levy, *c.model(1).levy, c.policy.q, ch);
                        if (cramer_moment_finite(c.policy, cr.rate)) {
                            predictor = [cr](double x) { return cr.constant_full * std::exp(-cr.rate * x); };
                        } else {
                            rep.warnings.push_back("tail: E exp(rate F1) is infinite, no exponential predictor");
                            log << "warning: " << rep.warnings.back() << '\n';
                        }
                    }
                    detail::CsvWriter out(c.output_dir / "tail.csv", "x,surv_hat,se,predictor,regime");
                    for (std::size_t g = 0; g < est.x.size(); ++g)
                        out.row(est.x[g], est.surv[g], est.se[g], predictor(est.x[g]), to_string(regime));
                    note(out);
                    break;
                }
                case Task::Compare: {
                    write_solve();
                    write_simulate();
                    const auto& st = get_solved();
                    const auto& ch = get_chain();
                    detail::CsvWriter out(c.output_dir / "compare.csv", "flag_s,flag_i,flag_e,s,v,v_hat,se,z_score");
                    for (int l = 0; l < 8; ++l) {
                        const auto f = EnvFlags::from_index(l);
                        for (std::size_t i = 0; i < c.s_grid.size(); ++i) {
                            const double v = st(f, c.s_grid[i]);
                            const auto e = ch.v[l][i];
                            const double diff = e.mean - v;
                            double z = 0.0;
                            if (e.se > 0.0) z = diff / e.se;
                            else if (std::abs(diff) > 1e-12) z = std::copysign(std::numeric_limits<double>::infinity(), diff);
                            rep.worst_z = std::max(rep.worst_z, std::abs(z));
                            out.row(int(f.j_s), int(f.j_i), int(f.j_e), c.s_grid[i], v, e.mean, e.se, z);
                        }
                    }
                    note(out);
                    log << "compare: max |z| = " << fmt(rep.worst_z) << " (tolerance " << fmt(c.z_tolerance) << ")\n";
                    break;
                }
            }
        } catch (const ConfigError& e) {
            throw ConfigError("task " + to_string(t) + ": " + e.what());
        } catch (const DomainError& e) {
            throw DomainError("task " + to_string(t) + ": " + e.what());
        } catch (const NumericalError& e) {
            throw NumericalError("task " + to_string(t) + ": " + e.what());
        }
    }
    if (rep.worst_z > c.z_tolerance)
        throw ValidationError("compare: analytic and simulated transforms disagree, max |z| = " + fmt(rep.worst_z) +
                              " > " + fmt(c.z_tolerance));
    return rep;
}

/// Canned experiment files shipped with `levyreg demo`.
inline std::string demo_config(const std::string& name) {
    if (name == "clearing")
        return R"(# Clearing: after each inspection the workload is reset to an exponential
# level whose rate depends on the cycle flags; the input switches to the
# slow process whenever the workload crossed K.
schema = 1

[model.slow]
type = cpp
p = 1.0
lambda = 1.0
mu = 2.0

[model.fast]
type = cpp
p = 1.5
lambda = 2.0
mu = 1.5

[policy]
env0 = slow
env1 = fast
q = 1.0
workload = reset
b_000 = exp(1.5)
b_001 = exp(1.0)
b_010 = exp(2.0)
b_011 = exp(1.3)
b_100 = exp(1.2)
b_101 = exp(1.4)
b_110 = exp(3.0)
b_111 = exp(1.1)
input = low_if_high_sup
L = 0.5
K = 3.0

[grid]
s = 0.5, 1, 2
x = linspace(0, 6, 25)

[sim]
n_cycles = 200000
seed = 20240601
batch_count = 20

[tasks]
run = compare, tail

[compare]
z_tolerance = 4

[output]
dir = clearing_out
)";
    if (name == "tcp")
        return R"(# Multiplicative decrease: the workload is halved at every inspection and the
# input switches to the fast process iff the workload hit zero in the cycle.
schema = 1

[model.slow]
type = cpp
p = 1.0
lambda = 1.0
mu = 2.0

[model.fast]
type = cpp
p = 1.5
lambda = 2.0
mu = 1.5

[policy]
env0 = slow
env1 = fast
q = 1.0
workload = multiply
delta = 0.5
input = high_if_low
L = 0.0

[grid]
s = 0.5, 1, 2

[sim]
n_cycles = 200000
seed = 20240602

[tasks]
run = compare

[output]
dir = tcp_out
)";
    if (name == "inventory")
        return R"(# Inventory: an order of size 2 is added whenever the content dropped to L = 1
# during the cycle.
schema = 1

[model.stock]
type = cpp
p = 1.0
lambda = 1.0
mu = 2.0

[policy]
env0 = stock
q = 1.0
workload = order_if_low
order = point(2)
input = constant_0
L = 1.0

[grid]
s = 0.5, 1, 2

[sim]
n_cycles = 200000
seed = 20240603

[tasks]
run = compare

[output]
dir = inventory_out
)";
    throw ConfigError("demo: unknown demo '" + name + "' (expected clearing, tcp or inventory)");
}

/// Exit code for an exception escaping run/validate.
inline int exit_code(const std::exception& e) {
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const DomainError*>(&e)) return 2;
    if (dynamic_cast<const ValidationError*>(&e)) return 4;
    if (dynamic_cast<const NumericalError*>(&e)) return 3;
    return 1;
}

}  // namespace levyreg::cli
