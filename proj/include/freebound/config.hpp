#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "freebound/control.hpp"
#include "freebound/errors.hpp"
#include "freebound/grid.hpp"
#include "freebound/model.hpp"
#include "freebound/policy.hpp"
#include "freebound/stopping.hpp"

namespace freebound {

/// Malformed, incomplete or inconsistent configuration.
class ConfigError : public InvalidArgument {
public:
    using InvalidArgument::InvalidArgument;
};

struct OutputOptions {
    std::string directory = "out";
    /// Subset of {csv, json}; json controls the metadata sidecars.
    std::vector<std::string> formats{"csv", "json"};

    bool wants(const std::string& f) const {
        for (const auto& x : formats)
            if (x == f) return true;
        return false;
    }
};

/// Settings of the verification suite. Tolerances default to the values
/// the acceptance gate uses; negative entries select a grid-tied default.
struct VerifyOptions {
    /// Also solve at twice the resolution for the refinement checks.
    bool refine = true;
    std::vector<Vec2> u_probes{{2, 1}, {1, 1}, {3, 3}, {4, 2}, {1.5, 0.5}};
    std::vector<Vec2> policy_probes{{2, 1}, {1, 3}, {0.5, 0.5}, {4, 4}};
    std::vector<Vec2> degenerate_probes{{2, 1}, {1, 3}, {0.5, 0.5}, {4, 4}};
    std::size_t skorokhod_paths = 1000;
    std::size_t skorokhod_alternatives = 100;
    std::size_t skorokhod_steps = 200;
    std::size_t oracle_paths = 100000;
    double oracle_dt = 1e-3;
    double oracle_T = 15.0;
    /// The stopping Monte Carlo reads u from a grid this many times larger
    /// in each direction (same mesh width) so that few paths exit.
    std::size_t mc_domain_scale = 2;
    double degenerate_b2 = 0.5;
    /// Two-piece cost with nonnegative gradients for the regime check.
    Vec2 regime_alpha{1.0, 1.0};
    Vec2 regime_beta{2.0, 0.5};

    double complementarity_tol = 1e-6;
    double monotone_tol = 1e-6;
    double convexity_tol = 1e-6;
    double sign_tol = 1e-6;
    /// Multiple of max(h1, h2) bounding the interior PDE residual.
    double residual_factor = 10.0;
    /// < 0: 20 h1 + 10 solver tol.
    double gradient_tol = -1.0;
    double identity_ratio_low = 0.3;
    double identity_ratio_high = 0.7;
    double c1_ratio = 0.75;
    double lipschitz_ratio = 1.1;
    double degenerate_u_tol = 1e-6;
};

struct RunConfig {
    ModelParams model;
    double a = 1.0, b1 = 1.0, b2 = 0.0;
    GridSpec grid;
    SolverOptions solver;
    FarField far_field = FarField::linear;
    /// <= 0: 10 x solver tol.
    double zero_tol = 0.0;
    SimOptions sim;
    double eps = 1e-3;
    OutputOptions output;
    VerifyOptions verify;

    CostParams cost() const { return CostParams(a, b1, b2); }
    double boundary_zero_tol() const { return zero_tol > 0.0 ? zero_tol : 10.0 * solver.tol; }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, sep)) {
        const auto b = item.find_first_not_of(" \t");
        const auto e = item.find_last_not_of(" \t");
        if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
    }
    return out;
}

/// Typed reader over a flat key -> string map that remembers which keys
/// were consumed.
class ConfigReader {
public:
    explicit ConfigReader(std::map<std::string, std::string> values) : values_(std::move(values)) {}

    bool has(const std::string& key) const { return values_.count(key) > 0; }

    const std::string* raw(const std::string& key) {
        known_.insert(key);
        const auto it = values_.find(key);
        return it == values_.end() ? nullptr : &it->second;
    }

    double number(const std::string& key, double fallback, bool required = false) {
        const std::string* s = raw(key);
        if (!s) {
            if (required) throw ConfigError("config: missing required key '" + key + "'");
            return fallback;
        }
        std::size_t pos = 0;
        double v = 0.0;
        try {
            v = std::stod(*s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s->size() || !std::isfinite(v))
            throw ConfigError("config: key '" + key + "' expects a number, got '" + *s + "'");
        return v;
    }

    std::size_t count(const std::string& key, std::size_t fallback) {
        const double v = number(key, static_cast<double>(fallback));
        if (v < 0.0 || v != std::floor(v))
            throw ConfigError("config: key '" + key + "' expects a nonnegative integer");
        return static_cast<std::size_t>(v);
    }

    std::uint64_t seed(const std::string& key, std::uint64_t fallback) {
        const std::string* s = raw(key);
        if (!s) return fallback;
        try {
            std::size_t pos = 0;
            const unsigned long long v = std::stoull(*s, &pos, 0);
            if (pos == s->size() && (*s)[0] != '-') return v;
        } catch (const std::exception&) {
        }
        throw ConfigError("config: key '" + key + "' expects an unsigned integer");
    }

    bool flag(const std::string& key, bool fallback) {
        const std::string* s = raw(key);
        if (!s) return fallback;
        if (*s == "true" || *s == "1" || *s == "yes" || *s == "on") return true;
        if (*s == "false" || *s == "0" || *s == "no" || *s == "off") return false;
        throw ConfigError("config: key '" + key + "' expects true or false");
    }

    std::string text(const std::string& key, const std::string& fallback) {
        const std::string* s = raw(key);
        return s ? *s : fallback;
    }

    /// "x1:x2;x1:x2;..."
    std::vector<Vec2> points(const std::string& key, const std::vector<Vec2>& fallback) {
        const std::string* s = raw(key);
        if (!s) return fallback;
        std::vector<Vec2> out;
        for (const auto& item : split(*s, ';')) out.push_back(point_of(key, item));
        if (out.empty()) throw ConfigError("config: key '" + key + "' lists no points");
        return out;
    }

    Vec2 point(const std::string& key, const Vec2& fallback) {
        const std::string* s = raw(key);
        return s ? point_of(key, *s) : fallback;
    }

    void reject_unknown() const {
        for (const auto& [k, v] : values_)
            if (!known_.count(k)) throw ConfigError("config: unknown key '" + k + "'");
    }

private:
    static Vec2 point_of(const std::string& key, const std::string& item) {
        const auto parts = split(item, ':');
        Vec2 p{};
        bool ok = parts.size() == 2;
        for (std::size_t d = 0; ok && d < 2; ++d) {
            std::size_t pos = 0;
            try {
                p[d] = std::stod(parts[d], &pos);
            } catch (const std::exception&) {
                pos = 0;
            }
            ok = pos != 0 && pos == parts[d].size();
        }
        if (!ok) throw ConfigError("config: key '" + key + "' expects points as x1:x2, got '" +
                                   item + "'");
        return p;
    }

    std::map<std::string, std::string> values_;
    std::set<std::string> known_;
};

inline SolverMethod parse_method(const std::string& s) {
    if (s == "policy-iteration") return SolverMethod::policy_iteration;
    if (s == "psor") return SolverMethod::psor;
    throw ConfigError("config: solver.method must be policy-iteration or psor, got '" + s + "'");
}

inline FarField parse_far_field(const std::string& s) {
    if (s == "linear") return FarField::linear;
    if (s == "neumann") return FarField::neumann;
    if (s == "dirichlet") return FarField::dirichlet;
    throw ConfigError("config: solver.far_field must be linear, neumann or dirichlet, got '" + s +
                      "'");
}

inline std::string fmt_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline std::string fmt_points(const std::vector<Vec2>& ps) {
    std::string s;
    for (const auto& p : ps) {
        if (!s.empty()) s += ';';
        s += fmt_number(p[0]) + ':' + fmt_number(p[1]);
    }
    return s;
}

}  // namespace detail

/// Flattens an INI file into "section.key" -> value.
inline std::map<std::string, std::string> read_ini(std::istream& in, const std::string& origin) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config: " + origin + ": " + e.message() + " (line " +
                          std::to_string(e.line()) + ")");
    }
    std::map<std::string, std::string> out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) out[section + "." + key] = value.data();
    }
    return out;
}

/// Applies "section.key=value" overrides on top of `values`.
inline void apply_overrides(std::map<std::string, std::string>& values,
                            const std::vector<std::string>& overrides) {
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos || eq == 0 || o.find('.') > eq)
            throw ConfigError("config: override '" + o + "' is not section.key=value");
        values[o.substr(0, eq)] = o.substr(eq + 1);
    }
}

/// Builds a RunConfig from flat values. Unknown keys are rejected;
/// model.theta1, theta2, sigma11, sigma22, gamma and cost.a, b1, b2 are
/// required.
inline RunConfig make_config(const std::map<std::string, std::string>& values) {
    detail::ConfigReader r(values);
    RunConfig c;
    c.model.theta = {r.number("model.theta1", 0, true), r.number("model.theta2", 0, true)};
    c.model.sigma.xx = r.number("model.sigma11", 0, true);
    c.model.sigma.xy = r.number("model.sigma12", 0.0);
    c.model.sigma.yy = r.number("model.sigma22", 0, true);
    c.model.gamma = r.number("model.gamma", 0, true);
    c.a = r.number("cost.a", 0, true);
    c.b1 = r.number("cost.b1", 0, true);
    c.b2 = r.number("cost.b2", 0, true);

    c.grid.L1 = r.number("grid.L1", c.grid.L1);
    c.grid.L2 = r.number("grid.L2", c.grid.L2);
    c.grid.n1 = r.count("grid.n1", c.grid.n1);
    c.grid.n2 = r.count("grid.n2", c.grid.n2);

    c.solver.tol = r.number("solver.tol", c.solver.tol);
    c.solver.max_iters = r.count("solver.max_iters", c.solver.max_iters);
    c.solver.omega = r.number("solver.omega", c.solver.omega);
    c.solver.method = detail::parse_method(r.text("solver.method", to_string(c.solver.method)));
    c.solver.nested = r.flag("solver.nested", c.solver.nested);
    c.far_field = detail::parse_far_field(r.text("solver.far_field", to_string(c.far_field)));
    c.zero_tol = r.number("solver.zero_tol", c.zero_tol);

    c.sim.dt = r.number("sim.dt", c.sim.dt);
    c.sim.T = r.number("sim.T", c.sim.T);
    c.sim.tail_tol = r.number("sim.tail_tol", c.sim.tail_tol);
    c.sim.n_paths = r.count("sim.n_paths", c.sim.n_paths);
    c.sim.seed = r.seed("sim.seed", c.sim.seed);
    c.sim.workers = r.count("sim.workers", c.sim.workers);
    c.sim.bridge = r.flag("sim.bridge", c.sim.bridge);
    c.eps = r.number("sim.eps", c.eps);

    c.output.directory = r.text("output.directory", c.output.directory);
    if (const std::string* f = r.raw("output.formats")) {
        c.output.formats = detail::split(*f, ',');
        for (const auto& x : c.output.formats)
            if (x != "csv" && x != "json")
                throw ConfigError("config: output.formats accepts csv and json, got '" + x + "'");
    }

    auto& v = c.verify;
    v.refine = r.flag("verify.refine", v.refine);
    v.u_probes = r.points("verify.u_probes", v.u_probes);
    v.policy_probes = r.points("verify.policy_probes", v.policy_probes);
    v.degenerate_probes = r.points("verify.degenerate_probes", v.degenerate_probes);
    v.skorokhod_paths = r.count("verify.skorokhod_paths", v.skorokhod_paths);
    v.skorokhod_alternatives = r.count("verify.skorokhod_alternatives", v.skorokhod_alternatives);
    v.skorokhod_steps = r.count("verify.skorokhod_steps", v.skorokhod_steps);
    v.oracle_paths = r.count("verify.oracle_paths", v.oracle_paths);
    v.oracle_dt = r.number("verify.oracle_dt", v.oracle_dt);
    v.oracle_T = r.number("verify.oracle_T", v.oracle_T);
    v.mc_domain_scale = r.count("verify.mc_domain_scale", v.mc_domain_scale);
    v.degenerate_b2 = r.number("verify.degenerate_b2", v.degenerate_b2);
    v.regime_alpha = r.point("verify.regime_alpha", v.regime_alpha);
    v.regime_beta = r.point("verify.regime_beta", v.regime_beta);
    v.complementarity_tol = r.number("verify.complementarity_tol", v.complementarity_tol);
    v.monotone_tol = r.number("verify.monotone_tol", v.monotone_tol);
    v.convexity_tol = r.number("verify.convexity_tol", v.convexity_tol);
    v.sign_tol = r.number("verify.sign_tol", v.sign_tol);
    v.residual_factor = r.number("verify.residual_factor", v.residual_factor);
    v.gradient_tol = r.number("verify.gradient_tol", v.gradient_tol);
    v.identity_ratio_low = r.number("verify.identity_ratio_low", v.identity_ratio_low);
    v.identity_ratio_high = r.number("verify.identity_ratio_high", v.identity_ratio_high);
    v.c1_ratio = r.number("verify.c1_ratio", v.c1_ratio);
    v.lipschitz_ratio = r.number("verify.lipschitz_ratio", v.lipschitz_ratio);
    v.degenerate_u_tol = r.number("verify.degenerate_u_tol", v.degenerate_u_tol);
    r.reject_unknown();

    // Re-validate everything downstream modules will assume.
    try {
        validate_model(c.model);
        (void)c.cost();
        c.grid.validate();
    } catch (const InvalidArgument& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
    if (!(c.solver.tol > 0.0)) throw ConfigError("config: solver.tol must be positive");
    if (c.solver.max_iters == 0) throw ConfigError("config: solver.max_iters must be positive");
    if (!(c.solver.omega > 0.0 && c.solver.omega < 2.0))
        throw ConfigError("config: solver.omega must lie in (0, 2)");
    if (!(c.sim.dt > 0.0)) throw ConfigError("config: sim.dt must be positive");
    if (c.sim.T < 0.0 || c.sim.tail_tol < 0.0)
        throw ConfigError("config: sim.T and sim.tail_tol must be nonnegative");
    if (c.sim.n_paths < 2) throw ConfigError("config: sim.n_paths must be at least 2");
    if (!(c.eps > 0.0)) throw ConfigError("config: sim.eps must be positive");
    if (v.mc_domain_scale == 0) throw ConfigError("config: verify.mc_domain_scale must be >= 1");
    if (!(v.degenerate_b2 >= 0.0 && v.degenerate_b2 < 1.0))
        throw ConfigError("config: verify.degenerate_b2 must lie in [0, 1)");
    if (!(v.oracle_dt > 0.0) || !(v.oracle_T >= v.oracle_dt) || v.oracle_paths < 2)
        throw ConfigError("config: invalid oracle_dt, oracle_T or oracle_paths");
    return c;
}

/// Reads an INI file and applies overrides.
inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    auto values = read_ini(in, path);
    apply_overrides(values, overrides);
    return make_config(values);
}

/// The effective configuration as "section.key" -> value, defaults
/// included.
inline std::map<std::string, std::string> effective_entries(const RunConfig& c) {
    using detail::fmt_number;
    std::map<std::string, std::string> e;
    e["model.theta1"] = fmt_number(c.model.theta[0]);
    e["model.theta2"] = fmt_number(c.model.theta[1]);
    e["model.sigma11"] = fmt_number(c.model.sigma.xx);
    e["model.sigma12"] = fmt_number(c.model.sigma.xy);
    e["model.sigma22"] = fmt_number(c.model.sigma.yy);
    e["model.gamma"] = fmt_number(c.model.gamma);
    e["cost.a"] = fmt_number(c.a);
    e["cost.b1"] = fmt_number(c.b1);
    e["cost.b2"] = fmt_number(c.b2);
    e["grid.L1"] = fmt_number(c.grid.L1);
    e["grid.L2"] = fmt_number(c.grid.L2);
    e["grid.n1"] = std::to_string(c.grid.n1);
    e["grid.n2"] = std::to_string(c.grid.n2);
    e["solver.tol"] = fmt_number(c.solver.tol);
    e["solver.max_iters"] = std::to_string(c.solver.max_iters);
    e["solver.omega"] = fmt_number(c.solver.omega);
    e["solver.method"] = to_string(c.solver.method);
    e["solver.nested"] = c.solver.nested ? "true" : "false";
    e["solver.far_field"] = to_string(c.far_field);
    e["solver.zero_tol"] = fmt_number(c.boundary_zero_tol());
    e["sim.dt"] = fmt_number(c.sim.dt);
    e["sim.T"] = fmt_number(c.sim.T);
    e["sim.tail_tol"] = fmt_number(c.sim.tail_tol);
    e["sim.n_paths"] = std::to_string(c.sim.n_paths);
    e["sim.seed"] = std::to_string(c.sim.seed);
    e["sim.workers"] = std::to_string(c.sim.workers);
    e["sim.bridge"] = c.sim.bridge ? "true" : "false";
    e["sim.eps"] = fmt_number(c.eps);
    e["output.directory"] = c.output.directory;
    std::string formats;
    for (const auto& f : c.output.formats) formats += (formats.empty() ? "" : ",") + f;
    e["output.formats"] = formats;
    const auto& v = c.verify;
    e["verify.refine"] = v.refine ? "true" : "false";
    e["verify.u_probes"] = detail::fmt_points(v.u_probes);
    e["verify.policy_probes"] = detail::fmt_points(v.policy_probes);
    e["verify.degenerate_probes"] = detail::fmt_points(v.degenerate_probes);
    e["verify.skorokhod_paths"] = std::to_string(v.skorokhod_paths);
    e["verify.skorokhod_alternatives"] = std::to_string(v.skorokhod_alternatives);
    e["verify.skorokhod_steps"] = std::to_string(v.skorokhod_steps);
    e["verify.oracle_paths"] = std::to_string(v.oracle_paths);
    e["verify.oracle_dt"] = fmt_number(v.oracle_dt);
    e["verify.oracle_T"] = fmt_number(v.oracle_T);
    e["verify.mc_domain_scale"] = std::to_string(v.mc_domain_scale);
    e["verify.degenerate_b2"] = fmt_number(v.degenerate_b2);
    e["verify.regime_alpha"] = detail::fmt_points({v.regime_alpha});
    e["verify.regime_beta"] = detail::fmt_points({v.regime_beta});
    e["verify.complementarity_tol"] = fmt_number(v.complementarity_tol);
    e["verify.monotone_tol"] = fmt_number(v.monotone_tol);
    e["verify.convexity_tol"] = fmt_number(v.convexity_tol);
    e["verify.sign_tol"] = fmt_number(v.sign_tol);
    e["verify.residual_factor"] = fmt_number(v.residual_factor);
    e["verify.gradient_tol"] = fmt_number(v.gradient_tol);
    e["verify.identity_ratio_low"] = fmt_number(v.identity_ratio_low);
    e["verify.identity_ratio_high"] = fmt_number(v.identity_ratio_high);
    e["verify.c1_ratio"] = fmt_number(v.c1_ratio);
    e["verify.lipschitz_ratio"] = fmt_number(v.lipschitz_ratio);
    e["verify.degenerate_u_tol"] = fmt_number(v.degenerate_u_tol);
    return e;
}

/// The default fixture: a = 1, b1 = 1, b2 = 0, zero drift, identity
/// covariance, unit discount, 256 x 256 cells on [0, 8]^2.
inline RunConfig fixture_config() {
    return make_config({{"model.theta1", "0"},
                        {"model.theta2", "0"},
                        {"model.sigma11", "1"},
                        {"model.sigma22", "1"},
                        {"model.gamma", "1"},
                        {"cost.a", "1"},
                        {"cost.b1", "1"},
                        {"cost.b2", "0"}});
}

}  // namespace freebound
