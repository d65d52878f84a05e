// Command-line front end: one subcommand per artifact.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 degenerate mode
// (b1 = 0) where a free boundary was required, 3 solver non-convergence,
// 4 a property report or the verification suite failed, 5 any other
// runtime error (for example an unwritable output directory).

#include <exception>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freebound/boundary.hpp"
#include "freebound/config.hpp"
#include "freebound/hjb.hpp"
#include "freebound/io.hpp"
#include "freebound/policy.hpp"
#include "freebound/stopping.hpp"
#include "freebound/suite.hpp"
#include "freebound/verify.hpp"

namespace fb = freebound;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

enum Exit { ok = 0, config_error = 1, degenerate = 2, no_convergence = 3, check_failed = 4,
            runtime_error = 5 };

struct Common {
    std::string config_path;
    std::vector<std::string> sets;
    std::string out;
    long workers = -1;
};

fb::RunConfig load(const Common& c) {
    std::vector<std::string> sets = c.sets;
    if (!c.out.empty()) sets.push_back("output.directory=" + c.out);
    if (c.workers >= 0) sets.push_back("sim.workers=" + std::to_string(c.workers));
    return fb::load_config(c.config_path, sets);
}

json point_json(const fb::Vec2& x) { return json::array({x[0], x[1]}); }

fb::Vec2 parse_point(const std::string& s) {
    const auto parts = fb::detail::split(s, ':');
    if (parts.size() != 2) throw fb::ConfigError("--x expects x1:x2, got '" + s + "'");
    try {
        return {std::stod(parts[0]), std::stod(parts[1])};
    } catch (const std::exception&) {
        throw fb::ConfigError("--x expects x1:x2, got '" + s + "'");
    }
}

/// Writes `name.csv` (when csv output is on) and `name.json`.
template <typename WriteCsv>
void emit(const fb::RunConfig& cfg, const std::string& name, const WriteCsv& write_csv,
          const json& meta) {
    const fs::path dir = cfg.output.directory;
    if (cfg.output.wants("csv")) {
        auto out = fb::open_output(dir, name + ".csv");
        write_csv(out);
    }
    if (cfg.output.wants("json")) fb::write_json(dir, name + ".json", meta);
}

int cmd_stopping(const Common& common, bool auto_enlarge) {
    const fb::RunConfig cfg = load(common);
    const fb::CostParams cost = cfg.cost();
    fb::StoppingSolution sol;
    json meta = fb::metadata(cfg, "stopping");
    if (auto_enlarge) {
        fb::AutoStoppingSolution a = fb::solve_u_auto(cfg.model, cost, cfg.grid, cfg.solver,
                                                      cfg.far_field);
        meta["row_zero_check"] = {{"ok", a.zero_check.ok},
                                  {"failing_columns", a.zero_check.failing_columns.size()},
                                  {"doublings", a.doublings}};
        sol = std::move(a.solution);
    } else {
        sol = fb::solve_u(cfg.model, cost, cfg.grid, cfg.solver, cfg.far_field);
        const fb::RowZeroReport z = fb::row_zero_check(sol.u, 10.0 * cfg.solver.tol);
        meta["row_zero_check"] = {{"ok", z.ok}, {"failing_columns", z.failing_columns.size()}};
    }
    const fb::StoppingReport r = fb::check_u(sol);
    meta["grid"] = fb::to_json(sol.u.grid);
    meta["stats"] = fb::to_json(sol.stats);
    meta["far_field"] = fb::to_string(cfg.far_field);
    meta["checks"] = {{"min_value", r.min_value},
                      {"max_x1_zero_column", r.max_x1_zero_column},
                      {"max_row_decrease", r.max_row_decrease},
                      {"max_column_increase", r.max_column_increase},
                      {"residual", r.residual}};
    emit(cfg, "u", [&](std::ostream& os) { fb::write_field_csv(os, sol.u); }, meta);
    std::cout << "u: " << sol.u.grid.n1 << "x" << sol.u.grid.n2 << " cells, "
              << sol.stats.iterations << " iterations, residual " << sol.stats.residual
              << ", max " << sol.u.max() << '\n';
    return ok;
}

int cmd_hjb(const Common& common, bool residual) {
    const fb::RunConfig cfg = load(common);
    const fb::CostParams cost = cfg.cost();
    const fb::HjbSolution sol = fb::solve_v(cfg.model, cost, cfg.grid, cfg.solver);
    json meta = fb::metadata(cfg, "hjb");
    meta["grid"] = fb::to_json(cfg.grid);
    meta["stats"] = fb::to_json(sol.stats);
    const fb::PushActiveSet ps = fb::push_active_set(sol);
    meta["push_nodes"] = ps.push_nodes;
    meta["interior_push_nodes"] = ps.interior_push_nodes;
    emit(cfg, "V", [&](std::ostream& os) { fb::write_field_csv(os, sol.V); }, meta);
    if (residual) {
        const fb::ScalarField u = fb::solve_u(cfg.model, cost, cfg.grid, cfg.solver,
                                              cfg.far_field).u;
        const fb::Boundary b = fb::extract_boundary(u, cfg.boundary_zero_tol());
        const fb::ScalarField r = fb::hjb_residual(cfg.model, cost, sol.V, u, b);
        std::size_t counted = 0;
        const double sup = fb::residual_sup(r, &counted);
        json rmeta = fb::metadata(cfg, "hjb --residual");
        rmeta["grid"] = fb::to_json(cfg.grid);
        rmeta["sup"] = sup;
        rmeta["nodes"] = counted;
        emit(cfg, "residual", [&](std::ostream& os) { fb::write_residual_csv(os, r); }, rmeta);
        std::cout << "residual sup " << sup << " over " << counted << " nodes\n";
    }
    std::cout << "V: " << cfg.grid.n1 << "x" << cfg.grid.n2 << " cells, " << sol.stats.iterations
              << " iterations, residual " << sol.stats.residual << ", V(0,0) "
              << sol.V.at(0, 0) << '\n';
    return ok;
}

std::shared_ptr<const fb::Boundary> solve_boundary(const fb::RunConfig& cfg) {
    const fb::AutoStoppingSolution a =
        fb::solve_u_auto(cfg.model, cfg.cost(), cfg.grid, cfg.solver, cfg.far_field);
    return std::make_shared<const fb::Boundary>(
        fb::extract_boundary(a.solution.u, cfg.boundary_zero_tol()));
}

int cmd_boundary(const Common& common) {
    const fb::RunConfig cfg = load(common);
    const auto b = solve_boundary(cfg);
    const fb::BoundaryReport r = fb::check_boundary(*b, cfg.cost().c());
    json meta = fb::metadata(cfg, "boundary");
    meta["zero_tol"] = b->zero_tol;
    meta["rows"] = b->psi.size();
    meta["L2"] = b->x2_grid.back();
    meta["report"] = {{"max_slope", r.max_slope},     {"slope_limit", r.slope_limit},
                      {"slope_ok", r.slope_ok},       {"monotonicity_violations",
                                                       r.monotonicity_violations},
                      {"monotone_ok", r.monotone_ok}, {"cone_excess", r.cone_excess},
                      {"cone_ok", r.cone_ok},         {"psi_low", r.psi_low},
                      {"psi_high", r.psi_high},       {"growth_ok", r.growth_ok},
                      {"notes", r.notes}};
    emit(cfg, "boundary", [&](std::ostream& os) { fb::write_boundary_csv(os, *b); }, meta);
    std::cout << "slope " << r.max_slope << " (limit " << r.slope_limit << ") "
              << (r.slope_ok ? "ok" : "FAIL") << "; monotone " << (r.monotone_ok ? "ok" : "FAIL")
              << "; cone " << (r.cone_ok ? "ok" : "FAIL") << "; growth "
              << (r.growth_ok ? "ok" : "FAIL") << '\n';
    for (const auto& n : r.notes) std::cout << "note: " << n << '\n';
    return r.ok() ? ok : check_failed;
}

int cmd_simulate(const Common& common, const std::string& kind, double kappa,
                 const std::vector<std::string>& xs, std::size_t dump_steps) {
    const fb::RunConfig cfg = load(common);
    const fb::CostParams cost = cfg.cost();
    const double c = cost.c();
    fb::PolicySpec policy = fb::PolicySpec::axis();
    if (kind == "free-boundary" || kind == "scaled-boundary") {
        const auto b = solve_boundary(cfg);
        if (b->degenerate)
            throw fb::DegenerateModeError(
                "b1 = 0: the free boundary does not exist; simulate --policy ray instead");
        policy = kind == "free-boundary" ? fb::PolicySpec::free_boundary(b, c)
                                         : fb::PolicySpec::scaled_boundary(b, c, kappa);
    } else if (kind == "ray") {
        policy = fb::PolicySpec::ray(c);
    } else if (kind == "scaled-ray") {
        policy = fb::PolicySpec::scaled_ray(c, kappa);
    }
    std::vector<fb::Vec2> points;
    for (const auto& s : xs) points.push_back(parse_point(s));
    if (points.empty()) points = cfg.verify.policy_probes;

    std::vector<fb::SimResult> rows;
    for (const auto& x : points) rows.push_back(fb::evaluate_policy(cfg.model, cost, policy, x, cfg.sim));
    json meta = fb::metadata(cfg, "simulate --policy " + kind);
    meta["policy"] = policy.name();
    meta["kappa"] = kappa;
    json results = json::array();
    for (const auto& r : rows)
        results.push_back({{"x", point_json(r.x)},
                           {"j", r.j_estimate},
                           {"stderr", r.std_error},
                           {"tail_bound", r.tail_bound},
                           {"T", r.T},
                           {"dt", r.dt},
                           {"initial_jump", point_json(r.initial_jump)}});
    meta["results"] = results;
    emit(cfg, "sim", [&](std::ostream& os) { fb::write_sim_csv(os, rows); }, meta);
    fb::write_sim_csv(std::cout, rows);

    if (dump_steps > 0) {
        const fb::ControlledPath path = fb::simulate_controlled_path(
            cfg.model, policy, points.front(), cfg.sim.dt, dump_steps, cfg.sim.seed);
        json pmeta = fb::metadata(cfg, "simulate --dump-path");
        pmeta["policy"] = policy.name();
        pmeta["x"] = point_json(points.front());
        pmeta["steps"] = dump_steps;
        emit(cfg, "path", [&](std::ostream& os) { fb::write_path_csv(os, path); }, pmeta);
    }
    return ok;
}

int cmd_verify(const Common& common, bool quiet) {
    const fb::RunConfig cfg = load(common);
    const fb::SuiteReport report = fb::run_suite(cfg, quiet ? nullptr : &std::cerr);
    const fs::path dir = cfg.output.directory;
    {
        auto out = fb::open_output(dir, "verify.txt");
        report.write_text(out);
    }
    if (cfg.output.wants("csv")) {
        auto out = fb::open_output(dir, "verify.csv");
        report.write_csv(out);
    }
    if (cfg.output.wants("json")) {
        json meta = fb::metadata(cfg, "verify");
        json recs = json::array();
        for (const auto& r : report.records)
            recs.push_back({{"group", r.group},
                            {"name", r.name},
                            {"property", r.property},
                            {"measured", r.measured},
                            {"threshold", r.threshold},
                            {"pass", r.pass},
                            {"detail", r.detail}});
        meta["records"] = recs;
        meta["all_pass"] = report.all_pass();
        fb::write_json(dir, "verify.json", meta);
    }
    report.write_text(std::cout);
    for (const auto& s : fb::summarize(report))
        std::cout << (s.pass ? "PASS " : "FAIL ") << s.group << " (" << s.checks - s.failed << "/"
                  << s.checks << ")\n";
    return report.all_pass() ? ok : check_failed;
}

int cmd_oracle1d(const Common& common, double x0, std::optional<double> drift,
                 std::optional<double> variance, std::optional<double> gamma) {
    const fb::RunConfig cfg = load(common);
    const double mu = drift.value_or(cfg.model.theta[1]);
    const double var = variance.value_or(cfg.model.sigma.yy);
    const double g = gamma.value_or(cfg.model.gamma);
    fb::Resolvent1dOptions o;
    o.dt = cfg.verify.oracle_dt;
    o.T = cfg.verify.oracle_T;
    o.n_paths = cfg.verify.oracle_paths;
    o.seed = cfg.sim.seed;
    o.workers = cfg.sim.workers;
    o.bridge = cfg.sim.bridge;
    const double exact = fb::oracle_1d_resolvent(x0, mu, var, g);
    const fb::MeanError mc = fb::mc_resolvent_1d(x0, mu, var, g, o);
    const double z = mc.std_error > 0.0 ? (mc.mean - exact) / mc.std_error : 0.0;
    json meta = fb::metadata(cfg, "oracle1d");
    meta["x0"] = x0;
    meta["drift"] = mu;
    meta["variance"] = var;
    meta["gamma"] = g;
    meta["exact"] = exact;
    meta["mc"] = mc.mean;
    meta["stderr"] = mc.std_error;
    emit(cfg, "oracle1d", [&](std::ostream& os) {
        os.precision(12);
        os << "x0,drift,variance,gamma,exact,mc,stderr,z\n"
           << x0 << ',' << mu << ',' << var << ',' << g << ',' << exact << ',' << mc.mean << ','
           << mc.std_error << ',' << z << '\n';
    }, meta);
    std::cout.precision(8);
    std::cout << "exact " << exact << "  mc " << mc.mean << " +- " << mc.std_error << "  z "
              << z << '\n';
    return ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Stopping value, control value, free boundary and reflection policies of a "
                 "two-dimensional singular control problem"};
    app.set_version_flag("--version", std::string(fb::version()));
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", common.config_path, "INI configuration file")
            ->required()
            ->check(CLI::ExistingFile);
        sub->add_option("--set", common.sets, "Override a key: section.key=value (repeatable)");
        sub->add_option("-o,--out", common.out, "Output directory (output.directory)");
        sub->add_option("-j,--workers", common.workers, "Worker threads, 0 = all (sim.workers)");
    };

    bool auto_enlarge = false;
    auto* stopping = app.add_subcommand("stopping", "Solve the stopping value u");
    add_common(stopping);
    stopping->add_flag("--auto", auto_enlarge, "Double L2 until every column reaches u = 0");

    bool residual = false;
    auto* hjb = app.add_subcommand("hjb", "Solve the control value V");
    add_common(hjb);
    hjb->add_flag("--residual", residual, "Also write the interior PDE residual");

    auto* boundary = app.add_subcommand("boundary", "Extract and check the free boundary");
    add_common(boundary);

    std::string kind = "free-boundary";
    double kappa = 1.0;
    std::vector<std::string> xs;
    std::size_t dump_steps = 0;
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo cost of a reflection policy");
    add_common(simulate);
    simulate->add_option("--policy", kind, "Reflection policy")
        ->check(CLI::IsMember({"free-boundary", "ray", "axis", "scaled-boundary", "scaled-ray"}));
    simulate->add_option("--kappa", kappa, "Scale of the scaled policies")
        ->check(CLI::PositiveNumber);
    simulate->add_option("--x", xs, "Start point x1:x2 (repeatable; default verify.policy_probes)");
    simulate->add_option("--dump-path", dump_steps, "Also write one controlled path of N steps");

    bool quiet = false;
    auto* verify = app.add_subcommand("verify", "Run the verification suite");
    add_common(verify);
    verify->add_flag("-q,--quiet", quiet, "No progress output on stderr");

    double x0 = 0.0;
    std::optional<double> drift, variance, gamma;
    auto* oracle = app.add_subcommand("oracle1d", "Closed-form vs Monte Carlo 1D resolvent");
    add_common(oracle);
    oracle->add_option("--x0", x0, "Start point")->check(CLI::NonNegativeNumber);
    oracle->add_option("--drift", drift, "Drift (default model.theta2)");
    oracle->add_option("--variance", variance, "Variance (default model.sigma22)");
    oracle->add_option("--gamma", gamma, "Discount (default model.gamma)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : config_error;
    }

    try {
        if (*stopping) return cmd_stopping(common, auto_enlarge);
        if (*hjb) return cmd_hjb(common, residual);
        if (*boundary) return cmd_boundary(common);
        if (*simulate) return cmd_simulate(common, kind, kappa, xs, dump_steps);
        if (*verify) return cmd_verify(common, quiet);
        if (*oracle) return cmd_oracle1d(common, x0, drift, variance, gamma);
    } catch (const fb::DegenerateModeError& e) {
        std::cerr << "degenerate mode: " << e.what() << '\n';
        return degenerate;
    } catch (const fb::ConvergenceError& e) {
        std::cerr << "solver did not converge: " << e.what() << '\n';
        return no_convergence;
    } catch (const fb::InvalidArgument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return config_error;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return runtime_error;
    }
    return config_error;
}
