// pwedge command line: solve, eval, fields, atlas, crossing, selftest.
#include "suite.hpp"

#include "pwedge/analysis.hpp"
#include "pwedge/fields.hpp"

#include <CLI11.hpp>
#include <json.hpp>
#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace pwedge;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kVersion = "0.1.0";

struct Args {
    std::string config, out, profile = "default", regime, data, input, quantity = "psi", extended_k = "k2";
    std::string inject;
    double tol = 0, truncation = 0, grid = 1;
    int jobs = 0;
    double lo = -2, hi = 2;
    int n = 8;
    bool scattered = false, checks = false;
    std::vector<double> s = {0.4, 0.5, 0.6};
};

// Everything a command produces; written only after the command succeeds.
struct Outputs {
    std::vector<std::pair<std::string, std::string>> files;  // name, bytes
    json metrics = json::object();
    std::vector<std::string> inputs;
    void add(const std::string& name, const std::string& bytes) { files.emplace_back(name, bytes); }
};

struct Failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

std::string out_dir(const Args& a)
{
    if (!a.out.empty()) return a.out;
    if (const char* e = std::getenv("PWEDGE_OUT")) return e;
    return "pwedge_out";
}

ProblemConfig load_config(const Args& a, bool spectral)
{
    if (a.config.empty()) throw ConfigError("--config is required");
    ProblemConfig cfg;
    try {
        cfg = ProblemConfig::from_json_file(a.config);
    } catch (const ConfigError& e) {
        throw ConfigError(a.config + ": " + e.what());
    }
    const std::string regime = cfg.regime == Regime::Baseline ? "baseline" : "extended";
    if (!a.regime.empty() && a.regime != regime)
        throw ConfigError(a.config + ": theta0 = " + std::to_string(cfg.theta0) + " is in the " + regime +
                          " regime, --theta0-regime says " + a.regime);
    if (spectral && cfg.regime == Regime::Extended)
        throw ConfigError(a.config + ": theta0 in (pi/2, pi): the spectral solver covers theta0 in (pi, 3pi/2) only");
    return cfg;
}

SolverConfig solver_config(const Args& a)
{
    SolverConfig s;
    if (a.grid != 1) s.grid = s.grid.refined(a.grid);
    if (a.truncation > 0) s.grid.truncation = a.truncation;
    if (a.tol > 0) s.tol_residual = a.tol;
    return s;
}

json report_json(const SolveReport& r)
{
    return {{"iterations", r.iterations}, {"converged", r.converged}, {"diverged", r.diverged},
            {"history_g", r.history_g},   {"history_h", r.history_h}, {"wh_residual", r.wh_residual},
            {"wh_scale", r.wh_scale},     {"closure_error", r.closure_error}, {"message", r.message}};
}

// --data CKPT or a fresh solve
SpectralData obtain(const Args& a, const ProblemConfig& cfg, Outputs& o)
{
    if (!a.data.empty()) {
        std::ifstream in(a.data);
        if (!in) throw ConfigError("cannot open checkpoint " + a.data);
        SpectralData d = load_checkpoint(in);
        if (d.cfg.hash() != cfg.hash())
            throw ConfigError("checkpoint " + a.data + " was solved for config " + d.cfg.hash() + ", not " + cfg.hash());
        o.inputs.push_back(a.data);
        return d;
    }
    auto [d, rep] = solve(cfg, solver_config(a));
    o.metrics["solve"] = report_json(rep);
    if (!rep.converged) throw Failure("solver did not converge: " + rep.message);
    return std::move(d);
}

void cmd_solve(const Args& a, Outputs& o)
{
    const ProblemConfig cfg = load_config(a, true);
    auto [d, rep] = solve(cfg, solver_config(a));
    std::printf("sweep  |dg|       |dh|\n");
    for (size_t i = 0; i < rep.history_g.size(); ++i)
        std::printf("%5zu  %.3e  %.3e\n", i + 1, rep.history_g[i], rep.history_h[i]);
    std::printf("%s after %d sweeps; WH residual %.3e (scale %.3f), closure error %.2e\n",
                rep.converged ? "converged" : "NOT converged", rep.iterations, rep.wh_residual, rep.wh_scale,
                rep.closure_error);
    std::ostringstream ck;
    save_checkpoint(d, ck);
    json r = report_json(rep);
    r["config_hash"] = cfg.hash();
    r["interp_error"] = d.interp_error;
    o.add("spectral.ckpt", ck.str());
    o.add("solve_report.json", r.dump(2) + "\n");
    o.metrics = {{"iterations", rep.iterations},
                 {"converged", rep.converged},
                 {"wh_residual", rep.wh_residual},
                 {"closure_error", rep.closure_error}};
    if (!rep.converged) throw Failure("solver did not converge: " + rep.message);
}

void cmd_eval(const Args& a, Outputs& o)
{
    const ProblemConfig cfg = load_config(a, true);
    std::ifstream in(a.input);
    if (!in) throw ConfigError("cannot open query file " + a.input);
    Quantity q = Quantity::Psi;
    if (a.quantity == "phi") q = Quantity::Phi;
    else if (a.quantity == "phi34") q = Quantity::Phi34;
    const SpectralData d = obtain(a, cfg, o);
    EvalOptions eo;
    if (a.tol > 0) eo.tol = a.tol;
    std::ostringstream out;
    const int n = eval_csv(in, out, d, q, eo);
    o.inputs.push_back(a.input);
    o.add("eval.csv", out.str());
    o.metrics["points"] = n;
    std::printf("%d points evaluated (%s)\n", n, a.quantity.c_str());
}

void cmd_fields(const Args& a, Outputs& o)
{
    const ProblemConfig cfg = load_config(a, true);
    const SpectralData d = obtain(a, cfg, o);
    FieldEvaluator fe(d);
    const auto grid = field_grid(fe, a.lo, a.hi, a.n, !a.scattered);
    std::ostringstream csv;
    write_field_csv(grid, csv);
    o.add("fields.csv", csv.str());
    double worst = 0;
    for (const auto& s : grid) worst = std::max(worst, s.err);
    o.metrics["points"] = grid.size();
    o.metrics["max_err_est"] = worst;
    std::printf("%zu field points on [%g, %g]^2, max err_est %.2e, %zu grids\n", grid.size(), a.lo, a.hi, worst,
                fe.grids_built());
    if (a.checks) {
        json hj = json::array();
        const double h = 1e-2 * 2 * kPi / std::abs(cfg.k1);
        const std::vector<std::pair<Which, std::array<double, 2>>> pts{{Which::PhiSc, {0.7, -0.6}},
                                                                        {Which::Psi, {1.0, 0.8}}};
        for (const auto& [w, x] : pts)
            for (double hh : {h, h / 2}) {
                const HelmholtzResult r = helmholtz_residual(fe, w, x[0], x[1], hh);
                hj.push_back({{"which", which_name(w)}, {"x1", x[0]}, {"x2", x[1]}, {"h", hh},
                              {"relative", r.relative}, {"quad_noise", r.quad_noise}});
                std::printf("helmholtz %s (%g, %g) h=%.4f: %.3e (quadrature noise %.1e)\n", which_name(w), x[0],
                            x[1], hh, r.relative, r.quad_noise);
            }
        json sup = json::array();
        for (const auto& s : fe.reconstruct(Which::PhiSc, {{0.5, 0.5}, {1.0, 1.5}, {1.7, 0.6}}))
            sup.push_back({{"which", "phi_sc"}, {"x1", s.x1}, {"x2", s.x2}, {"abs", std::abs(s.value)}, {"err", s.err}});
        for (const auto& s : fe.reconstruct(Which::Psi, {{-0.5, 0.5}, {-1.0, -1.0}, {0.8, -1.2}}))
            sup.push_back({{"which", "psi"}, {"x1", s.x1}, {"x2", s.x2}, {"abs", std::abs(s.value)}, {"err", s.err}});
        o.add("checks.json", json{{"helmholtz", hj}, {"support", sup}}.dump(2) + "\n");
    }
}

void cmd_atlas(const Args& a, Outputs& o)
{
    const ProblemConfig cfg = load_config(a, false);
    TraceOptions to;
    to.extended_k = a.extended_k == "k1" ? ExtendedK::K1 : ExtendedK::K2;
    const std::vector<TraceSet> sets{compute_traces(Owner::Psi, cfg, to), compute_traces(Owner::Phi34, cfg, to)};
    std::ostringstream csv;
    write_traces_csv(sets, csv);
    json roots = json::array();
    for (const auto& s : sets)
        for (const auto& t : s.traces) {
            if (t.kind != TraceKind::CircleArc) continue;
            const ArcRootCheck rc = arc_roots(cfg, t);
            roots.push_back({{"curve_id", t.id},
                             {"owner", owner_name(t.owner)},
                             {"radius", t.level},
                             {"max_radius_error", rc.max_radius_error},
                             {"max_arc_distance", rc.max_arc_distance},
                             {"max_imag", rc.max_imag},
                             {"all_left", rc.all_left},
                             {"roots", rc.root.size()}});
        }
    json notes = json::array();
    for (const auto& s : sets)
        for (const auto& n : s.notes) notes.push_back(n);
    o.add("traces.csv", csv.str());
    o.add("arc_roots.json", json{{"arcs", roots}, {"notes", notes}}.dump(2) + "\n");
    for (const auto& s : sets)
        std::printf("%s: %zu polar lines, %zu branch lines, %zu arcs\n", owner_name(s.owner),
                    s.count(TraceKind::PolarLine), s.count(TraceKind::BranchLine), s.count(TraceKind::CircleArc));
    o.metrics["arcs"] = roots.size();
}

void cmd_crossing(const Args& a, Outputs& o)
{
    const ProblemConfig cfg = load_config(a, true);
    const SpectralData d = obtain(a, cfg, o);
    const double tol = a.tol > 0 ? a.tol : 1e-3;
    std::vector<CrossingSample> v;
    double worst = 0;
    bool ok = true;
    for (int j1 = 1; j1 <= 2; ++j1)
        for (int j2 = 1; j2 <= 2; ++j2)
            for (double s1 : a.s)
                for (double s2 : a.s) {
                    v.push_back(phi_ac(j1, s1, j2, s2, d));
                    const double r = std::abs(v.back().phi_ac) / v.back().max_corner;
                    worst = std::max(worst, r);
                    for (const auto& c : v.back().corners) ok = ok && c.ok;
                }
    std::ostringstream js;
    write_crossing_json(v, tol, js);
    o.add("crossing.json", js.str());
    o.metrics["base_pairs"] = v.size();
    o.metrics["max_relative_phi_ac"] = worst;
    o.metrics["tol"] = tol;
    std::printf("%zu base pairs, max |Phi_AC|/max corner %.3e (tol %.0e)\n", v.size(), worst, tol);
    if (!ok) throw Failure("a corner limit did not extrapolate cleanly, see crossing.json");
    if (!(worst < tol)) throw Failure("additive crossing exceeds the tolerance");
}

void cmd_selftest(const Args& a, Outputs& o)
{
    if (a.profile != "fast" && a.profile != "full") throw ConfigError("--profile must be fast or full");
    suite::SuiteOptions so;
    if (!a.inject.empty()) {
        if (a.inject != "kernel-sign") throw ConfigError("unknown fault '" + a.inject + "'");
        so.inject_kernel_sign = true;
    }
    suite::Context ctx(so);
    std::vector<std::string> ids = suite::fast_ids();
    if (a.profile == "full") {
        ids = suite::primary_ids();
        ids.push_back("config-roundtrip");
    }
    std::vector<suite::CheckResult> res;
    int failed = 0;
    for (const auto& id : ids) {
        res.push_back(suite::run_check(id, ctx));
        std::printf("%s\n", suite::format_line(res.back()).c_str());
        std::fflush(stdout);
        if (!res.back().pass) ++failed;
    }
    o.add("selftest.json", suite::report_json(res, a.profile));
    o.metrics["checks"] = res.size();
    o.metrics["failed"] = failed;
    if (failed) {
        std::string names;
        for (const auto& r : res)
            if (!r.pass) names += (names.empty() ? "" : ", ") + r.module + "/" + r.id;
        throw Failure(std::to_string(failed) + " check(s) failed: " + names);
    }
}

void write_all(const std::string& dir, const std::string& command, const Args& a, Outputs& o, double seconds,
               const std::string& status)
{
    fs::create_directories(dir);
    json files = json::array();
    for (const auto& [name, bytes] : o.files) {
        std::ofstream(fs::path(dir) / name, std::ios::binary) << bytes;
        files.push_back({{"path", name}, {"fnv1a", fnv1a_hex(bytes)}, {"bytes", bytes.size()}});
    }
    json m{{"tool", "pwedge"},
           {"version", kVersion},
           {"command", command},
           {"status", status},
           {"config", a.config},
           {"config_hash", json()},
           {"inputs", o.inputs},
           {"outputs", files},
           {"seconds", seconds},
           {"metrics", o.metrics},
           {"options", {{"tol", a.tol}, {"grid", a.grid}, {"truncation", a.truncation}, {"profile", a.profile},
                        {"jobs", a.jobs}}}};
    if (!a.config.empty()) {
        try {
            m["config_hash"] = ProblemConfig::from_json_file(a.config).hash();
        } catch (const std::exception&) {
        }
    }
    std::ofstream(fs::path(dir) / "manifest.json") << m.dump(2) << "\n";
}

void common(CLI::App* c, Args& a, bool needs_config)
{
    auto* opt = c->add_option("--config", a.config, "problem config (JSON)");
    if (needs_config) opt->required();
    c->add_option("--out", a.out, "output directory (default $PWEDGE_OUT or ./pwedge_out)");
    c->add_option("--tol", a.tol, "tolerance (solver residual, eval quadrature or crossing)");
    c->add_option("--grid", a.grid, "panel refinement factor")->check(CLI::PositiveNumber);
    c->add_option("--truncation", a.truncation, "contour truncation T")->check(CLI::NonNegativeNumber);
    c->add_option("--profile", a.profile, "profile name");
    c->add_option("--theta0-regime", a.regime, "expected regime")->check(CLI::IsMember({"baseline", "extended"}));
    c->add_option("--jobs", a.jobs, "OpenMP threads (0: default)")->check(CLI::NonNegativeNumber);
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"pwedge: penetrable right-angled wedge, two-variable Wiener-Hopf solver"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);
    Args a;

    auto* solve_c = app.add_subcommand("solve", "solve for the slice data and write a checkpoint");
    common(solve_c, a, true);

    auto* eval_c = app.add_subcommand("eval", "evaluate spectral functions at query points");
    common(eval_c, a, true);
    eval_c->add_option("--input", a.input, "CSV with re_a1,im_a1,re_a2,im_a2")->required();
    eval_c->add_option("--quantity", a.quantity)->check(CLI::IsMember({"psi", "phi", "phi34"}));
    eval_c->add_option("--data", a.data, "checkpoint from solve");

    auto* fields_c = app.add_subcommand("fields", "reconstruct the physical field on a grid");
    common(fields_c, a, true);
    fields_c->add_option("--data", a.data, "checkpoint from solve");
    fields_c->add_option("--lo", a.lo, "grid lower edge");
    fields_c->add_option("--hi", a.hi, "grid upper edge");
    fields_c->add_option("--n", a.n, "cells per side")->check(CLI::PositiveNumber);
    fields_c->add_flag("--scattered", a.scattered, "write phi_sc instead of phi_total outside the wedge");
    fields_c->add_flag("--checks", a.checks, "also write checks.json (Helmholtz and support probes)");

    auto* atlas_c = app.add_subcommand("atlas", "real traces of the singularities");
    common(atlas_c, a, true);
    atlas_c->add_option("--extended-k", a.extended_k, "k in the extended-regime line")
        ->check(CLI::IsMember({"k1", "k2"}));

    auto* cross_c = app.add_subcommand("crossing", "additive crossing on h-(j1) x h-(j2)");
    common(cross_c, a, true);
    cross_c->add_option("--data", a.data, "checkpoint from solve");
    cross_c->add_option("--s", a.s, "real parameters of the base points");

    auto* self_c = app.add_subcommand("selftest", "run the invariant suites");
    common(self_c, a, false);
    self_c->add_option("--inject-fault", a.inject)->group("");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }
    if (a.jobs > 0) omp_set_num_threads(a.jobs);

    CLI::App* sub = app.get_subcommands().front();
    const std::string cmd = sub->get_name();
    if (cmd == "selftest" && a.profile == "default") a.profile = "fast";
    const std::string dir = out_dir(a);
    Outputs o;
    const auto t0 = std::chrono::steady_clock::now();
    auto elapsed = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count(); };
    try {
        if (cmd == "solve") cmd_solve(a, o);
        else if (cmd == "eval") cmd_eval(a, o);
        else if (cmd == "fields") cmd_fields(a, o);
        else if (cmd == "atlas") cmd_atlas(a, o);
        else if (cmd == "crossing") cmd_crossing(a, o);
        else cmd_selftest(a, o);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const Failure& e) {
        // diagnostics are written, flagged as failed in the manifest
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        write_all(dir, cmd, a, o, elapsed(), "failed");
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    }
    write_all(dir, cmd, a, o, elapsed(), "ok");
    std::printf("wrote %zu file(s) and manifest.json to %s\n", o.files.size(), dir.c_str());
    return 0;
}
