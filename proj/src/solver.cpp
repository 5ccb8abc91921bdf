#include "pwedge/solver.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

namespace pwedge {

namespace {

double sup_norm(const std::vector<cplx>& v)
{
    double m = 0;
    for (const cplx& x : v) m = std::max(m, std::abs(x));
    return m;
}

bool all_finite(const std::vector<cplx>& v, size_t* bad)
{
    for (size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag())) {
            *bad = i;
            return false;
        }
    return true;
}

// -1/((w - a_other)(kappa2(w) - a_own)): the explicit part of the closure
// before the 2 kappa1/(kappa1 + kappa2) factor
cplx explicit_closure(cplx k2w, cplx w, cplx a_own, cplx a_other) { return -1.0 / ((w - a_other) * (k2w - a_own)); }

}  // namespace

Closure build_closure(const SpectralData& d, bool parallel)
{
    const Slice& L = *d.L;
    const ProblemConfig& cfg = d.cfg;
    Closure c;
    c.n = L.size();
    const size_t n = c.n;
    c.M.assign(cfg.contrast() == 0.0 ? 0 : n * n, 0.0);
    c.Mdiff.assign(c.M.size(), 0.0);
    c.eg.resize(n);
    c.eh.resize(n);
    c.scale.resize(n);
    const cplx pref = -kI * cfg.contrast() / (4.0 * kPi);
    const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel)
    for (long i = 0; i < nn; ++i) {
        const cplx w = L.nodes.pts[i].z;
        const cplx k1w = L.kap1[i], k2w = L.kap2[i];
        const cplx s = 2.0 * k1w / kappa_sum(k1w, k2w, cfg);
        c.scale[i] = s;
        c.eg[i] = s * explicit_closure(k2w, w, cfg.a1, cfg.a2);
        c.eh[i] = s * explicit_closure(k2w, w, cfg.a2, cfg.a1);
        if (c.M.empty()) continue;
        for (size_t m = 0; m < n; ++m) {
            const cplx z = L.nodes.pts[m].z;
            const cplx kz = L.kap1[m];
            const cplx ker = -s * pref / ((k2w - z) * (kz - w) * kz);
            c.M[i * n + m] = ker * L.nodes.wk[m];
            c.Mdiff[i * n + m] = ker * (L.nodes.wk[m] - L.nodes.wg[m]);
        }
    }
    return c;
}

std::pair<double, double> iterate_once(SpectralData& d, const Closure& c, double theta, bool parallel)
{
    const size_t n = c.n;
    if (d.g.size() != n || d.h.size() != n) throw std::invalid_argument("iterate_once: data size mismatch");
    std::vector<cplx> ng(c.eg), nh(c.eh);
    if (!c.M.empty()) {
        const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(static) if (parallel)
        for (long i = 0; i < nn; ++i) {
            cplx sg = 0.0, sh = 0.0;
            const cplx* row = &c.M[i * n];
            for (size_t m = 0; m < n; ++m) {
                sg += row[m] * d.h[m];
                sh += row[m] * d.g[m];
            }
            ng[i] += sg;
            nh[i] += sh;
        }
    }
    size_t bad = 0;
    if (!all_finite(ng, &bad) || !all_finite(nh, &bad)) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "non-finite closure value at node %zu (z = %g%+gi)", bad,
                      d.L->nodes.pts[bad].z.real(), d.L->nodes.pts[bad].z.imag());
        throw NumericalError(buf);
    }
    double dg = 0, dh = 0;
    for (size_t i = 0; i < n; ++i) {
        const cplx ug = theta * (ng[i] - d.g[i]);
        const cplx uh = theta * (nh[i] - d.h[i]);
        d.g[i] += ug;
        d.h[i] += uh;
        dg = std::max(dg, std::abs(ug));
        dh = std::max(dh, std::abs(uh));
    }
    return {dg, dh};
}

std::pair<double, double> iterate_once(SpectralData& d, const SolverConfig& s)
{
    const Closure c = build_closure(d, s.parallel);
    return iterate_once(d, c, s.theta, s.parallel);
}

SpectralData seed(const ProblemConfig& cfg, const SolverConfig& s)
{
    SpectralData d = SpectralData::geometry(cfg, s.grid);
    const size_t n = d.L->size();
    d.g.assign(n, 0.0);
    d.h.assign(n, 0.0);
    if (s.seed_mode == SeedMode::Explicit) {
        for (size_t i = 0; i < n; ++i) {
            const cplx w = d.L->nodes.pts[i].z;
            const cplx k1w = d.L->kap1[i], k2w = d.L->kap2[i];
            const cplx sc = 2.0 * k1w / kappa_sum(k1w, k2w, cfg);
            d.g[i] = sc * explicit_closure(k2w, w, cfg.a1, cfg.a2);
            d.h[i] = sc * explicit_closure(k2w, w, cfg.a2, cfg.a1);
        }
    }
    return d;
}

namespace {

// K Psi++ on a tensor grid of two shifted lines. The single-integral sum is
// separable, sum_m A(u, z_m) / (z_m - v), so the whole grid is one matrix
// product over a refined copy of L carrying interpolated slice data. The
// Gauss-weight product gives the error estimate per grid point.
std::shared_ptr<BaseGrid> make_base(const SpectralData& d, double c1, double c2, bool mirror, bool parallel)
{
    const ProblemConfig& cfg = d.cfg;
    const double Tb = d.grid.base_truncation > 0 ? d.grid.base_truncation : 20.0 * cfg.kmax();
    auto b = std::make_shared<BaseGrid>();
    b->line1 = make_line_slice(c1, Tb, d.grid.base, cfg);
    b->line2 = make_line_slice(c2, Tb, d.grid.base, cfg);
    GridValues v = grid_eval(mirror ? Formula::F2Single : Formula::F1Single, axis_from(*b->line1),
                             axis_from(*b->line2), d, Quantity::Phi, parallel);
    b->kpsi = std::move(v.value);
    b->err = std::move(v.err);
    return b;
}

}  // namespace

void complete(SpectralData& d, const SolverConfig& s)
{
    d.refresh();
    EvalOptions o;
    o.tol = s.eval_tol;
    for (int j = 0; j < 2; ++j) {
        const Slice& P = *d.P[j];
        const size_t n = P.size();
        std::vector<cplx> gp(n), hp(n);
        const long nn = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 8) if (s.parallel)
        for (long i = 0; i < nn; ++i) {
            const ContourPoint& pt = P.nodes.pts[i];
            // g(w) = Psi(kappa1(w), w) from the F2 single form, h mirrored
            const cplx x = P.kap1[i];
            const cplx xk1 = kappa(1, x, d.cfg), xk2 = kappa(2, x, d.cfg);
            const SpectralPoint pg{x, pt.z, 0.0, pt.dir};
            const SpectralPoint ph{pt.z, x, pt.dir, 0.0};
            gp[i] = evaluate_with(Formula::F2Single, pg, {xk1, xk2, P.kap1[i], P.kap2[i]}, d, false, o).value;
            hp[i] = evaluate_with(Formula::F1Single, ph, {P.kap1[i], P.kap2[i], xk1, xk2}, d, false, o).value;
        }
        size_t bad = 0;
        if (!all_finite(gp, &bad) || !all_finite(hp, &bad))
            throw NumericalError("non-finite value on P_" + std::to_string(j + 1) + " at node " + std::to_string(bad));
        d.gP[j] = std::move(gp);
        d.hP[j] = std::move(hp);
    }
    {
        const Closure c = build_closure(d, s.parallel);
        double err = 0;
        const size_t n = c.n;
        if (!c.Mdiff.empty()) {
            for (size_t i = 0; i < n; ++i) {
                cplx sg = 0.0, sh = 0.0;
                for (size_t m = 0; m < n; ++m) {
                    sg += c.Mdiff[i * n + m] * d.h[m];
                    sh += c.Mdiff[i * n + m] * d.g[m];
                }
                err = std::max(err, std::max(std::abs(sg) / std::abs(d.g[i]), std::abs(sh) / std::abs(d.h[i])));
            }
        }
        d.closure_error = err;
    }
    d.refresh();
    if (s.base_grids) build_base_grids(d, s);
}

void build_base_grids(SpectralData& d, const SolverConfig& s)
{
    const double b0 = d.cfg.b0;
    // base: alpha1 below, alpha2 above; Psi there from the F1 form
    d.base = make_base(d, -b0, b0, false, s.parallel);
    d.base_mirror = make_base(d, b0, -b0, true, s.parallel);
}

std::pair<SpectralData, SolveReport> solve(const ProblemConfig& cfg, const SolverConfig& s)
{
    if (!(s.theta > 0 && s.theta <= 1)) throw ConfigError("relaxation must lie in (0, 1]");
    SpectralData d = seed(cfg, s);
    SolveReport rep;
    const Closure c = build_closure(d, s.parallel);
    const double scale = std::max(sup_norm(c.eg), sup_norm(c.eh));
    int growth = 0;
    double last = -1;
    for (int it = 0; it < s.max_iters; ++it) {
        const auto [dg, dh] = iterate_once(d, c, s.theta, s.parallel);
        rep.history_g.push_back(dg);
        rep.history_h.push_back(dh);
        rep.iterations = it + 1;
        const double upd = std::max(dg, dh);
        // theta < 1 leaves (1 - theta) of the seed defect after the first sweep; at
        // zero contrast the map is constant so one undamped sweep is exact
        if (c.M.empty()) {
            if (s.theta < 1) {
                d.g = c.eg;
                d.h = c.eh;
            }
            rep.converged = true;
            break;
        }
        if (upd <= s.tol_residual * scale) {
            rep.converged = true;
            break;
        }
        growth = (last >= 0 && upd > last) ? growth + 1 : 0;
        last = upd;
        if (growth >= 5) {
            rep.diverged = true;
            rep.message = "update grew over 5 consecutive sweeps";
            break;
        }
    }
    d.provenance.method = "damped fixed point";
    d.provenance.iterations = rep.iterations;
    d.provenance.converged = rep.converged;
    d.provenance.final_update = rep.history_g.empty() ? 0 : std::max(rep.history_g.back(), rep.history_h.back());
    if (!rep.converged) {
        if (rep.message.empty()) rep.message = "max_iters reached";
        d.refresh();
        return {std::move(d), rep};
    }
    complete(d, s);
    rep.closure_error = d.closure_error;
    rep.wh_residual = wh_residual(d, 10, &rep.wh_scale);
    return {std::move(d), rep};
}

double wh_residual(const SpectralData& d, int n, double* scale)
{
    const ProblemConfig& cfg = d.cfg;
    const double X = 2.0 * cfg.kmax();
    double sup = 0, mag = 0;
    for (int i = 0; i < n; ++i)
        for (int m = 0; m < n; ++m) {
            const double x1 = -X + 2 * X * (i + 0.5) / n, x2 = -X + 2 * X * (m + 0.37) / n;
            const SpectralPoint p{cplx(x1, -cfg.epsilon / 3), cplx(x2, -cfg.epsilon / 3)};
            const cplx psi = evaluate_with(Formula::F1Single, p, d, false).value;
            const cplx phi = evaluate_with(Formula::F2Single, p, d, true).value;
            const cplx P = forcing_P(p, cfg);
            const cplx phi34 = -phi - P;
            const cplx KPsi = kernel_K(p, cfg) * psi;
            sup = std::max(sup, std::abs(-KPsi - phi34 - P));
            mag = std::max({mag, std::abs(KPsi), std::abs(phi34), std::abs(P)});
        }
    if (scale) *scale = mag;
    return sup;
}

DecayFit fit_decay(const std::vector<double>& r, const std::vector<cplx>& f)
{
    DecayFit out;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int n = 0;
    std::vector<std::pair<double, double>> pts;
    for (size_t i = 0; i < r.size(); ++i) {
        if (!(r[i] > 0) || std::abs(f[i]) == 0) continue;
        const double x = std::log(r[i]), y = std::log(std::abs(f[i]));
        pts.push_back({x, y});
        sx += x, sy += y, sxx += x * x, sxy += x * y, ++n;
    }
    out.samples = n;
    if (n < 2) return out;
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icpt = (sy - slope * sx) / n;
    double ss = 0;
    for (auto [x, y] : pts) ss += (y - icpt - slope * x) * (y - icpt - slope * x);
    out.exponent = -slope;
    out.residual = std::sqrt(ss / n);
    return out;
}

EdgeReport edge_condition_check(const SpectralData& d)
{
    EdgeReport rep;
    const double km = d.cfg.kmax();
    const double T = d.L->contour.truncation;
    std::vector<double> r;
    std::vector<cplx> g, h;
    for (size_t i = 0; i < d.L->size(); ++i) {
        const double x = std::abs(d.L->nodes.pts[i].z.real());
        if (x < 4 * km || x > T) continue;
        r.push_back(x);
        g.push_back(d.g[i]);
        h.push_back(d.h[i]);
    }
    rep.g = fit_decay(r, g);
    rep.h = fit_decay(r, h);
    r.clear();
    std::vector<cplx> line;
    const cplx a1s = kI * std::abs(d.cfg.k1);
    for (int i = 0; i < 12; ++i) {
        const double x = 4 * km * std::pow(T / (8 * km), i / 11.0);
        const SpectralPoint p{a1s, cplx(x, -0.5 * d.cfg.epsilon)};
        r.push_back(x);
        line.push_back(evaluate_with(Formula::F1Single, p, d, false).value);
    }
    rep.line = fit_decay(r, line);
    return rep;
}

namespace {

nlohmann::json panel_json(const PanelSpec& p)
{
    nlohmann::json e = nlohmann::json::array();
    for (const auto& f : p.extra) e.push_back({f.at, f.width});
    return {{"feature_width", p.feature_width}, {"growth", p.growth}, {"max_width", p.max_width},
            {"tail_panels", p.tail_panels}, {"extra", e}};
}

PanelSpec panel_from(const nlohmann::json& j)
{
    PanelSpec p;
    p.feature_width = j.at("feature_width");
    p.growth = j.at("growth");
    p.max_width = j.at("max_width");
    p.tail_panels = j.at("tail_panels");
    for (const auto& e : j.at("extra")) p.extra.push_back({e[0].get<double>(), e[1].get<double>()});
    return p;
}

void write_block(std::ostream& os, const std::string& name, const std::vector<cplx>& v)
{
    os << "# " << name << " " << v.size() << "\n";
    char buf[80];
    for (const cplx& x : v) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", x.real(), x.imag());
        os << buf;
    }
}

std::vector<cplx> read_block(std::istream& is, const std::string& name)
{
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("checkpoint: missing block " + name);
    std::istringstream hs(line);
    std::string hash, got;
    size_t n = 0;
    hs >> hash >> got >> n;
    if (hash != "#" || got != name) throw ConfigError("checkpoint: expected block " + name + ", got '" + line + "'");
    std::vector<cplx> v(n);
    for (size_t i = 0; i < n; ++i) {
        if (!std::getline(is, line)) throw ConfigError("checkpoint: block " + name + " truncated");
        const auto c = line.find(',');
        if (c == std::string::npos) throw ConfigError("checkpoint: bad row in " + name);
        v[i] = cplx(std::strtod(line.c_str(), nullptr), std::strtod(line.c_str() + c + 1, nullptr));
    }
    return v;
}

}  // namespace

void save_checkpoint(const SpectralData& d, std::ostream& os)
{
    nlohmann::json hdr;
    hdr["format"] = "pwedge-checkpoint-1";
    hdr["config"] = nlohmann::json::parse(d.cfg.to_json_text());
    hdr["config_hash"] = d.cfg.hash();
    hdr["grid"] = {{"truncation", d.grid.truncation}, {"base_truncation", d.grid.base_truncation},
                   {"line", panel_json(d.grid.line)}, {"p", panel_json(d.grid.p)}, {"base", panel_json(d.grid.base)}};
    hdr["sizes"] = {d.g.size(), d.gP[0].size(), d.gP[1].size()};
    hdr["provenance"] = {{"method", d.provenance.method}, {"iterations", d.provenance.iterations},
                         {"converged", d.provenance.converged}, {"final_update", d.provenance.final_update}};
    hdr["closure_error"] = d.closure_error;
    os << hdr.dump() << "\n";
    write_block(os, "g", d.g);
    write_block(os, "h", d.h);
    write_block(os, "gP1", d.gP[0]);
    write_block(os, "gP2", d.gP[1]);
    write_block(os, "hP1", d.hP[0]);
    write_block(os, "hP2", d.hP[1]);
}

SpectralData load_checkpoint(std::istream& is, bool rebuild_base)
{
    std::string line;
    if (!std::getline(is, line)) throw ConfigError("checkpoint: empty");
    nlohmann::json hdr;
    try {
        hdr = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("checkpoint header: ") + e.what());
    }
    if (hdr.value("format", "") != "pwedge-checkpoint-1") throw ConfigError("checkpoint: unknown format");
    const ProblemConfig cfg = ProblemConfig::from_json_text(hdr.at("config").dump());
    if (cfg.hash() != hdr.at("config_hash").get<std::string>()) throw ConfigError("checkpoint: config hash mismatch");
    GridSpec grid;
    const auto& gj = hdr.at("grid");
    grid.truncation = gj.at("truncation");
    grid.base_truncation = gj.at("base_truncation");
    grid.line = panel_from(gj.at("line"));
    grid.p = panel_from(gj.at("p"));
    grid.base = panel_from(gj.at("base"));
    SpectralData d = SpectralData::geometry(cfg, grid);
    d.g = read_block(is, "g");
    d.h = read_block(is, "h");
    d.gP[0] = read_block(is, "gP1");
    d.gP[1] = read_block(is, "gP2");
    d.hP[0] = read_block(is, "hP1");
    d.hP[1] = read_block(is, "hP2");
    if (d.g.size() != d.L->size() || d.h.size() != d.L->size()) throw ConfigError("checkpoint: grid size mismatch");
    for (int j = 0; j < 2; ++j)
        if (!d.gP[j].empty() && (d.gP[j].size() != d.P[j]->size() || d.hP[j].size() != d.P[j]->size()))
            throw ConfigError("checkpoint: P grid size mismatch");
    const auto& pv = hdr.at("provenance");
    d.provenance.method = pv.at("method");
    d.provenance.iterations = pv.at("iterations");
    d.provenance.converged = pv.at("converged");
    d.provenance.final_update = pv.at("final_update");
    d.closure_error = hdr.value("closure_error", 0.0);
    d.refresh();
    if (rebuild_base) {
        SolverConfig s;
        s.grid = grid;
        build_base_grids(d, s);
    }
    return d;
}

}  // namespace pwedge
