#include "pwedge/continuation.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

namespace pwedge {

const char* formula_name(Formula f)
{
    switch (f) {
    case Formula::F1: return "F1";
    case Formula::F2: return "F2";
    case Formula::F1Single: return "F1-single";
    case Formula::F2Single: return "F2-single";
    case Formula::SecondStep1: return "SecondStep-1";
    case Formula::SecondStep2: return "SecondStep-2";
    case Formula::WHDirect: return "WH-direct";
    }
    return "?";
}

double p_parameter(int segment, double t, double T)
{
    switch (segment) {
    case 0: return -T / t;
    case 3: return T / (1.0 - t);
    default: return t;
    }
}

void Slice::kappas(int segment, double t, const ProblemConfig& cfg, cplx& k1, cplx& k2) const
{
    if (branch == 0) {
        const cplx z = contour.segments.at(segment).z(t);
        k1 = kappa(1, z, cfg);
        k2 = kappa(2, z, cfg);
        return;
    }
    const double x = p_parameter(segment, t, contour.truncation);
    const cplx kj = cfg.k(branch), ko = cfg.k(3 - branch);
    const cplx own = x;
    const cplx other = cfg.degenerate() ? own : sqrt_arrow(ko * ko - kj * kj + x * x);
    k1 = branch == 1 ? own : other;
    k2 = branch == 1 ? other : own;
}

namespace {

void fill_kappas(Slice& s, const ProblemConfig& cfg)
{
    s.kap1.resize(s.size());
    s.kap2.resize(s.size());
    for (size_t i = 0; i < s.size(); ++i) s.kappas(s.nodes.pts[i].segment, s.nodes.pts[i].t, cfg, s.kap1[i], s.kap2[i]);
}

void add_feature(std::vector<Feature>& v, double x, double w)
{
    for (const auto& f : v)
        if (std::abs(f.at - x) < 1e-12) return;
    v.push_back({x, w});
}

}  // namespace

std::shared_ptr<Slice> make_line_slice(double shift, double T, const PanelSpec& spec, const ProblemConfig& cfg)
{
    auto s = std::make_shared<Slice>();
    s->contour = shifted_line(shift, T, true);
    PanelSpec ps = spec;
    const double w = spec.feature_width;
    for (double x : {0.0, cfg.k1.real(), -cfg.k1.real(), cfg.k2.real(), -cfg.k2.real(), cfg.a1.real(), cfg.a2.real()})
        add_feature(ps.extra, x, w);
    s->nodes = make_nodes(s->contour, ps);
    fill_kappas(*s, cfg);
    return s;
}

std::shared_ptr<Slice> make_p_slice(int j, double T, const PanelSpec& spec, const ProblemConfig& cfg)
{
    auto s = std::make_shared<Slice>();
    s->contour = build_P(j, cfg, T);
    s->branch = j;
    PanelSpec ps = spec;
    // parameters where h-_j passes closest to the polar points
    for (cplx a : {cfg.a1, cfg.a2}) {
        const double x = std::abs(kappa(j, a, cfg).real());
        add_feature(ps.extra, x, spec.feature_width);
        add_feature(ps.extra, -x, spec.feature_width);
    }
    s->nodes = make_nodes(s->contour, ps);
    fill_kappas(*s, cfg);
    return s;
}

GridSpec GridSpec::refined(double s) const
{
    GridSpec g = *this;
    for (PanelSpec* p : {&g.line, &g.p, &g.base}) {
        p->feature_width /= s;
        p->max_width /= s;
        p->tail_panels = static_cast<int>(std::ceil(p->tail_panels * s));
    }
    return g;
}

double GridSpec::T(const ProblemConfig& cfg) const { return truncation > 0 ? truncation : default_truncation(cfg); }

SpectralData SpectralData::geometry(const ProblemConfig& cfg, const GridSpec& grid)
{
    SpectralData d;
    d.cfg = cfg;
    d.grid = grid;
    const double T = grid.T(cfg);
    d.L = make_line_slice(-cfg.epsilon, T, grid.line, cfg);
    d.P[0] = make_p_slice(1, T, grid.p, cfg);
    d.P[1] = make_p_slice(2, T, grid.p, cfg);
    return d;
}

void SpectralData::refresh()
{
    double err = 0;
    auto rel = [](const PanelInterpolant& p) {
        double m = 0;
        for (const cplx& v : p.values()) m = std::max(m, std::abs(v));
        return m > 0 ? p.self_error() / m : 0.0;
    };
    if (g.size() == L->size()) {
        gi = PanelInterpolant(&L->nodes, g);
        err = std::max(err, rel(gi));
    }
    if (h.size() == L->size()) {
        hi = PanelInterpolant(&L->nodes, h);
        err = std::max(err, rel(hi));
    }
    for (int j = 0; j < 2; ++j) {
        if (gP[j].size() == P[j]->size()) {
            gPi[j] = PanelInterpolant(&P[j]->nodes, gP[j]);
            err = std::max(err, rel(gPi[j]));
        }
        if (hP[j].size() == P[j]->size()) {
            hPi[j] = PanelInterpolant(&P[j]->nodes, hP[j]);
            err = std::max(err, rel(hPi[j]));
        }
    }
    interp_error = err;
}

namespace {

using Kaps = KappaValues;

Kaps kaps_at(const SpectralPoint& p, const ProblemConfig& cfg)
{
    return {kappa(1, p.alpha1, cfg, p.dir1), kappa(2, p.alpha1, cfg, p.dir1), kappa(1, p.alpha2, cfg, p.dir2),
            kappa(2, p.alpha2, cfg, p.dir2)};
}

double cut_distance(cplx z, const ProblemConfig& cfg)
{
    return std::min(curve_distance(1, -1, z, cfg), curve_distance(2, -1, z, cfg));
}

// Formula in mirrored variables: u is the coordinate entering through the
// kappa factors, v the one entering the Cauchy denominator.
struct Setup {
    bool mirror = false;  // false: F1 / SecondStep-1, true: F2 / SecondStep-2
    bool on_P = false;
    cplx u, v, ku1, ku2, au, av;
};

Setup make_setup(Formula f, const SpectralPoint& p, const Kaps& k, const ProblemConfig& cfg)
{
    Setup s;
    s.mirror = f == Formula::F2Single || f == Formula::SecondStep2;
    s.on_P = f == Formula::SecondStep1 || f == Formula::SecondStep2;
    if (!s.mirror) {
        s.u = p.alpha1, s.v = p.alpha2, s.ku1 = k.a1k1, s.ku2 = k.a1k2, s.au = cfg.a1, s.av = cfg.a2;
    } else {
        s.u = p.alpha2, s.v = p.alpha1, s.ku1 = k.a2k1, s.ku2 = k.a2k2, s.au = cfg.a2, s.av = cfg.a1;
    }
    return s;
}

inline cplx node_weight(const Setup& s, cplx z, cplx kz1)
{
    return (s.ku1 - z) / ((s.ku2 - z) * (z - s.v) * (kz1 - s.u) * kz1);
}

cplx explicit_term(const Setup& s, const SpectralPoint& p, const ProblemConfig& cfg)
{
    const cplx P = forcing_P(p, cfg);
    if (!s.on_P) return -P * (s.ku1 - s.av) / (s.ku2 - s.av);
    const cplx kv1 = kappa(1, s.av, cfg), kv2 = kappa(2, s.av, cfg);
    const cplx f1 = (kv2 - s.u) / (kv1 - s.u);
    const cplx f2 = (s.ku1 - s.av) / (s.ku2 - s.av);
    const cplx f3 = (kv1 - s.au) / (kv2 - s.au);
    return -f1 * f2 * f3 * P;
}

struct SliceSum {
    cplx value;
    double err = 0;
    long evals = 0;
    bool adaptive = false;
    bool converged = true;
};

// int over the slice of data * w; fixed rule first, adaptive with
// interpolated data when the Kronrod/Gauss difference is too large.
template <class W>
SliceSum integrate_slice(const Slice& s, const std::vector<cplx>& vals, const PanelInterpolant* interp, W&& w,
                         const std::vector<cplx>& near, double tol, double scale)
{
    const NodeSet& n = s.nodes;
    SliceSum r;
    double err = 0;
    cplx total = 0.0;
    for (const auto& pan : n.panels) {
        cplx pk = 0.0, pg = 0.0;
        for (int q = 0; q < 21; ++q) {
            const size_t i = pan.first + q;
            const cplx f = vals[i] * w(n.pts[i], static_cast<long>(i));
            pk += n.wk[i] * f;
            pg += n.wg[i] * f;
        }
        total += pk;
        err += std::abs(pk - pg);
    }
    r.value = total;
    r.err = err;
    r.evals = static_cast<long>(n.size());
    if (err <= tol * std::max(scale, std::abs(total)) || interp == nullptr) return r;

    auto breaks = node_breaks(n, s.contour.segments.size());
    for (const cplx& z : near) {
        if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) continue;
        const NearestPoint np = nearest_point(s.contour, z);
        if (np.dist < 2.0) add_near_breaks(breaks, s.contour, np);
    }
    QuadOptions o;
    o.tol = tol;
    o.abs_floor = scale;
    o.max_evals = 400000;
    auto f = [&](const ContourPoint& p) { return (*interp)(p.segment, p.t) * w(p, -1L); };
    const QuadratureResult q = integrate_contour_from(f, s.contour, breaks, o);
    r.value = q.value;
    r.err = q.error_estimate;
    r.evals += q.evaluations;
    r.adaptive = true;
    r.converged = q.converged;
    return r;
}

RegionPair classify(const SpectralPoint& p, const ProblemConfig& cfg)
{
    auto one = [&](cplx z) {
        if (std::abs(z.imag()) < cfg.epsilon) return Region::strip(cfg.epsilon);
        if (z.imag() > 0) return Region::uhp();
        return Region::hminus();
    };
    return {one(p.alpha1), one(p.alpha2)};
}

struct Core {
    cplx B, to_psi, to_phi;
    SliceSum integral;
};

Core core(Formula f, const SpectralPoint& p, const SpectralData& d, double tol, const Kaps* given = nullptr)
{
    const ProblemConfig& cfg = d.cfg;
    const Kaps k = given ? *given : kaps_at(p, cfg);
    const Setup s = make_setup(f, p, k, cfg);
    Core c;
    c.to_psi = (s.ku1 + s.v) / (kappa_sum(s.ku1, s.ku2, cfg) + (s.v - s.ku1));
    c.to_phi = (s.ku2 - s.v) / (s.ku1 - s.v);
    const cplx ex = explicit_term(s, p, cfg);
    const cplx contrast = cfg.contrast();
    if (contrast == 0.0) {
        c.B = ex;
        return c;
    }
    const cplx pref = -kI * contrast / (4.0 * kPi);
    const std::vector<cplx> near{s.v, s.ku2, s.ku1, -s.ku1};
    // scale for the tolerance: the explicit part sets the magnitude
    const double scale = std::abs(ex) / std::abs(pref);
    if (!s.on_P) {
        const Slice& L = *d.L;
        if (d.g.empty()) throw NumericalError("spectral data missing on the line");
        const auto& vals = s.mirror ? d.h : d.g;
        const PanelInterpolant* ip = s.mirror ? &d.hi : &d.gi;
        auto w = [&](const ContourPoint& pt, long i) {
            cplx kz1, kz2;
            if (i >= 0) kz1 = L.kap1[i];
            else L.kappas(pt.segment, pt.t, cfg, kz1, kz2);
            return node_weight(s, pt.z, kz1);
        };
        c.integral = integrate_slice(L, vals, ip, w, near, tol, scale);
    } else {
        if (!d.has_P()) throw NumericalError("spectral data missing on P");
        for (int j = 0; j < 2; ++j) {
            const Slice& S = *d.P[j];
            const auto& vals = s.mirror ? d.hP[j] : d.gP[j];
            const PanelInterpolant* ip = s.mirror ? &d.hPi[j] : &d.gPi[j];
            auto w = [&](const ContourPoint& pt, long i) {
                cplx kz1, kz2;
                if (i >= 0) kz1 = S.kap1[i];
                else S.kappas(pt.segment, pt.t, cfg, kz1, kz2);
                return node_weight(s, pt.z, kz1);
            };
            const SliceSum r = integrate_slice(S, vals, ip, w, near, tol, scale);
            c.integral.value += r.value;
            c.integral.err += r.err;
            c.integral.evals += r.evals;
            c.integral.adaptive = c.integral.adaptive || r.adaptive;
            c.integral.converged = c.integral.converged && r.converged;
        }
    }
    c.integral.value *= pref;
    c.integral.err *= std::abs(pref);
    c.B = c.integral.value + ex;
    return c;
}

ContinuationResult finish(Formula f, const SpectralPoint& p, const SpectralData& d, const Core& c, bool want_phi)
{
    ContinuationResult r;
    r.formula_used = f;
    r.region = classify(p, d.cfg);
    const cplx m = want_phi ? c.to_phi : c.to_psi;
    r.value = c.B * m;
    r.quadrature.value = c.integral.value * m;
    // data errors enter through the integral term
    const double data = (d.interp_error + d.closure_error) * std::abs(c.integral.value);
    r.quadrature.error_estimate = (c.integral.err + data) * std::abs(m);
    r.quadrature.evaluations = c.integral.evals;
    r.quadrature.converged = c.integral.converged;
    r.adaptive = c.integral.adaptive;
    r.clearance = formula_clearance(f, p, d.cfg);
    return r;
}

void check_sided(const SpectralPoint& p, const ProblemConfig& cfg)
{
    const double tg = tau_geo(cfg);
    if (p.dir1 == 0.0 && cut_distance(p.alpha1, cfg) <= tg)
        throw PoleError("alpha1 lies on a branch curve; an approach direction is required");
    if (p.dir2 == 0.0 && cut_distance(p.alpha2, cfg) <= tg)
        throw PoleError("alpha2 lies on a branch curve; an approach direction is required");
}

Formula choose(const SpectralPoint& p, const ProblemConfig& cfg, double* best_clear)
{
    const Formula order[] = {Formula::F1Single, Formula::F2Single, Formula::SecondStep1, Formula::SecondStep2};
    const double good = 0.25 * cfg.epsilon;
    Formula best = Formula::WHDirect;
    double bc = -1e300;
    for (Formula f : order) {
        const double c = formula_clearance(f, p, cfg);
        if (c >= good) {
            *best_clear = c;
            return f;
        }
        if (c > bc) {
            bc = c;
            best = f;
        }
    }
    *best_clear = bc;
    return best;
}

ContinuationResult dispatch(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o, bool want_phi)
{
    check_sided(p, d.cfg);
    double clear = 0;
    const Formula f = choose(p, d.cfg, &clear);
    if (!(clear > 10 * tau_geo(d.cfg))) {
        if (p.dir1 != 0.0 && p.dir2 != 0.0 && want_phi) {
            const OneSided os = phi34_both_sided(p, d);
            ContinuationResult r;
            r.value = -os.value - forcing_P(p, d.cfg);
            r.formula_used = Formula::SecondStep1;
            r.region = classify(p, d.cfg);
            r.quadrature.value = r.value;
            r.quadrature.error_estimate = os.extrapolation_error;
            r.note = "extrapolated from nudged points";
            return r;
        }
        throw NumericalError("point outside every continuation domain");
    }
    ContinuationResult r = finish(f, p, d, core(f, p, d, o.tol), want_phi);
    if (o.cross_check && (f == Formula::F1Single || f == Formula::F2Single)) {
        const Formula g = f == Formula::F1Single ? Formula::F2Single : Formula::F1Single;
        if (formula_clearance(g, p, d.cfg) > 0.25 * d.cfg.epsilon) {
            const ContinuationResult r2 = finish(g, p, d, core(g, p, d, o.tol), want_phi);
            r.cross_check_diff = std::abs(r2.value - r.value);
        }
    }
    return r;
}

}  // namespace

cplx kappa_sum(cplx kap1, cplx kap2, const ProblemConfig& cfg)
{
    // kap2^2 - kap1^2 = k2^2 - k1^2 exactly at a common argument
    const cplx d = kap2 - kap1;
    if (std::abs(d) > std::abs(kap1 + kap2) && d != 0.0) return cfg.contrast() / d;
    return kap1 + kap2;
}

double formula_clearance(Formula f, const SpectralPoint& p, const ProblemConfig& cfg)
{
    const Kaps k = kaps_at(p, cfg);
    const double eps = cfg.epsilon;
    switch (f) {
    case Formula::F1Single:
    case Formula::F2Single: {
        const bool m = f == Formula::F2Single;
        const cplx u = m ? p.alpha2 : p.alpha1, v = m ? p.alpha1 : p.alpha2;
        const cplx ku1 = m ? k.a2k1 : k.a1k1, ku2 = m ? k.a2k2 : k.a1k2;
        double c = v.imag() + eps;
        if (u.imag() > 0) c = std::min(c, ku1.imag() - eps);
        c = std::min(c, ku2.imag() + eps);
        return c;
    }
    case Formula::SecondStep1:
    case Formula::SecondStep2: {
        const bool m = f == Formula::SecondStep2;
        const cplx u = m ? p.alpha2 : p.alpha1, v = m ? p.alpha1 : p.alpha2;
        const cplx du = m ? p.dir2 : p.dir1, dv = m ? p.dir1 : p.dir2;
        double c = du != 0.0 ? 1e300 : -u.imag();
        if (dv != 0.0) return -1.0;
        c = std::min(c, cut_distance(v, cfg));
        return c;
    }
    default: return -1.0;
    }
}

ContinuationResult evaluate_with(Formula f, const SpectralPoint& p, const SpectralData& d, bool want_phi,
                                 const EvalOptions& o)
{
    if (f != Formula::F1Single && f != Formula::F2Single && f != Formula::SecondStep1 && f != Formula::SecondStep2)
        throw std::invalid_argument("evaluate_with: single-integral formula expected");
    check_sided(p, d.cfg);
    return finish(f, p, d, core(f, p, d, o.tol), want_phi);
}

ContinuationResult evaluate_with(Formula f, const SpectralPoint& p, const KappaValues& k, const SpectralData& d,
                                 bool want_phi, const EvalOptions& o)
{
    if (f != Formula::F1Single && f != Formula::F2Single && f != Formula::SecondStep1 && f != Formula::SecondStep2)
        throw std::invalid_argument("evaluate_with: single-integral formula expected");
    return finish(f, p, d, core(f, p, d, o.tol, &k), want_phi);
}

ContinuationResult psi_pp(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o)
{
    return dispatch(p, d, o, false);
}

ContinuationResult phi(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o)
{
    return dispatch(p, d, o, true);
}

ContinuationResult phi_34(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o)
{
    check_sided(p, d.cfg);
    double clear = 0;
    choose(p, d.cfg, &clear);
    if (!(clear > 10 * tau_geo(d.cfg)) && p.dir1 != 0.0 && p.dir2 != 0.0) return dispatch(p, d, o, true);
    ContinuationResult r = dispatch(p, d, o, true);
    r.value = -r.value - forcing_P(p, d.cfg);
    r.quadrature.value = -r.quadrature.value;
    return r;
}

cplx residue_phi(int axis, cplx other, const ProblemConfig& cfg)
{
    if (axis == 1) {
        if (std::abs(other - cfg.a2) < cfg.pole_guard()) throw PoleError("residue_phi: alpha2 = a2");
        const cplx num = factor(Factor::OMinus, {cfg.a1, other}, cfg);
        const cplx den = factor(Factor::OMinus, {cfg.a1, cfg.a2}, cfg);
        return -num / (den * (other - cfg.a2));
    }
    if (axis == 2) {
        if (std::abs(other - cfg.a1) < cfg.pole_guard()) throw PoleError("residue_phi: alpha1 = a1");
        const cplx num = factor(Factor::MinusO, {other, cfg.a2}, cfg);
        const cplx den = factor(Factor::MinusO, {cfg.a1, cfg.a2}, cfg);
        return -num / (den * (other - cfg.a1));
    }
    throw std::invalid_argument("residue_phi: axis must be 1 or 2");
}

cplx neville_zero(const std::vector<double>& x, const std::vector<cplx>& f, double* err)
{
    const size_t n = x.size();
    if (n == 0 || f.size() != n) throw std::invalid_argument("neville_zero: sizes");
    // p[i] holds P_{i..i+m}(0) after step m
    std::vector<cplx> p(f);
    cplx tail = p[n - 1];  // P_{1..n-1}(0), the extrapolant without the largest x
    for (size_t m = 1; m < n; ++m) {
        for (size_t i = 0; i + m < n; ++i) p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i]);
        if (m == n - 2) tail = p[1];
    }
    if (err) *err = n > 1 ? std::abs(p[0] - tail) : std::abs(p[0]);
    return p[0];
}

OneSided phi34_both_sided(const SpectralPoint& p, const SpectralData& d, const std::vector<double>& etas, double tol)
{
    if (p.dir1 == 0.0 || p.dir2 == 0.0) throw std::invalid_argument("phi34_both_sided: both directions required");
    const double km = d.cfg.kmax();
    OneSided out;
    std::vector<double> xs;
    for (double e : etas) {
        SpectralPoint q = p;
        q.alpha2 = p.alpha2 + e * km * p.dir2 / std::abs(p.dir2);
        q.dir2 = 0.0;
        const Core c = core(Formula::SecondStep1, q, d, tol);
        const cplx phi_v = c.B * c.to_phi;
        out.samples.push_back(-phi_v - forcing_P(q, d.cfg));
        xs.push_back(e * km);
    }
    out.value = neville_zero(xs, out.samples, &out.extrapolation_error);
    return out;
}

namespace {

// outer(z2) * [int_line1 kpsi(z1, z2) * inner_w(z1) dz1] integrated over line2
struct DoubleParts {
    cplx value;
    double err = 0;
};

// Product-rule weights on both lines, computed once per point; the inner
// integrals are then weighted sums over the grid columns.
DoubleParts double_integral(const BaseGrid& b, const ContourFn& inner_w, const ContourFn& outer_w,
                            const std::vector<cplx>& near_inner, const std::vector<cplx>& near_outer)
{
    const Slice& s1 = *b.line1;
    const Slice& s2 = *b.line2;
    const size_t n1 = s1.size(), n2 = s2.size();
    const ProductRule pi = product_rule(s1.contour, s1.nodes, inner_w, near_inner);
    const ProductRule po = product_rule(s2.contour, s2.nodes, outer_w, near_outer);
    std::vector<cplx> I(n2, 0.0), IG(n2, 0.0);
    std::vector<double> data(n2, 0.0);
    for (size_t i = 0; i < n1; ++i) {
        const cplx wk = pi.k[i], wg = pi.g[i];
        const double aw = std::abs(wk);
        const cplx* row = &b.kpsi[i * n2];
        const double* er = b.err.empty() ? nullptr : &b.err[i * n2];
        for (size_t m = 0; m < n2; ++m) {
            I[m] += wk * row[m];
            IG[m] += wg * row[m];
            if (er) data[m] += aw * er[m];
        }
    }
    DoubleParts out;
    cplx outer_g = 0.0;
    double err = 0;
    for (size_t m = 0; m < n2; ++m) {
        out.value += po.k[m] * I[m];
        outer_g += po.g[m] * I[m];
        err += std::abs(po.k[m]) * (std::abs(I[m] - IG[m]) + data[m]);
    }
    out.err = err + std::abs(out.value - outer_g);
    return out;
}

}  // namespace

ContinuationResult psi_double(Formula f, const SpectralPoint& p, const SpectralData& d)
{
    const ProblemConfig& cfg = d.cfg;
    const Kaps k = kaps_at(p, cfg);
    ContinuationResult r;
    r.formula_used = f;
    r.region = classify(p, cfg);
    const cplx P = forcing_P(p, cfg);
    const double four_pi2 = 4.0 * kPi * kPi;
    // the Cauchy factors jump across the base lines
    const double b0 = cfg.b0;
    const bool inside = f == Formula::F1 ? (p.alpha1.imag() < b0 && p.alpha2.imag() > -b0)
                                         : (p.alpha1.imag() > -b0 && p.alpha2.imag() < b0);
    if (!inside) throw NumericalError("psi_double: point outside the band between the base lines");
    if (f == Formula::F1) {
        if (!d.base_mirror) throw NumericalError("psi_double: base grid missing");
        const cplx to_psi = (k.a1k1 + p.alpha2) / (kappa_sum(k.a1k1, k.a1k2, cfg) + (p.alpha2 - k.a1k1));
        auto wi = [&](const ContourPoint& pt) { return 1.0 / (pt.z - p.alpha1); };
        auto wo = [&](const ContourPoint& pt) { return (k.a1k1 - pt.z) / ((k.a1k2 - pt.z) * (pt.z - p.alpha2)); };
        const DoubleParts dp = double_integral(*d.base_mirror, wi, wo, {p.alpha1}, {p.alpha2, k.a1k2});
        r.value = to_psi * (dp.value / four_pi2 - P * (k.a1k1 - cfg.a2) / (k.a1k2 - cfg.a2));
        r.quadrature.value = to_psi * dp.value / four_pi2;
        r.quadrature.error_estimate = std::abs(to_psi) * dp.err / four_pi2;
        return r;
    }
    if (f == Formula::F2) {
        if (!d.base) throw NumericalError("psi_double: base grid missing");
        const cplx to_psi = (k.a2k1 + p.alpha1) / (kappa_sum(k.a2k1, k.a2k2, cfg) + (p.alpha1 - k.a2k1));
        auto wi = [&](const ContourPoint& pt) { return (k.a2k1 - pt.z) / ((k.a2k2 - pt.z) * (pt.z - p.alpha1)); };
        auto wo = [&](const ContourPoint& pt) { return 1.0 / (pt.z - p.alpha2); };
        const DoubleParts dp = double_integral(*d.base, wi, wo, {p.alpha1, k.a2k2}, {p.alpha2});
        r.value = to_psi * (dp.value / four_pi2 - P * (k.a2k1 - cfg.a1) / (k.a2k2 - cfg.a1));
        r.quadrature.value = to_psi * dp.value / four_pi2;
        r.quadrature.error_estimate = std::abs(to_psi) * dp.err / four_pi2;
        return r;
    }
    throw std::invalid_argument("psi_double: F1 or F2 expected");
}

int eval_csv(std::istream& in, std::ostream& out, const SpectralData& d, Quantity q, const EvalOptions& o)
{
    out << "re_a1,im_a1,re_a2,im_a2,re_val,im_val,formula_used,err_est\n";
    std::string line;
    int rows = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::replace(line.begin(), line.end(), ',', ' ');
        std::istringstream is(line);
        double v[4];
        if (!(is >> v[0] >> v[1] >> v[2] >> v[3])) continue;  // header or junk
        const SpectralPoint p{cplx(v[0], v[1]), cplx(v[2], v[3])};
        ContinuationResult r;
        switch (q) {
        case Quantity::Psi: r = psi_pp(p, d, o); break;
        case Quantity::Phi: r = phi(p, d, o); break;
        case Quantity::Phi34: r = phi_34(p, d, o); break;
        }
        char buf[256];
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%s,%.3e\n", v[0], v[1], v[2], v[3],
                      r.value.real(), r.value.imag(), formula_name(r.formula_used), r.quadrature.error_estimate);
        out << buf;
        ++rows;
    }
    return rows;
}

Axis axis_from(const std::vector<cplx>& z, const ProblemConfig& cfg)
{
    Axis a;
    a.z = z;
    for (const cplx& w : z) {
        a.kap1.push_back(kappa(1, w, cfg));
        a.kap2.push_back(kappa(2, w, cfg));
    }
    return a;
}

Axis axis_from(const Slice& s)
{
    Axis a;
    for (const auto& p : s.nodes.pts) a.z.push_back(p.z);
    a.kap1 = s.kap1;
    a.kap2 = s.kap2;
    return a;
}

namespace {

struct Source {
    std::vector<cplx> z, kz, wk, wg, data;
};

void append_source(Source& src, const Slice& s, const PanelInterpolant& ip)
{
    for (size_t m = 0; m < s.size(); ++m) {
        const ContourPoint& p = s.nodes.pts[m];
        src.z.push_back(p.z);
        src.kz.push_back(s.kap1[m]);
        src.wk.push_back(s.nodes.wk[m]);
        src.wg.push_back(s.nodes.wg[m]);
        src.data.push_back(ip(p.segment, p.t));
    }
}

PanelSpec refined_spec(PanelSpec p)
{
    p.max_width = std::min(p.max_width, 0.5);
    p.tail_panels = std::max(p.tail_panels, 8);
    return p;
}

}  // namespace

GridValues grid_eval(Formula f, const Axis& A1, const Axis& A2, const SpectralData& d, Quantity q, bool parallel)
{
    return std::move(grid_eval(f, A1, A2, d, std::vector<Quantity>{q}, parallel).front());
}

std::vector<GridValues> grid_eval(Formula f, const Axis& A1, const Axis& A2, const SpectralData& d,
                                  const std::vector<Quantity>& qs, bool parallel, bool adapt)
{
    using Mat = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const ProblemConfig& cfg = d.cfg;
    const bool mirror = f == Formula::F2Single || f == Formula::SecondStep2;
    const bool on_P = f == Formula::SecondStep1 || f == Formula::SecondStep2;
    if (!(f == Formula::F1Single || f == Formula::F2Single || on_P))
        throw std::invalid_argument("grid_eval: single-integral formula expected");
    if (d.gi.values().size() != d.g.size()) throw std::logic_error("grid_eval: interpolants stale, call refresh()");
    const Axis& U = mirror ? A2 : A1;
    const Axis& V = mirror ? A1 : A2;
    const cplx au = mirror ? cfg.a2 : cfg.a1, av = mirror ? cfg.a1 : cfg.a2;
    const size_t nu = U.size(), nv = V.size();

    Source src;
    const double T = d.L->contour.truncation;
    if (cfg.contrast() != 0.0) {
        if (!on_P) {
            if (d.g.empty()) throw NumericalError("grid_eval: spectral data missing on the line");
            PanelSpec spec = refined_spec(d.grid.line);
            if (adapt) {
                // stock panels, refined only under Cauchy points close to the line
                spec = d.grid.line;
                std::vector<Feature> near;
                for (const cplx& v : V.z) {
                    const double dist = std::abs(v.imag() + cfg.epsilon);
                    if (dist < spec.max_width) near.push_back({v.real(), std::max(dist, 0.25 * cfg.epsilon)});
                }
                std::sort(near.begin(), near.end(), [](const Feature& a, const Feature& b) { return a.at < b.at; });
                for (const Feature& ft : near) {
                    if (!spec.extra.empty() && ft.at - spec.extra.back().at < 0.5 * std::min(ft.width, spec.extra.back().width)) {
                        spec.extra.back().width = std::min(spec.extra.back().width, ft.width);
                        continue;
                    }
                    spec.extra.push_back(ft);
                }
            }
            const auto L = make_line_slice(-cfg.epsilon, T, spec, cfg);
            append_source(src, *L, mirror ? d.hi : d.gi);
        } else {
            if (!d.has_P()) throw NumericalError("grid_eval: spectral data missing on P");
            for (int j = 0; j < 2; ++j) {
                const auto P = make_p_slice(j + 1, T, adapt ? d.grid.p : refined_spec(d.grid.p), cfg);
                append_source(src, *P, mirror ? d.hPi[j] : d.gPi[j]);
            }
        }
    }
    const size_t ns = src.z.size();
    const cplx pref = -kI * cfg.contrast() / (4.0 * kPi);

    Mat C(ns, nv);
    for (size_t m = 0; m < ns; ++m)
        for (size_t j = 0; j < nv; ++j) C(m, j) = 1.0 / (src.z[m] - V.z[j]);

    std::vector<GridValues> outs(qs.size());
    for (GridValues& out : outs) {
        out.n1 = A1.size();
        out.n2 = A2.size();
        out.value.assign(nu * nv, 0.0);
        out.err.assign(nu * nv, 0.0);
    }
    const cplx kv1 = kappa(1, av, cfg), kv2 = kappa(2, av, cfg);
    const size_t block = 128;
    for (size_t i0 = 0; i0 < nu; i0 += block) {
        const size_t nb = std::min(block, nu - i0);
        Mat AK(nb, ns), AG(nb, ns);
        const long lb = static_cast<long>(nb);
#pragma omp parallel for schedule(static) if (parallel)
        for (long ii = 0; ii < lb; ++ii) {
            const size_t i = i0 + ii;
            const cplx u = U.z[i], k1u = U.kap1[i], k2u = U.kap2[i];
            for (size_t m = 0; m < ns; ++m) {
                const cplx z = src.z[m], kz = src.kz[m];
                const cplx w = src.data[m] * (k1u - z) / ((k2u - z) * (kz - u) * kz);
                AK(ii, m) = w * src.wk[m];
                AG(ii, m) = w * src.wg[m];
            }
        }
        Mat SK = Mat::Zero(nb, nv), SG = Mat::Zero(nb, nv);
        if (ns > 0) {
            SK.noalias() = AK * C;
            SG.noalias() = AG * C;
        }
#pragma omp parallel for schedule(static) if (parallel)
        for (long ii = 0; ii < lb; ++ii) {
            const size_t i = i0 + ii;
            const cplx u = U.z[i], k1u = U.kap1[i], k2u = U.kap2[i];
            const cplx ks = kappa_sum(k1u, k2u, cfg);
            for (size_t j = 0; j < nv; ++j) {
                const cplx v = V.z[j];
                const SpectralPoint p = mirror ? SpectralPoint{v, u} : SpectralPoint{u, v};
                const cplx P = forcing_P(p, cfg);
                cplx ex = -P * (k1u - av) / (k2u - av);
                if (on_P) ex *= ((kv2 - u) / (kv1 - u)) * ((kv1 - au) / (kv2 - au));
                const cplx B = pref * SK(ii, j) + ex;
                const double e = std::abs(pref) * (std::abs(SK(ii, j) - SG(ii, j)) +
                                                   (d.interp_error + d.closure_error) * std::abs(SK(ii, j)));
                const size_t idx = mirror ? j * nu + i : i * nv + j;
                const cplx mpsi = (k1u + v) / (ks + (v - k1u));
                const cplx mphi = (k2u - v) / (k1u - v);
                for (size_t qi = 0; qi < qs.size(); ++qi) {
                    const cplx m = qs[qi] == Quantity::Psi ? mpsi : mphi;
                    cplx val = B * m;
                    if (qs[qi] == Quantity::Phi34) val = -val - P;
                    outs[qi].value[idx] = val;
                    outs[qi].err[idx] = e * std::abs(m);
                }
            }
        }
    }
    return outs;
}

}  // namespace pwedge
