#include "pwedge/analysis.hpp"

#include <Eigen/Dense>
#include <boost/math/tools/roots.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace pwedge {

const char* trace_kind_name(TraceKind k)
{
    switch (k) {
    case TraceKind::PolarLine: return "polar-line";
    case TraceKind::BranchLine: return "branch-line";
    case TraceKind::CircleArc: return "circle-arc";
    }
    return "?";
}

const char* owner_name(Owner o) { return o == Owner::Psi ? "Psi++" : "Phi34"; }

size_t TraceSet::count(TraceKind k) const
{
    return static_cast<size_t>(std::count_if(traces.begin(), traces.end(), [k](const Trace& t) { return t.kind == k; }));
}

size_t TraceSet::count(TraceKind k, int axis) const
{
    return static_cast<size_t>(
        std::count_if(traces.begin(), traces.end(), [k, axis](const Trace& t) { return t.kind == k && t.axis == axis; }));
}

namespace {

Trace line_trace(const std::string& id, TraceKind kind, Owner owner, int axis, double level, double R, int n)
{
    Trace t;
    t.id = id;
    t.kind = kind;
    t.owner = owner;
    t.axis = axis;
    t.level = level;
    for (int i = 0; i < n; ++i) {
        const double s = -R + 2.0 * R * i / (n - 1);
        t.t.push_back(s);
        t.pts.push_back(axis == 1 ? std::array<double, 2>{level, s} : std::array<double, 2>{s, level});
    }
    return t;
}

Trace arc_trace(const std::string& id, Owner owner, double radius, double lo, double hi, int n)
{
    Trace t;
    t.id = id;
    t.kind = TraceKind::CircleArc;
    t.owner = owner;
    t.level = radius;
    t.theta_lo = lo;
    t.theta_hi = hi;
    for (int i = 0; i < n; ++i) {
        const double th = lo + (hi - lo) * i / (n - 1);
        t.t.push_back(th);
        t.pts.push_back({radius * std::cos(th), radius * std::sin(th)});
    }
    // exact endpoints on the axes
    for (auto& p : t.pts)
        for (double& c : p)
            if (std::abs(c) < 1e-15 * radius) c = 0.0;
    return t;
}

}  // namespace

TraceSet compute_traces(Owner owner, const ProblemConfig& cfg, const TraceOptions& o)
{
    TraceSet s;
    s.owner = owner;
    const double k1 = cfg.k1.real(), k2 = cfg.k2.real();
    const double R = o.extent > 0 ? o.extent : 2.5 * k2;
    const int n = std::max(o.samples, 3);
    const std::string tag = owner == Owner::Psi ? "psi" : "phi34";
    s.traces.push_back(line_trace(tag + "-polar-a1", TraceKind::PolarLine, owner, 1, cfg.a1.real(), R, n));
    s.traces.push_back(line_trace(tag + "-polar-a2", TraceKind::PolarLine, owner, 2, cfg.a2.real(), R, n));
    for (int axis = 1; axis <= 2; ++axis) {
        s.traces.push_back(line_trace(tag + "-branch-k1-axis" + std::to_string(axis), TraceKind::BranchLine, owner, axis, -k1, R, n));
        s.traces.push_back(line_trace(tag + "-branch-k2-axis" + std::to_string(axis), TraceKind::BranchLine, owner, axis, -k2, R, n));
    }
    if (owner == Owner::Psi) {
        // a1^2 + a2^2 = k2^2 with a1 <= 0, a2 <= 0
        s.traces.push_back(arc_trace(tag + "-circle-k2", owner, k2, kPi, 1.5 * kPi, n));
    } else {
        // a1^2 + a2^2 = k1^2 with "a1 >= 0, or a2 <= 0", taken literally: every angle except the open second quadrant
        s.traces.push_back(arc_trace(tag + "-circle-k1", owner, k1, kPi, 2.5 * kPi, n));
        s.notes.push_back("Phi34 arc uses the condition 'a1 >= 0, or a2 <= 0' as stated (three quarters of the circle); flagged for review");
    }
    if (cfg.regime == Regime::Extended) {
        const double k = o.extended_k == ExtendedK::K2 ? k2 : k1;
        const double a2 = cfg.a2.real();
        const double level = -sqrt_arrow(cplx(k * k - a2 * a2, 0.0)).real();
        s.traces.push_back(line_trace(tag + "-extended", TraceKind::PolarLine, owner, 1, level, R, n));
        s.notes.push_back(std::string("extended-regime line uses ") + (o.extended_k == ExtendedK::K2 ? "k2" : "k1") +
                          "; the text derivation gives k1, the figure caption gives k2");
    }
    s.notes.push_back("real traces in the limit Im k -> 0, using Re k and Re a");
    return s;
}

void write_traces_csv(const std::vector<TraceSet>& sets, std::ostream& os)
{
    os << "curve_id,kind,owner,t,a1,a2\n";
    char buf[256];
    for (const auto& s : sets)
        for (const auto& t : s.traces)
            for (size_t i = 0; i < t.pts.size(); ++i) {
                std::snprintf(buf, sizeof buf, "%s,%s,%s,%.17g,%.17g,%.17g\n", t.id.c_str(), trace_kind_name(t.kind),
                              owner_name(t.owner), t.t[i], t.pts[i][0], t.pts[i][1]);
                os << buf;
            }
}

double arc_distance(const Trace& arc, double x, double y)
{
    double th = std::atan2(y, x);
    while (th < arc.theta_lo) th += 2 * kPi;
    if (th <= arc.theta_hi) return std::abs(std::hypot(x, y) - arc.level);
    double best = 1e300;
    for (double e : {arc.theta_lo, arc.theta_hi})
        best = std::min(best, std::hypot(x - arc.level * std::cos(e), y - arc.level * std::sin(e)));
    return best;
}

ArcRootCheck arc_roots(const ProblemConfig& cfg, const Trace& arc, int n)
{
    const cplx k1(cfg.k1.real(), 0.0), k2(cfg.k2.real(), 0.0);
    const double R = k2.real();
    ArcRootCheck out;
    cplx guess(-0.9 * R, 0.0);
    for (int i = 0; i < n; ++i) {
        const double a2 = -R + 2.0 * R * i / (n - 1);
        const cplx q1 = kappa_k(k1, a2), q2 = kappa_k(k2, a2);
        // K+o = (q2 + a1)/(q1 + a1) vanishes where its numerator does; Newton on
        // the Moebius map itself leaves the basin from most starting points
        auto f = [&](cplx a1) { return std::make_pair(q2 + a1, cplx(1.0)); };
        const cplx root = boost::math::tools::complex_newton(f, guess, 100);
        if (!(std::abs(factor_raw(Factor::PlusO, root, a2, k1, k2)) <= 1e-12) || std::abs(q1 + root) < 1e-12)
            throw NumericalError("arc_roots: no zero of K+o found");
        guess = root;
        out.alpha2.push_back(a2);
        out.root.push_back(root);
        out.max_radius_error = std::max(out.max_radius_error, std::abs(std::hypot(root.real(), a2) - R));
        out.max_imag = std::max(out.max_imag, std::abs(root.imag()));
        if (root.real() > 1e-12) out.all_left = false;
        // the arc is the part with a2 <= 0 as well
        if (a2 <= 0) out.max_arc_distance = std::max(out.max_arc_distance, arc_distance(arc, root.real(), a2));
    }
    return out;
}

cplx phi_ac_sum(const std::array<cplx, 4>& c, bool same_curve)
{
    // c = {rr, ll, lr, rl}
    const cplx s = c[0] + c[1] - c[2] - c[3];
    return same_curve ? s : -s;
}

CrossingSample phi_ac(int j1, double s1, int j2, double s2, const SpectralData& d, const std::vector<double>& etas)
{
    const ProblemConfig& cfg = d.cfg;
    if (!(s1 > tau_geo(cfg) && s2 > tau_geo(cfg))) throw PoleError("phi_ac: base point too close to a branch point");
    const double T = d.L ? d.L->contour.truncation : default_truncation(cfg);
    const Contour P1 = build_P(j1, cfg, T), P2 = build_P(j2, cfg, T);
    const ContourPoint l1 = P1.at(1, -s1), r1 = P1.at(2, s1);
    const ContourPoint l2 = P2.at(1, -s2), r2 = P2.at(2, s2);
    CrossingSample out;
    out.j1 = j1;
    out.j2 = j2;
    out.s1 = s1;
    out.s2 = s2;
    out.base = {r1.z, r2.z};
    const std::array<std::pair<const ContourPoint*, const ContourPoint*>, 4> sides{
        {{&r1, &r2}, {&l1, &l2}, {&l1, &r2}, {&r1, &l2}}};
    std::array<cplx, 4> vals{};
    for (int c = 0; c < 4; ++c) {
        const ContourPoint& a = *sides[c].first;
        const ContourPoint& b = *sides[c].second;
        CornerValue& cv = out.corners[c];
        try {
            const OneSided os = phi34_both_sided({a.z, b.z, a.dir, b.dir}, d, etas);
            cv.value = os.value;
            cv.extrapolation_error = os.extrapolation_error;
        } catch (const std::exception& e) {
            cv.ok = false;
            cv.note = e.what();
        }
        vals[c] = cv.value;
        out.max_corner = std::max(out.max_corner, std::abs(cv.value));
        out.error += cv.extrapolation_error;
    }
    out.phi_ac = phi_ac_sum(vals, j1 == j2);
    return out;
}

void write_crossing_json(const std::vector<CrossingSample>& v, double tol, std::ostream& os)
{
    using nlohmann::json;
    auto cj = [](cplx z) { return json::array({z.real(), z.imag()}); };
    static const char* names[4] = {"rr", "ll", "lr", "rl"};
    json arr = json::array();
    for (const auto& s : v) {
        json c;
        for (int i = 0; i < 4; ++i)
            c[names[i]] = {{"value", cj(s.corners[i].value)},
                           {"extrapolation_error", s.corners[i].extrapolation_error},
                           {"ok", s.corners[i].ok},
                           {"note", s.corners[i].note}};
        const double rel = s.max_corner > 0 ? std::abs(s.phi_ac) / s.max_corner : 0.0;
        arr.push_back({{"base", {{"curve1", s.j1}, {"s1", s.s1}, {"curve2", s.j2}, {"s2", s.s2},
                                 {"alpha1", cj(s.base.alpha1)}, {"alpha2", cj(s.base.alpha2)}}},
                       {"corners", c},
                       {"phi_ac", cj(s.phi_ac)},
                       {"abs_phi_ac", std::abs(s.phi_ac)},
                       {"max_corner", s.max_corner},
                       {"relative", rel},
                       {"extrapolation_error", s.error},
                       {"tolerance", tol},
                       {"pass", rel < tol}});
    }
    os << arr.dump(2) << "\n";
}

namespace {

// Up the line Re = -X from -i depth, across at Im = -c, down the line Re = X.
Contour gamma_contour(double X, double c, double depth)
{
    Contour g;
    g.name = "Gamma";
    g.truncation = depth;
    const double L = depth - c;
    Segment up;
    up.id = 0;
    up.t0 = 0;
    up.t1 = L;
    up.z = [X, depth](double t) { return cplx(-X, -(depth - t)); };
    up.dz = [](double) { return kI; };
    Segment across;
    across.id = 1;
    across.t0 = -X;
    across.t1 = X;
    across.z = [c](double t) { return cplx(t, -c); };
    across.dz = [](double) { return cplx(1.0); };
    Segment down;
    down.id = 2;
    down.t0 = 0;
    down.t1 = L;
    down.z = [X, c](double t) { return cplx(X, -(c + t)); };
    down.dz = [](double) { return -kI; };
    g.segments = {up, across, down};
    return g;
}

}  // namespace

Q1Result q1_annihilation(const SpectralData& d, double x1, double x2, const Q1Options& o)
{
    const ProblemConfig& cfg = d.cfg;
    if (!d.has_P()) throw NumericalError("q1_annihilation: spectral data missing on P");
    const double c = o.crossing > 0 ? o.crossing : 0.45 * std::min(cfg.k1.imag(), cfg.k2.imag());
    const double X = o.half_width > 0 ? o.half_width : 2.0 * cfg.k2.real();
    if (!(c > 0 && c < std::min(cfg.k1.imag(), cfg.k2.imag())))
        throw ConfigError("q1_annihilation: Gamma must pass between the real axis and the branch points");
    const Contour G = gamma_contour(X, c, o.depth);
    // the poles a1 and +-kappa_1(alpha2) (real on P_1) sit at distance >= c
    // from the horizontal part, so panels of width 0.2 c/0.18 are plenty
    const double w = std::min(0.25, 1.2 * c);
    std::vector<std::vector<double>> br(3);
    const double L = o.depth - c;
    auto down = graded_breaks(0, L, {{0.0, w}}, 1.4, 3.0);
    br[2] = down;
    for (auto it = down.rbegin(); it != down.rend(); ++it) br[0].push_back(L - *it);
    br[1] = graded_breaks(-X, X, {{cfg.a1.real(), w}}, 1.0, w);
    const NodeSet gn = make_nodes_from_breaks(G, br);

    // truncation keeps whole panels so the Kronrod and Gauss sums see the same contour
    auto keep = [&](const NodeSet& n) {
        std::vector<size_t> idx;
        for (const Panel& pn : n.panels) {
            bool in = true;
            for (int q = 0; q < 21; ++q) {
                const cplx z = n.pts[pn.first + q].z;
                if (!std::isfinite(z.real()) || !std::isfinite(z.imag()) || (o.body_only > 0 && -z.imag() > o.body_only))
                    in = false;
            }
            if (in)
                for (int q = 0; q < 21; ++q) idx.push_back(pn.first + q);
        }
        return idx;
    };
    const std::vector<size_t> ig = keep(gn);
    std::vector<cplx> zg;
    for (size_t i : ig) zg.push_back(gn.pts[i].z);
    const Axis A1 = axis_from(zg, cfg);

    Axis A2;
    std::vector<cplx> wk2, wg2;
    for (int j = 0; j < 2; ++j) {
        const Slice& P = *d.P[j];
        for (size_t m : keep(P.nodes)) {
            A2.z.push_back(P.nodes.pts[m].z);
            A2.kap1.push_back(P.kap1[m]);
            A2.kap2.push_back(P.kap2[m]);
            wk2.push_back(P.nodes.wk[m]);
            wg2.push_back(P.nodes.wg[m]);
        }
    }
    const GridValues V = grid_eval(Formula::SecondStep2, A1, A2, d, Quantity::Phi34, o.parallel);
    const size_t n1 = A1.size(), n2 = A2.size();
    std::vector<cplx> e2(n2);
    for (size_t m = 0; m < n2; ++m) e2[m] = std::exp(-kI * A2.z[m] * x2);

    Q1Result out;
    out.inner_nodes = n1;
    out.outer_nodes = n2;
    cplx kk = 0.0, gk = 0.0, kg = 0.0;
    double data = 0, mag = 0;
    std::vector<cplx> inner(n2, 0.0);
    for (size_t i = 0; i < n1; ++i) {
        const size_t gi = ig[i];
        const cplx e1 = std::exp(-kI * A1.z[i] * x1);
        cplx sk = 0.0, sg = 0.0;
        double dm = 0, mm = 0;
        for (size_t m = 0; m < n2; ++m) {
            const cplx f = V.value[i * n2 + m] * e2[m];
            inner[m] += gn.wk[gi] * e1 * f;
            sk += wk2[m] * f;
            sg += wg2[m] * f;
            const double a = std::abs(wk2[m] * e2[m]);
            dm += a * V.err[i * n2 + m];
            mm += a * std::abs(V.value[i * n2 + m]);
        }
        kk += gn.wk[gi] * e1 * sk;
        gk += gn.wg[gi] * e1 * sk;
        kg += gn.wk[gi] * e1 * sg;
        const double a = std::abs(gn.wk[gi] * e1);
        data += a * dm;
        mag += a * mm;
    }
    out.value = kk;
    out.error = std::abs(kk - gk) + std::abs(kk - kg) + data;
    out.magnitude = mag;
    for (size_t m = 0; m < n2; ++m) out.inner_scale += std::abs(wk2[m] * inner[m]);
    return out;
}

namespace {

struct TailFit {
    cplx constant, linear;
    double residual = 0;
};

// f(alpha) ~ c + b alpha + sum_m d_m alpha^-m for |alpha| large along the real axis
TailFit tail_fit(const std::function<cplx(cplx)>& f, const DecomposeOptions& o)
{
    const int ns = o.tail_samples, nt = 2 + o.inverse_terms;
    const double R = o.tail_radius;
    Eigen::MatrixXcd A(ns, nt);
    Eigen::VectorXcd b(ns);
    for (int i = 0; i < ns; ++i) {
        const int half = ns / 2;
        const double sgn = i < half ? -1.0 : 1.0;
        const int k = i < half ? i : i - half;
        const int cnt = i < half ? half : ns - half;
        const double s = sgn * (1.0 + 3.0 * k / std::max(cnt - 1, 1));  // |alpha| / R in [1, 4]
        A(i, 0) = 1.0;
        A(i, 1) = s;
        for (int m = 1; m <= o.inverse_terms; ++m) A(i, 1 + m) = std::pow(s, -m);
        b(i) = f(cplx(s * R, 0.0));
    }
    const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(b);
    TailFit t;
    t.constant = x(0);
    t.linear = x(1) / R;
    const double nb = b.norm();
    t.residual = nb > 0 ? (A * x - b).norm() / nb : 0.0;
    return t;
}

}  // namespace

EdgeDecomposition decompose_edge_functions(const Sampler2& G, const std::vector<cplx>& points, const DecomposeOptions& o)
{
    if (o.tail_samples < o.inverse_terms + 4) throw NumericalError("decompose_edge_functions: too few tail samples");
    double reach = 0;
    for (const cplx& p : points) reach = std::max(reach, std::abs(p));
    if (!(o.tail_radius > 10.0 * std::max(reach, 1.0)))
        throw NumericalError("decompose_edge_functions: tail radius must exceed the table extent tenfold");
    EdgeDecomposition out;
    out.points = points;
    const size_t n = points.size();
    // Step 1: alpha2 = 0 leaves F1(0) + F2(alpha1) + alpha1 F3(0)
    const TailFit s1 = tail_fit([&](cplx a) { return G(a, 0.0); }, o);
    const cplx F1_0 = s1.constant, F3_0 = s1.linear;
    out.F2.resize(n);
    for (size_t i = 0; i < n; ++i) out.F2[i] = G(points[i], 0.0) - F1_0 - points[i] * F3_0;
    // Step 2: alpha1 = 0 leaves F1(alpha2) + F2(0) + alpha2 F4(0)
    const TailFit s2 = tail_fit([&](cplx a) { return G(0.0, a); }, o);
    const cplx F2_0 = G(0.0, 0.0) - F1_0, F4_0 = s2.linear;
    out.F1.resize(n);
    for (size_t i = 0; i < n; ++i) out.F1[i] = G(0.0, points[i]) - F2_0 - points[i] * F4_0;
    out.fit_residual = std::max(s1.residual, s2.residual);
    // Step 3: at fixed alpha2 the linear growth in alpha1 is F3(alpha2); likewise F4
    out.F3.resize(n);
    out.F4.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const cplx p = points[i];
        const TailFit a = tail_fit([&](cplx z) { return G(z, p); }, o);
        const TailFit b = tail_fit([&](cplx z) { return G(p, z); }, o);
        out.F3[i] = a.linear;
        out.F4[i] = b.linear;
        out.fit_residual = std::max({out.fit_residual, a.residual, b.residual});
    }
    return out;
}

}  // namespace pwedge
