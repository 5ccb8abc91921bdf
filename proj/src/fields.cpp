#include "pwedge/fields.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace pwedge {

namespace {

constexpr double four_pi2 = 4.0 * kPi * kPi;

Axis take(const Axis& a, const std::vector<size_t>& idx)
{
    Axis b;
    for (size_t i : idx) {
        b.z.push_back(a.z[i]);
        b.kap1.push_back(a.kap1[i]);
        b.kap2.push_back(a.kap2[i]);
    }
    return b;
}

int quadrant_sign(double x) { return x > 0 ? -1 : 1; }

double octave(double x) { return std::exp2(std::floor(std::log2(x))); }

}  // namespace

const char* which_name(Which w)
{
    switch (w) {
    case Which::PhiSc: return "phi_sc";
    case Which::Psi: return "psi";
    case Which::PhiTotal: return "phi_total";
    }
    return "?";
}

Which which_from_name(const std::string& s)
{
    if (s == "phi_sc") return Which::PhiSc;
    if (s == "psi") return Which::Psi;
    if (s == "phi_total") return Which::PhiTotal;
    throw std::invalid_argument("unknown field '" + s + "'");
}

double field_tilt(const ProblemConfig& cfg)
{
    double lim = 1e300;
    for (int j = 1; j <= 2; ++j) {
        const cplx k = cfg.k(j), k2 = k * k;
        // 2 tau / (1 - tau^2) must stay below arg-ratio of k^2
        if (k2.real() > 0) lim = std::min(lim, k2.imag() / k2.real());
        lim = std::min(lim, k.imag() / std::abs(k.real()));
    }
    for (cplx a : {cfg.a1, cfg.a2})
        if (a.real() != 0.0) lim = std::min(lim, -a.imag() / std::abs(a.real()));
    return std::min(0.2, 0.5 * lim);
}

TiltedAxis tilted_axis(int sign, double lo, double hi, const ProblemConfig& cfg, const FieldOptions& o)
{
    if (!(lo > 0) || hi < lo) throw std::invalid_argument("tilted_axis: need 0 < lo <= hi");
    const double tau = o.tau > 0 ? o.tau : field_tilt(cfg);
    TiltedAxis ax;
    ax.sign = sign;
    ax.lo = lo;
    ax.hi = hi;
    ax.T = o.tail_exponent / (tau * lo);
    const double maxw = o.osc_width / hi;
    std::vector<Feature> feats{{0.0, o.feature_width}};
    for (double x : {cfg.a1.real(), cfg.a2.real(), cfg.k1.real(), -cfg.k1.real(), cfg.k2.real(), -cfg.k2.real()})
        if (std::abs(x) < ax.T) feats.push_back({x, o.feature_width});
    const GK21& r = GK21::get();
    std::vector<cplx> z;
    for (int half = 0; half < 2; ++half) {
        const double a = half == 0 ? -ax.T : 0.0, b = half == 0 ? 0.0 : ax.T;
        const std::vector<double> br = graded_breaks(a, b, feats, o.growth, maxw);
        const cplx dadt(1.0, sign * tau * (half == 0 ? -1.0 : 1.0));
        for (size_t i = 0; i + 1 < br.size(); ++i) {
            const double m = 0.5 * (br[i] + br[i + 1]), hw = 0.5 * (br[i + 1] - br[i]);
            for (int k = 0; k < 21; ++k) {
                const double t = m + hw * r.x[k];
                z.emplace_back(t, sign * tau * std::abs(t));
                ax.wk.push_back(hw * r.wk[k] * dadt);
                ax.wg.push_back(hw * r.wg[k] * dadt);
            }
        }
    }
    if (z.size() > o.max_nodes)
        throw NumericalError("tilted_axis: " + std::to_string(z.size()) + " nodes exceed the limit; narrow the x range");
    ax.axis = axis_from(z, cfg);
    return ax;
}

SpectralGrid spectral_grid(const Axis& A1, const Axis& A2, const SpectralData& d, bool parallel)
{
    const ProblemConfig& cfg = d.cfg;
    const size_t n1 = A1.size(), n2 = A2.size();
    SpectralGrid out;
    for (GridValues* g : {&out.psi, &out.phi34}) {
        g->n1 = n1;
        g->n2 = n2;
        g->value.assign(n1 * n2, 0.0);
        g->err.assign(n1 * n2, 0.0);
    }
    std::vector<Formula> cands{Formula::F1Single, Formula::F2Single};
    if (d.has_P() || cfg.contrast() == 0.0) {
        cands.push_back(Formula::SecondStep1);
        cands.push_back(Formula::SecondStep2);
    }
    const double good = 0.25 * cfg.epsilon;
    auto clear = [&](Formula f, size_t i, size_t j) {
        return formula_clearance(f, SpectralPoint{A1.z[i], A2.z[j]}, cfg);
    };
    auto store = [&](const std::vector<GridValues>& g, const std::vector<size_t>& rows, const std::vector<size_t>& cols) {
        for (size_t a = 0; a < rows.size(); ++a)
            for (size_t b = 0; b < cols.size(); ++b) {
                const size_t src = a * cols.size() + b, dst = rows[a] * n2 + cols[b];
                out.psi.value[dst] = g[0].value[src];
                out.psi.err[dst] = g[0].err[src];
                out.phi34.value[dst] = g[1].value[src];
                out.phi34.err[dst] = g[1].err[src];
            }
    };
    const std::vector<Quantity> qs{Quantity::Psi, Quantity::Phi34};

    // whole rows
    std::vector<std::vector<size_t>> by_f(cands.size());
    std::vector<size_t> left;
    for (size_t i = 0; i < n1; ++i) {
        bool done = false;
        for (size_t c = 0; c < cands.size() && !done; ++c) {
            bool ok = true;
            for (size_t j = 0; j < n2 && ok; ++j) ok = clear(cands[c], i, j) >= good;
            if (ok) {
                by_f[c].push_back(i);
                done = true;
            }
        }
        if (!done) left.push_back(i);
    }
    std::vector<size_t> all2(n2);
    for (size_t j = 0; j < n2; ++j) all2[j] = j;
    for (size_t c = 0; c < cands.size(); ++c) {
        if (by_f[c].empty()) continue;
        store(grid_eval(cands[c], take(A1, by_f[c]), A2, d, qs, parallel, true), by_f[c], all2);
        out.usage.emplace_back(cands[c], by_f[c].size());
    }
    if (left.empty()) return out;

    // remaining rows: whole columns
    std::vector<std::vector<size_t>> cols_f(cands.size());
    std::vector<size_t> cols_left;
    for (size_t j = 0; j < n2; ++j) {
        bool done = false;
        for (size_t c = 0; c < cands.size() && !done; ++c) {
            bool ok = true;
            for (size_t i : left) {
                if (clear(cands[c], i, j) < good) {
                    ok = false;
                    break;
                }
            }
            if (ok) {
                cols_f[c].push_back(j);
                done = true;
            }
        }
        if (!done) cols_left.push_back(j);
    }
    const Axis A1l = take(A1, left);
    for (size_t c = 0; c < cands.size(); ++c) {
        if (cols_f[c].empty()) continue;
        store(grid_eval(cands[c], A1l, take(A2, cols_f[c]), d, qs, parallel, true), left, cols_f[c]);
        out.usage.emplace_back(cands[c], cols_f[c].size());
    }

    // single points
    for (size_t i : left)
        for (size_t j : cols_left) {
            const SpectralPoint p{A1.z[i], A2.z[j]};
            const ContinuationResult rp = psi_pp(p, d);
            const ContinuationResult rf = phi_34(p, d);
            const size_t idx = i * n2 + j;
            out.psi.value[idx] = rp.value;
            out.psi.err[idx] = rp.quadrature.error_estimate;
            out.phi34.value[idx] = rf.value;
            out.phi34.err[idx] = rf.quadrature.error_estimate;
            ++out.pointwise;
        }
    return out;
}

FieldEvaluator::FieldEvaluator(const SpectralData& d, const FieldOptions& o) : d_(d), o_(o) {}

const FieldEvaluator::Block& FieldEvaluator::block(int s1, int s2, double lo1, double hi1, double lo2, double hi2)
{
    const Key key{s1, s2, lo1, hi1, lo2, hi2};
    auto it = cache_.find(key);
    if (it != cache_.end()) return *it->second;
    auto b = std::make_unique<Block>();
    b->a1 = tilted_axis(s1, lo1, hi1, d_.cfg, o_);
    b->a2 = tilted_axis(s2, lo2, hi2, d_.cfg, o_);
    b->grid = spectral_grid(b->a1.axis, b->a2.axis, d_, o_.parallel);
    ++built_;
    return *cache_.emplace(key, std::move(b)).first->second;
}

FieldSample FieldEvaluator::sum(const Block& b, Which w, double x1, double x2, int deriv) const
{
    const GridValues& F = w == Which::Psi ? b.grid.psi : b.grid.phi34;
    const size_t n1 = F.n1, n2 = F.n2;
    const double tau = o_.tau > 0 ? o_.tau : field_tilt(d_.cfg);
    std::vector<cplx> ak(n1), ag(n1), bk(n2), bg(n2);
    for (size_t i = 0; i < n1; ++i) {
        cplx e = std::exp(-kI * b.a1.axis.z[i] * x1);
        if (deriv == 1) e *= -kI * b.a1.axis.z[i];
        ak[i] = b.a1.wk[i] * e;
        ag[i] = b.a1.wg[i] * e;
    }
    for (size_t j = 0; j < n2; ++j) {
        cplx e = std::exp(-kI * b.a2.axis.z[j] * x2);
        if (deriv == 2) e *= -kI * b.a2.axis.z[j];
        bk[j] = b.a2.wk[j] * e;
        bg[j] = b.a2.wg[j] * e;
    }
    cplx vk = 0, vg = 0;
    double data = 0, edge_rows = 0, col0 = 0, coln = 0;
    for (size_t i = 0; i < n1; ++i) {
        const cplx* f = &F.value[i * n2];
        const double* er = &F.err[i * n2];
        cplx rk = 0, rg = 0;
        double re = 0;
        for (size_t j = 0; j < n2; ++j) {
            rk += f[j] * bk[j];
            rg += f[j] * bg[j];
            re += er[j] * std::abs(bk[j]);
        }
        vk += ak[i] * rk;
        vg += ag[i] * rg;
        data += std::abs(ak[i]) * re;
        if (i == 0 || i + 1 == n1) {
            double ra = 0;
            for (size_t j = 0; j < n2; ++j) ra += std::abs(f[j] * bk[j]);
            edge_rows += ra * std::abs(ak[i] / b.a1.wk[i]);
        }
        col0 += std::abs(f[0] * ak[i]);
        coln += std::abs(f[n2 - 1] * ak[i]);
    }
    const double e20 = std::abs(bk[0] / b.a2.wk[0]);
    const double e2n = std::abs(bk[n2 - 1] / b.a2.wk[n2 - 1]);
    FieldSample s;
    s.x1 = x1;
    s.x2 = x2;
    s.which = w;
    s.value = vk / four_pi2;
    s.quad_err = std::abs(vk - vg) / four_pi2;
    s.data_err = data / four_pi2;
    s.tail_err = (edge_rows / (tau * std::abs(x1)) + (col0 * e20 + coln * e2n) / (tau * std::abs(x2))) / four_pi2;
    s.err = s.quad_err + s.data_err + s.tail_err;
    s.nodes1 = n1;
    s.nodes2 = n2;
    s.pointwise = b.grid.pointwise;
    if (w == Which::PhiTotal) {
        const cplx inc = incident_wave(x1, x2, d_.cfg);
        s.value += deriv == 0 ? inc : -kI * (deriv == 1 ? d_.cfg.a1 : d_.cfg.a2) * inc;
    }
    return s;
}

namespace {

void check_point(Which w, double x1, double x2, double margin)
{
    if (std::abs(x1) < margin || std::abs(x2) < margin)
        throw std::invalid_argument("reconstruct: point on the boundary of PW; use interface_check for face limits");
    if (w == Which::PhiTotal && x1 > 0 && x2 > 0)
        throw std::invalid_argument("reconstruct: phi_total is defined outside PW only");
}

}  // namespace

std::vector<FieldSample> FieldEvaluator::reconstruct(Which w, const std::vector<std::array<double, 2>>& xs)
{
    std::vector<FieldSample> out(xs.size());
    std::map<Key, std::vector<size_t>> groups;
    for (size_t k = 0; k < xs.size(); ++k) {
        const double x1 = xs[k][0], x2 = xs[k][1];
        check_point(w, x1, x2, o_.margin);
        const double l1 = octave(std::abs(x1)), l2 = octave(std::abs(x2));
        groups[Key{quadrant_sign(x1), quadrant_sign(x2), l1, 2 * l1, l2, 2 * l2}].push_back(k);
    }
    for (const auto& [key, idx] : groups) {
        const auto& [s1, s2, lo1, hi1, lo2, hi2] = key;
        const Block& b = block(s1, s2, lo1, hi1, lo2, hi2);
        const long n = static_cast<long>(idx.size());
#pragma omp parallel for schedule(dynamic) if (o_.parallel && n > 1)
        for (long m = 0; m < n; ++m) out[idx[m]] = sum(b, w, xs[idx[m]][0], xs[idx[m]][1], 0);
    }
    return out;
}

FieldSample FieldEvaluator::reconstruct(Which w, double x1, double x2)
{
    return reconstruct(w, std::vector<std::array<double, 2>>{{x1, x2}}).front();
}

std::vector<FieldSample> FieldEvaluator::reconstruct_joint(Which w, const std::vector<std::array<double, 2>>& xs,
                                                           int deriv)
{
    if (deriv < 0 || deriv > 2) throw std::invalid_argument("reconstruct_joint: deriv 0, 1 or 2");
    if (xs.empty()) return {};
    const int s1 = quadrant_sign(xs[0][0]), s2 = quadrant_sign(xs[0][1]);
    double lo1 = 1e300, hi1 = 0, lo2 = 1e300, hi2 = 0;
    for (const auto& x : xs) {
        check_point(w, x[0], x[1], o_.margin);
        if (quadrant_sign(x[0]) != s1 || quadrant_sign(x[1]) != s2)
            throw std::invalid_argument("reconstruct_joint: points in different quadrants");
        lo1 = std::min(lo1, std::abs(x[0]));
        hi1 = std::max(hi1, std::abs(x[0]));
        lo2 = std::min(lo2, std::abs(x[1]));
        hi2 = std::max(hi2, std::abs(x[1]));
    }
    const Block& b = block(s1, s2, lo1, hi1, lo2, hi2);
    std::vector<FieldSample> out(xs.size());
    const long n = static_cast<long>(xs.size());
#pragma omp parallel for schedule(dynamic) if (o_.parallel && n > 1)
    for (long m = 0; m < n; ++m) out[m] = sum(b, w, xs[m][0], xs[m][1], deriv);
    return out;
}

FieldSample reconstruct(Which w, double x1, double x2, const SpectralData& d, const FieldOptions& o)
{
    FieldEvaluator fe(d, o);
    return fe.reconstruct(w, x1, x2);
}

HelmholtzResult helmholtz_residual(FieldEvaluator& fe, Which w, double x1, double x2, double h)
{
    const double m = fe.options().margin;
    const bool crosses = std::abs(x1) - h < m || std::abs(x2) - h < m;
    if (crosses || !(h > 0)) throw std::invalid_argument("helmholtz_residual: stencil crosses the boundary of PW");
    const std::vector<std::array<double, 2>> st{{x1, x2}, {x1 + h, x2}, {x1 - h, x2}, {x1, x2 + h}, {x1, x2 - h}};
    const std::vector<FieldSample> v = fe.reconstruct_joint(w, st);
    const cplx k = w == Which::Psi ? fe.data().cfg.k2 : fe.data().cfg.k1;
    HelmholtzResult r;
    r.x1 = x1;
    r.x2 = x2;
    r.h = h;
    r.value = v[0].value;
    const cplx lap = (v[1].value + v[2].value + v[3].value + v[4].value - 4.0 * v[0].value) / (h * h);
    r.residual = lap + k * k * v[0].value;
    const double scale = std::abs(k * k * v[0].value);
    r.relative = std::abs(r.residual) / scale;
    double emax = 0;
    for (const auto& s : v) emax = std::max(emax, s.err);
    r.quad_noise = 8 * emax / (h * h) / scale;
    return r;
}

// Traces on the faces. For face 1 the alpha2 integral is done in closed form:
// as alpha2 -> infinity Psi++ = A/alpha2 + B/alpha2^2 + ..., and Psi++ has no
// singularity in the upper alpha2 half plane, so its x2 -> 0+ limit is the jump
// -2 pi i A (and -2 pi B for d/dx2), the 0- side being zero. Phi_3/4 has one
// upper half plane pole, at alpha2 = kappa1(alpha1), with residue
// c h(alpha1) / (2 kappa1(alpha1)); closing upwards gives its x2 -> 0- limit.
// Face 2 is the same with the coordinates exchanged.
FaceTraces face_traces(int face, double s, const SpectralData& d, const FieldOptions& o)
{
    if (face != 1 && face != 2) throw std::invalid_argument("face_traces: face 1 or 2");
    if (!(s > 0)) throw std::invalid_argument("face_traces: abscissa must be positive");
    const ProblemConfig& cfg = d.cfg;
    const bool mirror = face == 2;
    const cplx au = mirror ? cfg.a2 : cfg.a1, av = mirror ? cfg.a1 : cfg.a2;
    const cplx c = cfg.contrast(), pref = -kI * c / (4.0 * kPi);
    const TiltedAxis ax = tilted_axis(-1, s, s, cfg, o);
    const size_t n = ax.axis.size();

    std::vector<cplx> sz, skz, swk, swg, sdat;
    if (c != 0.0) {
        if (d.g.empty()) throw NumericalError("face_traces: spectral data missing");
        PanelSpec spec = d.grid.line;
        spec.max_width = std::min(spec.max_width, 0.5);
        spec.tail_panels = std::max(spec.tail_panels, 8);
        const auto L = make_line_slice(-cfg.epsilon, d.L->contour.truncation, spec, cfg);
        const PanelInterpolant& ip = mirror ? d.hi : d.gi;
        for (size_t m = 0; m < L->size(); ++m) {
            const ContourPoint& p = L->nodes.pts[m];
            sz.push_back(p.z);
            skz.push_back(L->kap1[m]);
            swk.push_back(L->nodes.wk[m]);
            swg.push_back(L->nodes.wg[m]);
            sdat.push_back(ip(p.segment, p.t));
        }
    }
    const double rel_data = d.interp_error + d.closure_error;

    std::array<cplx, 4> vk{}, vg{};
    double data = 0;
    for (size_t i = 0; i < n; ++i) {
        const cplx u = ax.axis.z[i], k1u = ax.axis.kap1[i], k2u = ax.axis.kap2[i];
        cplx m0k = 0, m1k = 0, m0g = 0, m1g = 0, hk = 0, hg = 0;
        double habs = 0;
        for (size_t m = 0; m < sz.size(); ++m) {
            const cplx z = sz[m], kz = skz[m];
            const cplx w = sdat[m] * (k1u - z) / ((k2u - z) * (kz - u) * kz);
            m0k += swk[m] * w;
            m1k += swk[m] * z * w;
            m0g += swg[m] * w;
            m1g += swg[m] * z * w;
            const cplx wc = w / (z - k1u);
            hk += swk[m] * wc;
            hg += swg[m] * wc;
            habs += std::abs(swk[m] * wc);
        }
        const cplx E = -(1.0 / (u - au)) * (k1u - av) / (k2u - av);
        const cplx dk = k1u - k2u;
        const cplx Ak = -pref * m0k + E, Ag = -pref * m0g + E;
        const cplx Bk = -pref * m1k + E * av + dk * Ak, Bg = -pref * m1g + E * av + dk * Ag;
        // h(u) = Psi++(u, kappa1(u)) from the same single-integral form
        cplx rk = 0, rg = 0;
        if (c != 0.0) {
            const cplx v = k1u;
            const cplx P = 1.0 / ((u - au) * (v - av));
            const cplx ex = -P * (k1u - av) / (k2u - av);
            const cplx mpsi = (k1u + v) / (kappa_sum(k1u, k2u, cfg) + (v - k1u));
            rk = c * mpsi * (pref * hk + ex) / (2.0 * k1u);
            rg = c * mpsi * (pref * hg + ex) / (2.0 * k1u);
            data += std::abs(ax.wk[i] * std::exp(-kI * u * s)) *
                    (std::abs(c * mpsi / (2.0 * k1u) * pref) * habs * rel_data +
                     std::abs(pref) * rel_data * (std::abs(m0k) + std::abs(m1k)) * (1.0 + std::abs(dk))) / four_pi2;
        }
        const cplx e = std::exp(-kI * u * s);
        const std::array<cplx, 4> fk{-2.0 * kPi * kI * Ak, -2.0 * kPi * Bk, 2.0 * kPi * kI * rk, 2.0 * kPi * k1u * rk};
        const std::array<cplx, 4> fg{-2.0 * kPi * kI * Ag, -2.0 * kPi * Bg, 2.0 * kPi * kI * rg, 2.0 * kPi * k1u * rg};
        for (int q = 0; q < 4; ++q) {
            vk[q] += ax.wk[i] * e * fk[q];
            vg[q] += ax.wg[i] * e * fg[q];
        }
    }
    FaceTraces t;
    t.psi_in = vk[0] / four_pi2;
    t.dpsi_in = vk[1] / four_pi2;
    t.phisc_out = vk[2] / four_pi2;
    t.dphisc_out = vk[3] / four_pi2;
    double q = 0;
    for (int k = 0; k < 4; ++k) q = std::max(q, std::abs(vk[k] - vg[k]) / four_pi2);
    t.err = q + data;
    return t;
}

InterfaceReport interface_check(const SpectralData& d, const std::vector<double>& abscissae, const FieldOptions& o,
                                const std::vector<double>& etas)
{
    if (etas.size() < 2) throw std::invalid_argument("interface_check: at least two offsets");
    for (double s : abscissae)
        if (!(s > 0)) throw std::invalid_argument("interface_check: abscissae must be positive");
    const double unit = 2 * kPi / std::abs(d.cfg.k1);
    FieldEvaluator fe(d, o);
    InterfaceReport rep;
    for (double e : etas) rep.etas.push_back(e * unit);
    const size_t ns = abscissae.size(), ne = etas.size();
    for (int face = 1; face <= 2; ++face) {
        // [quantity][eta][s]: psi, dpsi, phi, dphi
        std::vector<std::vector<std::vector<FieldSample>>> v(4, std::vector<std::vector<FieldSample>>(ne));
        for (size_t k = 0; k < ne; ++k) {
            const double eta = rep.etas[k];
            std::vector<std::array<double, 2>> in, out;
            for (double s : abscissae) {
                in.push_back(face == 1 ? std::array<double, 2>{s, eta} : std::array<double, 2>{eta, s});
                out.push_back(face == 1 ? std::array<double, 2>{s, -eta} : std::array<double, 2>{-eta, s});
            }
            const int dn = face == 1 ? 2 : 1;
            v[0][k] = fe.reconstruct_joint(Which::Psi, in, 0);
            v[1][k] = fe.reconstruct_joint(Which::Psi, in, dn);
            v[2][k] = fe.reconstruct_joint(Which::PhiTotal, out, 0);
            v[3][k] = fe.reconstruct_joint(Which::PhiTotal, out, dn);
            fe.clear();
        }
        for (size_t i = 0; i < ns; ++i) {
            cplx lim[4];
            double err[4];
            for (int q = 0; q < 4; ++q) {
                std::vector<double> x;
                std::vector<cplx> f;
                double qe = 0;
                for (size_t k = 0; k < ne; ++k) {
                    // phi side sits at -eta
                    x.push_back(q < 2 ? rep.etas[k] : -rep.etas[k]);
                    f.push_back(v[q][k][i].value);
                    qe = std::max(qe, v[q][k][i].err);
                }
                double ee = 0;
                lim[q] = neville_zero(x, f, &ee);
                err[q] = ee + qe;
            }
            InterfaceSample r;
            r.face = face;
            r.s = abscissae[i];
            r.psi = lim[0];
            r.dpsi = lim[1];
            r.phi = lim[2];
            r.dphi = lim[3];
            const double sc = std::max(std::abs(r.phi), std::abs(r.psi));
            const double dsc = std::max(std::abs(r.dphi), std::abs(r.dpsi));
            r.mismatch = std::abs(r.phi - r.psi) / sc;
            r.dmismatch = std::abs(r.dphi - r.dpsi) / dsc;
            r.err = std::max((err[0] + err[2]) / sc, (err[1] + err[3]) / dsc);
            rep.max_mismatch = std::max(rep.max_mismatch, r.mismatch);
            rep.max_dmismatch = std::max(rep.max_dmismatch, r.dmismatch);
            rep.max_err = std::max(rep.max_err, r.err);
            rep.samples.push_back(r);
        }
    }
    return rep;
}

namespace {

double loglog_slope(const std::vector<CircleFit>& f)
{
    if (f.size() < 2) return 0;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(f.size());
    for (const auto& c : f) {
        const double x = std::log(c.r), y = std::log(std::max(c.residual, 1e-300));
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

MeixnerReport meixner_fit(FieldEvaluator& fe, const std::vector<double>& radii, int per_quadrant)
{
    if (per_quadrant < 2) throw std::invalid_argument("meixner_fit: at least 2 points per quadrant");
    MeixnerReport rep;
    for (double r : radii) {
        for (int pass = 0; pass < 2; ++pass) {
            const bool psi = pass == 0;
            std::vector<double> th;
            std::vector<cplx> val;
            for (int q = psi ? 0 : 1; q < (psi ? 1 : 4); ++q) {
                std::vector<std::array<double, 2>> pts;
                std::vector<double> tq;
                for (int k = 0; k < per_quadrant; ++k) {
                    const double t = q * kPi / 2 + kPi / 8 + (kPi / 4) * k / (per_quadrant - 1);
                    tq.push_back(t);
                    pts.push_back({r * std::cos(t), r * std::sin(t)});
                }
                const auto v = fe.reconstruct_joint(psi ? Which::Psi : Which::PhiTotal, pts);
                for (size_t k = 0; k < v.size(); ++k) {
                    th.push_back(tq[k]);
                    val.push_back(v[k].value);
                }
            }
            Eigen::MatrixXcd A(th.size(), 3);
            Eigen::VectorXcd b(th.size());
            for (size_t k = 0; k < th.size(); ++k) {
                A(k, 0) = 1.0;
                A(k, 1) = r * std::sin(th[k]);
                A(k, 2) = r * std::cos(th[k]);
                b(k) = val[k];
            }
            const Eigen::VectorXcd x = A.colPivHouseholderQr().solve(b);
            CircleFit f;
            f.r = r;
            f.B = x(0);
            f.A1 = x(1);
            f.B1 = x(2);
            f.residual = (A * x - b).norm() / std::sqrt(static_cast<double>(th.size()));
            (psi ? rep.psi : rep.phi).push_back(f);
        }
    }
    rep.slope_phi = loglog_slope(rep.phi);
    rep.slope_psi = loglog_slope(rep.psi);
    if (!radii.empty()) {
        size_t k = 0;
        for (size_t i = 1; i < radii.size(); ++i)
            if (radii[i] < radii[k]) k = i;
        rep.b_mismatch = std::abs(rep.phi[k].B - rep.psi[k].B);
    }
    return rep;
}

void write_field_csv(const std::vector<FieldSample>& v, std::ostream& os)
{
    os << "x1,x2,re,im,which,err_est\n";
    char buf[256];
    for (const auto& s : v) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g,%s,%.3e\n", s.x1, s.x2, s.value.real(),
                      s.value.imag(), which_name(s.which), s.err);
        os << buf;
    }
}

std::vector<FieldSample> field_grid(FieldEvaluator& fe, double lo, double hi, int n, bool total)
{
    if (n < 1 || !(hi > lo)) throw std::invalid_argument("field_grid: bad extent");
    const double h = (hi - lo) / n;
    std::vector<std::array<double, 2>> in, out;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double x1 = lo + (i + 0.5) * h, x2 = lo + (j + 0.5) * h;
            if (std::abs(x1) < fe.options().margin || std::abs(x2) < fe.options().margin) continue;
            (x1 > 0 && x2 > 0 ? in : out).push_back({x1, x2});
        }
    std::vector<FieldSample> v = fe.reconstruct(Which::Psi, in);
    const std::vector<FieldSample> w = fe.reconstruct(total ? Which::PhiTotal : Which::PhiSc, out);
    v.insert(v.end(), w.begin(), w.end());
    std::sort(v.begin(), v.end(), [](const FieldSample& a, const FieldSample& b) {
        return a.x1 != b.x1 ? a.x1 < b.x1 : a.x2 < b.x2;
    });
    return v;
}

}  // namespace pwedge
