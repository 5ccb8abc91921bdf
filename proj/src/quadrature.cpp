#include "pwedge/quadrature.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <queue>
#include <sstream>

namespace pwedge {

const GK21& GK21::get()
{
    static const GK21 rule = [] {
        GK21 r{};
        const auto& ka = boost::math::quadrature::gauss_kronrod<double, 21>::abscissa();
        const auto& kw = boost::math::quadrature::gauss_kronrod<double, 21>::weights();
        const auto& ga = boost::math::quadrature::gauss<double, 10>::abscissa();
        const auto& gw = boost::math::quadrature::gauss<double, 10>::weights();
        // ascending order: -x10 .. -x1, 0, x1 .. x10
        for (int i = 0; i < 21; ++i) {
            const int m = i - 10;
            const int a = std::abs(m);
            r.x[i] = m < 0 ? -ka[a] : ka[a];
            r.wk[i] = kw[a];
            r.wg[i] = 0.0;
            if (a % 2 == 1) r.wg[i] = gw[(a - 1) / 2];
        }
        (void)ga;
        return r;
    }();
    return rule;
}

std::string QuadratureResult::to_json() const
{
    std::ostringstream os;
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "{\"value\":[%.17g,%.17g],\"error_estimate\":%.6g,\"tail_estimate\":%.6g,\"evaluations\":%ld,"
                  "\"converged\":%s,\"max_depth\":%d,\"depth_histogram\":[",
                  value.real(), value.imag(), error_estimate, tail_estimate, evaluations,
                  converged ? "true" : "false", max_depth);
    os << buf;
    for (size_t i = 0; i < depth_histogram.size(); ++i) os << (i ? "," : "") << depth_histogram[i];
    os << "]}";
    return os.str();
}

namespace {

// integrand including the Jacobian, addressed by (segment, parameter)
using SegFn = std::function<cplx(int, double)>;

struct Item {
    int seg;
    double a, b;
    int depth;
    cplx k;
    double err;
};

struct PanelEval {
    cplx k, g;
};

PanelEval eval_panel(const SegFn& f, int seg, double a, double b, bool parallel)
{
    const GK21& r = GK21::get();
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    std::array<cplx, 21> v;
    std::exception_ptr err;
#pragma omp parallel for if (parallel) schedule(static)
    for (int i = 0; i < 21; ++i) {
        try {
            v[i] = f(seg, mid + half * r.x[i]);
        } catch (...) {
#pragma omp critical
            err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    cplx k = 0.0, g = 0.0;
    for (int i = 0; i < 21; ++i) {
        if (!std::isfinite(v[i].real()) || !std::isfinite(v[i].imag()))
            throw NumericalError("non-finite integrand value");
        k += r.wk[i] * v[i];
        g += r.wg[i] * v[i];
    }
    return {k * half, g * half};
}

struct Start {
    int seg;
    double a, b;
};

QuadratureResult adaptive(const SegFn& f, const std::vector<Start>& starts, const QuadOptions& opt)
{
    QuadratureResult res;
    std::vector<Item> items;
    items.reserve(starts.size() * 4);
    auto cmp = [&items](size_t i, size_t j) { return items[i].err < items[j].err; };
    std::priority_queue<size_t, std::vector<size_t>, decltype(cmp)> queue(cmp);
    double total_err = 0;
    cplx total = 0.0;
    double stuck_err = 0;  // panels that hit the depth limit
    for (const auto& s : starts) {
        if (!(s.b > s.a)) continue;
        const auto pe = eval_panel(f, s.seg, s.a, s.b, opt.parallel);
        res.evaluations += 21;
        items.push_back({s.seg, s.a, s.b, 0, pe.k, std::abs(pe.k - pe.g)});
        total += pe.k;
        total_err += items.back().err;
        queue.push(items.size() - 1);
    }
    bool ok = true;
    while (!queue.empty()) {
        if (total_err <= opt.tol * std::max(opt.abs_floor, std::abs(total))) break;
        if (res.evaluations >= opt.max_evals) {
            ok = false;
            break;
        }
        const size_t i = queue.top();
        queue.pop();
        Item it = items[i];
        if (it.depth >= opt.max_depth) {
            stuck_err += it.err;
            ok = false;
            continue;
        }
        const double m = 0.5 * (it.a + it.b);
        const auto l = eval_panel(f, it.seg, it.a, m, opt.parallel);
        const auto r = eval_panel(f, it.seg, m, it.b, opt.parallel);
        res.evaluations += 42;
        total -= it.k;
        total_err -= it.err;
        items[i] = {it.seg, it.a, m, it.depth + 1, l.k, std::abs(l.k - l.g)};
        items.push_back({it.seg, m, it.b, it.depth + 1, r.k, std::abs(r.k - r.g)});
        total += l.k + r.k;
        total_err += items[i].err + items.back().err;
        queue.push(i);
        queue.push(items.size() - 1);
    }
    // deterministic final summation
    std::vector<size_t> order(items.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&items](size_t i, size_t j) {
        if (items[i].seg != items[j].seg) return items[i].seg < items[j].seg;
        return items[i].a < items[j].a;
    });
    cplx sum = 0.0;
    double err = 0;
    for (size_t i : order) {
        sum += items[i].k;
        err += items[i].err;
        const int d = items[i].depth;
        if (static_cast<int>(res.depth_histogram.size()) <= d) res.depth_histogram.resize(d + 1, 0);
        ++res.depth_histogram[d];
        res.max_depth = std::max(res.max_depth, d);
    }
    (void)stuck_err;
    res.value = sum;
    res.error_estimate = err;
    res.converged = ok && err <= opt.tol * std::max(opt.abs_floor, std::abs(sum)) * 1.000001;
    return res;
}

std::vector<Start> split_starts(int seg, double a, double b, std::vector<double> breaks)
{
    std::vector<Start> s;
    breaks.push_back(a);
    breaks.push_back(b);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
    for (size_t i = 0; i + 1 < breaks.size(); ++i) {
        if (breaks[i] < a || breaks[i + 1] > b) continue;
        if (breaks[i + 1] > breaks[i]) s.push_back({seg, breaks[i], breaks[i + 1]});
    }
    return s;
}

}  // namespace

QuadratureResult integrate_interval(const RealFn& f, double a, double b, const QuadOptions& opt,
                                    const std::vector<double>& breaks)
{
    SegFn g = [&f](int, double t) { return f(t); };
    return adaptive(g, split_starts(0, a, b, breaks), opt);
}

QuadratureResult integrate_contour(const ContourFn& f, const Contour& c, const QuadOptions& opt)
{
    SegFn g = [&](int seg, double t) {
        const ContourPoint p = c.at(seg, t);
        if (p.dz == 0.0) return cplx(0.0);
        return f(p) * p.dz;
    };
    std::vector<Start> starts;
    bool has_tails = false;
    for (size_t s = 0; s < c.segments.size(); ++s) {
        const Segment& seg = c.segments[s];
        has_tails = has_tails || seg.tail;
        std::vector<double> br;
        if (seg.tail) {
            for (int i = 1; i < 4; ++i) br.push_back(seg.t0 + (seg.t1 - seg.t0) * i / 4.0);
        } else {
            // unit-scale initial panels so features are not skipped
            const std::vector<Feature> none;
            std::vector<Feature> fs;
            for (double x : seg.features) fs.push_back({x, 0.25});
            br = graded_breaks(seg.t0, seg.t1, fs, 1.5, 4.0);
        }
        auto st = split_starts(static_cast<int>(s), seg.t0, seg.t1, br);
        starts.insert(starts.end(), st.begin(), st.end());
    }
    QuadratureResult res = adaptive(g, starts, opt);
    if (has_tails) {
        // report the mapped tail contribution
        QuadOptions o2 = opt;
        o2.tol = std::max(opt.tol, 1e-6);
        double tail = 0;
        for (size_t s = 0; s < c.segments.size(); ++s) {
            if (!c.segments[s].tail) continue;
            const Segment& seg = c.segments[s];
            auto r = adaptive(g, split_starts(static_cast<int>(s), seg.t0, seg.t1, {}), o2);
            tail += std::abs(r.value);
        }
        res.tail_estimate = tail;
    } else if (!c.segments.empty() && c.truncation > 0) {
        // |f| ~ |z|^-p beyond the endpoints
        const Segment& s0 = c.segments.front();
        const Segment& s1 = c.segments.back();
        const ContourPoint p0 = c.at(0, s0.t0);
        const ContourPoint p1 = c.at(static_cast<int>(c.segments.size()) - 1, s1.t1);
        const double p = std::max(opt.decay_p, 1.0 + 1e-3);
        double t = 0;
        for (const auto& q : {p0, p1}) {
            const cplx v = f(q);
            t += std::abs(v) * std::abs(q.z) / (p - 1.0);
        }
        res.tail_estimate = t;
        res.evaluations += 2;
    }
    return res;
}

QuadratureResult integrate_contour(const ContourFn& f, const Contour& c, double tol, double decay_p)
{
    QuadOptions o;
    o.tol = tol;
    o.decay_p = decay_p;
    return integrate_contour(f, c, o);
}

QuadratureResult integrate_tensor2(const ContourFn2& f, const Contour& c1, const Contour& c2, double tol,
                                   bool parallel)
{
    long inner_evals = 0;
    double inner_err = 0;
    bool inner_ok = true;
    auto outer = [&](const ContourPoint& p2) {
        QuadOptions o;
        o.tol = 0.1 * tol;
        auto r = integrate_contour([&](const ContourPoint& p1) { return f(p1, p2); }, c1, o);
        double w = std::abs(p2.dz);
#pragma omp critical
        {
            inner_evals += r.evaluations;
            inner_err = std::max(inner_err, r.error_estimate * w);
            inner_ok = inner_ok && r.converged;
        }
        return r.value;
    };
    QuadOptions o;
    o.tol = tol;
    o.parallel = parallel;
    QuadratureResult r = integrate_contour(outer, c2, o);
    r.evaluations += inner_evals;
    r.error_estimate += inner_err;
    r.converged = r.converged && inner_ok;
    return r;
}

std::vector<double> graded_breaks(double a, double b, const std::vector<Feature>& features, double growth,
                                  double max_width)
{
    auto width = [&](double x) {
        double w = max_width;
        for (const auto& f : features) w = std::min(w, f.width + (growth - 1.0) * std::abs(x - f.at));
        return std::max(w, 1e-14 * (1.0 + std::abs(x)));
    };
    std::vector<double> pts;
    for (const auto& f : features)
        if (f.at > a && f.at < b) pts.push_back(f.at);
    pts.push_back(a);
    pts.push_back(b);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    std::vector<double> out;
    // march through each gap, then stretch so the last panel ends on the
    // mandatory point
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
        const double lo = pts[i], hi = pts[i + 1];
        std::vector<double> x{lo};
        while (x.back() < hi) x.push_back(x.back() + width(x.back()));
        const double over = x.back();
        if (x.size() > 2 && over - hi > 0.5 * (over - x[x.size() - 2])) {
            x.pop_back();  // drop a sliver, the rest stretches a little
        }
        const double scale = (hi - lo) / (x.back() - lo);
        for (size_t k = 0; k + 1 < x.size(); ++k) out.push_back(lo + (x[k] - lo) * scale);
    }
    out.push_back(b);
    return out;
}

NodeSet make_nodes_from_breaks(const Contour& c, const std::vector<std::vector<double>>& breaks)
{
    const GK21& r = GK21::get();
    NodeSet n;
    for (size_t s = 0; s < c.segments.size(); ++s) {
        const auto& br = breaks.at(s);
        for (size_t i = 0; i + 1 < br.size(); ++i) {
            const double a = br[i], b = br[i + 1];
            const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
            n.panels.push_back({static_cast<int>(s), a, b, static_cast<int>(n.pts.size())});
            for (int q = 0; q < 21; ++q) {
                const ContourPoint p = c.at(static_cast<int>(s), mid + half * r.x[q]);
                n.pts.push_back(p);
                n.wk.push_back(half * r.wk[q] * p.dz);
                n.wg.push_back(half * r.wg[q] * p.dz);
            }
        }
    }
    return n;
}

NodeSet make_nodes(const Contour& c, const PanelSpec& spec)
{
    std::vector<std::vector<double>> breaks;
    for (const auto& seg : c.segments) {
        if (seg.tail) {
            std::vector<double> br;
            for (int i = 0; i <= spec.tail_panels; ++i)
                br.push_back(seg.t0 + (seg.t1 - seg.t0) * i / spec.tail_panels);
            breaks.push_back(br);
            continue;
        }
        std::vector<Feature> fs = spec.extra;
        for (double x : seg.features) fs.push_back({x, spec.feature_width});
        breaks.push_back(graded_breaks(seg.t0, seg.t1, fs, spec.growth, spec.max_width));
    }
    return make_nodes_from_breaks(c, breaks);
}

std::vector<std::vector<double>> node_breaks(const NodeSet& n, size_t segments)
{
    std::vector<std::vector<double>> br(segments);
    for (const auto& p : n.panels) {
        auto& v = br[p.segment];
        if (v.empty()) v.push_back(p.a);
        v.push_back(p.b);
    }
    return br;
}

FixedSum fixed_sum(const NodeSet& n, const std::vector<cplx>& f)
{
    cplx k = 0.0, g = 0.0;
    double err = 0;
    for (const auto& p : n.panels) {
        cplx pk = 0.0, pg = 0.0;
        for (int q = 0; q < 21; ++q) {
            const size_t i = p.first + q;
            pk += n.wk[i] * f[i];
            pg += n.wg[i] * f[i];
        }
        k += pk;
        g += pg;
        err += std::abs(pk - pg);
    }
    (void)g;
    return {k, err};
}

namespace {

// barycentric weights for the reference nodes
const std::array<double, 21>& bary_weights()
{
    static const std::array<double, 21> w = [] {
        const GK21& r = GK21::get();
        std::array<double, 21> b{};
        for (int i = 0; i < 21; ++i) {
            double p = 1.0;
            for (int j = 0; j < 21; ++j)
                if (j != i) p *= (r.x[i] - r.x[j]);
            b[i] = 1.0 / p;
        }
        double m = 0;
        for (double v : b) m = std::max(m, std::abs(v));
        for (double& v : b) v /= m;
        return b;
    }();
    return w;
}

cplx bary_eval(const double* x, const double* w, const cplx* f, int n, double s)
{
    cplx num = 0.0;
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = s - x[i];
        if (d == 0.0) return f[i];
        const double c = w[i] / d;
        num += c * f[i];
        den += c;
    }
    return num / den;
}

}  // namespace

PanelInterpolant::PanelInterpolant(const NodeSet* nodes, std::vector<cplx> values)
    : nodes_(nodes), values_(std::move(values))
{
    if (!nodes_ || values_.size() != nodes_->size()) throw std::invalid_argument("PanelInterpolant size mismatch");
}

cplx PanelInterpolant::operator()(int segment, double t) const
{
    const auto& ps = nodes_->panels;
    // panels are ordered by segment then parameter
    auto it = std::lower_bound(ps.begin(), ps.end(), std::make_pair(segment, t),
                               [](const Panel& p, const std::pair<int, double>& k) {
                                   if (p.segment != k.first) return p.segment < k.first;
                                   return p.b < k.second;
                               });
    if (it == ps.end() || it->segment != segment) {
        // clamp to the last panel of the segment
        if (it == ps.begin()) throw std::out_of_range("PanelInterpolant: segment not covered");
        --it;
        if (it->segment != segment) throw std::out_of_range("PanelInterpolant: segment not covered");
    }
    const GK21& r = GK21::get();
    const double mid = 0.5 * (it->a + it->b), half = 0.5 * (it->b - it->a);
    const double s = (t - mid) / half;
    return bary_eval(r.x.data(), bary_weights().data(), values_.data() + it->first, 21, s);
}

double PanelInterpolant::self_error() const
{
    // interpolate the center node from the other 20 and compare
    const GK21& r = GK21::get();
    std::array<double, 20> x{}, w{};
    for (int i = 0, k = 0; i < 21; ++i) {
        if (i == 10) continue;
        x[k++] = r.x[i];
    }
    for (int i = 0; i < 20; ++i) {
        double p = 1.0;
        for (int j = 0; j < 20; ++j)
            if (j != i) p *= x[i] - x[j];
        w[i] = 1.0 / p;
    }
    double worst = 0;
    for (const auto& p : nodes_->panels) {
        std::array<cplx, 20> f{};
        for (int i = 0, k = 0; i < 21; ++i) {
            if (i == 10) continue;
            f[k++] = values_[p.first + i];
        }
        const cplx v = bary_eval(x.data(), w.data(), f.data(), 20, 0.0);
        worst = std::max(worst, std::abs(v - values_[p.first + 10]));
    }
    return worst;
}

NearestPoint nearest_point(const Contour& c, cplx z)
{
    NearestPoint best;
    for (size_t s = 0; s < c.segments.size(); ++s) {
        const Segment& g = c.segments[s];
        const int n = 2000;
        for (int i = 0; i <= n; ++i) {
            const double t = g.t0 + (g.t1 - g.t0) * i / n;
            const cplx w = g.z(t);
            if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) continue;
            const double d = std::abs(w - z);
            if (d < best.dist) best = {d, static_cast<int>(s), t};
        }
        // golden refinement around the best sample of this segment
    }
    const Segment& g = c.segments[best.seg];
    const double h = (g.t1 - g.t0) / 2000;
    double lo = std::max(g.t0, best.t - h), hi = std::min(g.t1, best.t + h);
    for (int it = 0; it < 80; ++it) {
        const double m1 = lo + (hi - lo) * 0.381966, m2 = hi - (hi - lo) * 0.381966;
        if (std::abs(g.z(m1) - z) < std::abs(g.z(m2) - z)) hi = m2;
        else lo = m1;
    }
    best.t = 0.5 * (lo + hi);
    best.dist = std::abs(g.z(best.t) - z);
    return best;
}

void add_near_breaks(std::vector<std::vector<double>>& breaks, const Contour& c, const NearestPoint& np)
{
    const Segment& seg = c.segments.at(np.seg);
    const double speed = std::max(std::abs(seg.dz(np.t)), 1e-300);
    const double w = std::max(np.dist, 1e-14) / speed;
    auto& br = breaks.at(np.seg);
    for (double m : {-256.0, -32.0, -4.0, -1.0, 0.0, 1.0, 4.0, 32.0, 256.0}) {
        const double t = np.t + m * w;
        if (t > seg.t0 && t < seg.t1) br.push_back(t);
    }
}

QuadratureResult integrate_contour_from(const ContourFn& f, const Contour& c,
                                        const std::vector<std::vector<double>>& breaks, const QuadOptions& opt)
{
    SegFn g = [&](int seg, double t) {
        const ContourPoint p = c.at(seg, t);
        if (p.dz == 0.0) return cplx(0.0);
        return f(p) * p.dz;
    };
    std::vector<Start> starts;
    for (size_t s = 0; s < c.segments.size(); ++s) {
        const Segment& seg = c.segments[s];
        std::vector<double> br = s < breaks.size() ? breaks[s] : std::vector<double>{};
        auto st = split_starts(static_cast<int>(s), seg.t0, seg.t1, br);
        starts.insert(starts.end(), st.begin(), st.end());
    }
    return adaptive(g, starts, opt);
}

cplx cauchy_transform(const ContourFn& f, const Contour& c, cplx z, double tol)
{
    const NearestPoint nr = nearest_point(c, z);
    if (nr.dist < 1e-9 * (1.0 + std::abs(z)))
        throw NumericalError("cauchy_transform: point on the contour needs side information");
    SegFn g = [&](int seg, double t) {
        const ContourPoint p = c.at(seg, t);
        return f(p) / (p.z - z) * p.dz;
    };
    std::vector<Start> starts;
    for (size_t i = 0; i < c.segments.size(); ++i) {
        const Segment& seg = c.segments[i];
        std::vector<double> br;
        if (static_cast<int>(i) == nr.seg) {
            // resolve the near-singular peak from the start
            const double speed = std::max(std::abs(seg.dz(nr.t)), 1e-300);
            const double w = nr.dist / speed;
            for (double m : {-64.0, -8.0, -1.0, 0.0, 1.0, 8.0, 64.0}) br.push_back(nr.t + m * w);
        } else {
            for (int q = 1; q < 8; ++q) br.push_back(seg.t0 + (seg.t1 - seg.t0) * q / 8.0);
        }
        auto st = split_starts(static_cast<int>(i), seg.t0, seg.t1, br);
        starts.insert(starts.end(), st.begin(), st.end());
    }
    QuadOptions o;
    o.tol = tol;
    return adaptive(g, starts, o).value / (2.0 * kPi * kI);
}

cplx cauchy_transform(const ContourFn& f, const Contour& c, const SidedPoint& s, double tol)
{
    for (const auto& g : c.segments)
        if (g.tail) throw NumericalError("cauchy_transform: one-sided limits need a finite contour");
    const ContourPoint p0 = c.at(s.segment, s.t);
    const cplx z0 = p0.z;
    const cplx f0 = f(p0);
    // subtracted integral; the base point is a breakpoint so no node hits it
    SegFn g = [&](int seg, double t) {
        const ContourPoint p = c.at(seg, t);
        return (f(p) - f0) / (p.z - z0) * p.dz;
    };
    std::vector<Start> starts;
    for (size_t i = 0; i < c.segments.size(); ++i) {
        const Segment& seg = c.segments[i];
        std::vector<double> br;
        if (static_cast<int>(i) == s.segment) br.push_back(s.t);
        auto st = split_starts(static_cast<int>(i), seg.t0, seg.t1, br);
        starts.insert(starts.end(), st.begin(), st.end());
    }
    QuadOptions o;
    o.tol = tol;
    const cplx I = adaptive(g, starts, o).value;
    // log(z_end - z0) - log(z_start - z0) with the argument followed along c
    const int n = 400;
    auto unwrap = [](const std::vector<cplx>& v) {
        double total = 0;
        for (size_t i = 1; i < v.size(); ++i) total += std::arg(v[i] / v[i - 1]);
        return total;
    };
    // rebuild ordered lists
    std::vector<cplx> b2, a2;
    {
        // before: uniform samples (ascending) then geometric (approaching)
        std::vector<std::pair<double, cplx>> tb, ta;
        for (size_t i = 0; i < c.segments.size(); ++i) {
            const Segment& seg = c.segments[i];
            const bool here = static_cast<int>(i) == s.segment;
            for (int q = 0; q <= n; ++q) {
                const double t = seg.t0 + (seg.t1 - seg.t0) * q / n;
                const double key = static_cast<double>(i) * 1e6 + (t - seg.t0) / (seg.t1 - seg.t0);
                if (static_cast<int>(i) < s.segment || (here && t < s.t)) tb.push_back({key, seg.z(t) - z0});
                if (static_cast<int>(i) > s.segment || (here && t > s.t)) ta.push_back({key, seg.z(t) - z0});
            }
            if (here) {
                for (int m = 1; m <= 24; ++m) {
                    const double hb = (s.t - seg.t0) * std::ldexp(1.0, -m);
                    const double ha = (seg.t1 - s.t) * std::ldexp(1.0, -m);
                    const double kb = static_cast<double>(i) * 1e6 + (s.t - hb - seg.t0) / (seg.t1 - seg.t0);
                    const double ka = static_cast<double>(i) * 1e6 + (s.t + ha - seg.t0) / (seg.t1 - seg.t0);
                    if (hb > 0) tb.push_back({kb, seg.z(s.t - hb) - z0});
                    if (ha > 0) ta.push_back({ka, seg.z(s.t + ha) - z0});
                }
            }
        }
        std::sort(tb.begin(), tb.end(), [](auto& x, auto& y) { return x.first < y.first; });
        std::sort(ta.begin(), ta.end(), [](auto& x, auto& y) { return x.first < y.first; });
        // close both lists with the exact tangent directions at the base point
        const cplx tan = c.segments[s.segment].dz(s.t);
        for (auto& q : tb) b2.push_back(q.second);
        b2.push_back(-tan);
        a2.push_back(tan);
        for (auto& q : ta) a2.push_back(q.second);
    }
    double dtheta = 0;
    double lnmod = 0;
    if (!b2.empty()) {
        dtheta += unwrap(b2);
        lnmod -= std::log(std::abs(b2.front()));  // front is a contour sample unless the base is the start
    }
    if (!a2.empty()) {
        dtheta += unwrap(a2);
        lnmod += std::log(std::abs(a2.back()));
    }
    // passing the base point: +pi seen from the left, -pi from the right
    dtheta += s.side == Side::Left ? kPi : -kPi;
    const cplx lambda(lnmod, dtheta);
    return (I + f0 * lambda) / (2.0 * kPi * kI);
}

ResidueResult residue_circle(const std::function<cplx(cplx)>& f, cplx z0, double radius, int M)
{
    auto trap = [&](int m) {
        cplx s = 0.0;
        for (int q = 0; q < m; ++q) {
            const cplx e = std::polar(1.0, 2.0 * kPi * q / m);
            s += f(z0 + radius * e) * e;
        }
        return s * radius / static_cast<double>(m);
    };
    const cplx full = trap(M);
    const cplx half = trap(M / 2);
    return {full, std::abs(full - half)};
}

cplx residue_at_simple_pole(const std::function<cplx(cplx)>& f, cplx z0, double radius, int M)
{
    const auto r = residue_circle(f, z0, radius, M);
    if (!(r.error_estimate <= 1e-6 * std::max(1.0, std::abs(r.value))))
        throw NumericalError("residue_at_simple_pole: circle too close to another singularity");
    return r.value;
}

}  // namespace pwedge

namespace pwedge {

namespace {

// Lagrange basis values at s for nodes x with barycentric weights w
void bary_basis(const double* x, const double* w, int n, double s, double* out)
{
    double den = 0.0;
    for (int i = 0; i < n; ++i) {
        const double d = s - x[i];
        if (d == 0.0) {
            for (int j = 0; j < n; ++j) out[j] = j == i ? 1.0 : 0.0;
            return;
        }
        out[i] = w[i] / d;
        den += out[i];
    }
    for (int i = 0; i < n; ++i) out[i] /= den;
}

struct GaussSubset {
    std::array<int, 10> idx{};
    std::array<double, 10> x{}, w{};
};

const GaussSubset& gauss_subset()
{
    static const GaussSubset g = [] {
        const GK21& r = GK21::get();
        GaussSubset s;
        for (int i = 0, k = 0; i < 21; ++i)
            if (r.wg[i] != 0.0) {
                s.idx[k] = i;
                s.x[k++] = r.x[i];
            }
        for (int i = 0; i < 10; ++i) {
            double p = 1.0;
            for (int j = 0; j < 10; ++j)
                if (j != i) p *= s.x[i] - s.x[j];
            s.w[i] = 1.0 / p;
        }
        return s;
    }();
    return g;
}

}  // namespace

ProductRule product_rule(const Contour& c, const NodeSet& n, const ContourFn& w, const std::vector<cplx>& near)
{
    const GK21& r = GK21::get();
    const GaussSubset& gs = gauss_subset();
    ProductRule pr;
    pr.k.assign(n.size(), 0.0);
    pr.g.assign(n.size(), 0.0);
    for (const Panel& pan : n.panels) {
        const Segment& seg = c.segments.at(pan.segment);
        const cplx za = seg.z(pan.a), zb = seg.z(pan.b);
        double chord = std::abs(zb - za);
        if (!std::isfinite(chord)) chord = 1e300;
        std::vector<double> cuts{pan.a, pan.b};
        for (const cplx& p : near) {
            double dmin = 1e300;
            int qmin = 0;
            for (int q = 0; q < 21; ++q) {
                const double d = std::abs(n.pts[pan.first + q].z - p);
                if (d < dmin) dmin = d, qmin = q;
            }
            if (!(dmin < chord)) continue;
            // golden search for the closest parameter around the nearest node
            double lo = pan.a, hi = pan.b;
            const double tq = n.pts[pan.first + qmin].t;
            const double h = 0.25 * (pan.b - pan.a);
            lo = std::max(pan.a, tq - h), hi = std::min(pan.b, tq + h);
            for (int it = 0; it < 60; ++it) {
                const double m1 = lo + (hi - lo) * 0.381966, m2 = hi - (hi - lo) * 0.381966;
                if (std::abs(seg.z(m1) - p) < std::abs(seg.z(m2) - p)) hi = m2;
                else lo = m1;
            }
            const double ts = 0.5 * (lo + hi);
            const double dist = std::abs(seg.z(ts) - p);
            const double wd = std::max(dist, 1e-14 * chord) / std::max(std::abs(seg.dz(ts)), 1e-300);
            if (ts > pan.a && ts < pan.b) cuts.push_back(ts);
            for (double m = 1; m <= 4096; m *= 4)
                for (double sgn : {-1.0, 1.0}) {
                    const double t = ts + sgn * m * wd;
                    if (t > pan.a && t < pan.b) cuts.push_back(t);
                }
        }
        if (cuts.size() == 2) {
            for (int q = 0; q < 21; ++q) {
                const size_t i = pan.first + q;
                const cplx wv = w(n.pts[i]);
                pr.k[i] = n.wk[i] * wv;
                pr.g[i] = n.wg[i] * wv;
            }
            continue;
        }
        std::sort(cuts.begin(), cuts.end());
        const double mid = 0.5 * (pan.a + pan.b), half = 0.5 * (pan.b - pan.a);
        double lk[21], lg[10];
        for (size_t s = 0; s + 1 < cuts.size(); ++s) {
            const double a = cuts[s], b = cuts[s + 1];
            if (!(b > a)) continue;
            const double sm = 0.5 * (a + b), sh = 0.5 * (b - a);
            for (int q = 0; q < 21; ++q) {
                const double t = sm + sh * r.x[q];
                const ContourPoint p = c.at(pan.segment, t);
                const cplx val = r.wk[q] * sh * p.dz * w(p);
                const double loc = (t - mid) / half;
                bary_basis(r.x.data(), bary_weights().data(), 21, loc, lk);
                bary_basis(gs.x.data(), gs.w.data(), 10, loc, lg);
                for (int j = 0; j < 21; ++j) pr.k[pan.first + j] += val * lk[j];
                for (int j = 0; j < 10; ++j) pr.g[pan.first + gs.idx[j]] += val * lg[j];
            }
        }
    }
    return pr;
}

}  // namespace pwedge
