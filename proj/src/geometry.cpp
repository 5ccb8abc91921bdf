#include "pwedge/geometry.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace pwedge {

cplx h_curve(int j, int sign, double x, const ProblemConfig& cfg)
{
    const cplx q = kappa(j, cplx(x, 0.0), cfg);
    return sign > 0 ? q : -q;
}

double tau_geo(const ProblemConfig& cfg) { return 1e-6 * cfg.kmax(); }

double default_truncation(const ProblemConfig& cfg) { return 40.0 * cfg.kmax(); }

double curve_distance(int j, int sign, cplx z, const ProblemConfig& cfg)
{
    // h(+) and h(-) together are the set where k^2 - z^2 is real and >= 0
    if (sign > 0 ? z.imag() < -tau_geo(cfg) : z.imag() > tau_geo(cfg)) {
        // wrong half plane: the tip is the nearest candidate
        const cplx tip = sign > 0 ? cfg.k(j) : -cfg.k(j);
        return std::min(std::abs(z - tip), std::abs(z.imag()) + std::abs(tip.imag()));
    }
    const cplx k = cfg.k(j);
    const cplx w = k * k - z * z;
    const double dw = w.real() >= 0 ? std::abs(w.imag()) : std::abs(w);
    const double scale = 2.0 * std::abs(z);
    if (scale == 0.0) return std::abs(k);
    const double tip = std::abs(z - (sign > 0 ? k : -k));
    return std::min(dw / scale, tip);
}

std::string Region::name() const
{
    char buf[64];
    switch (kind) {
    case Kind::All: return "C";
    case Kind::UHP: std::snprintf(buf, sizeof buf, "UHP(%g)", x0); break;
    case Kind::LHP: std::snprintf(buf, sizeof buf, "LHP(%g)", x0); break;
    case Kind::Hplus: std::snprintf(buf, sizeof buf, "H+(%g)", x0); break;
    case Kind::Hminus: std::snprintf(buf, sizeof buf, "H-(%g)", x0); break;
    case Kind::Strip: std::snprintf(buf, sizeof buf, "S(%g)", x0); break;
    }
    return buf;
}

namespace {

Membership halfplane(double v, double tol)
{
    if (std::abs(v) <= tol) return Membership::Boundary;
    return v > 0 ? Membership::Inside : Membership::Outside;
}

Membership minus_curves(Membership m, int sign, cplx z, const ProblemConfig& cfg)
{
    if (m == Membership::Outside) return m;
    const double tol = tau_geo(cfg);
    for (int j = 1; j <= 2; ++j)
        if (curve_distance(j, sign, z, cfg) <= tol) return Membership::Boundary;
    return m;
}

}  // namespace

Membership region_contains(const Region& r, cplx z, const ProblemConfig& cfg)
{
    const double tol = tau_geo(cfg);
    switch (r.kind) {
    case Region::Kind::All: return Membership::Inside;
    case Region::Kind::UHP: return halfplane(z.imag() - r.x0, tol);
    case Region::Kind::LHP: return halfplane(r.x0 - z.imag(), tol);
    case Region::Kind::Hplus: return minus_curves(halfplane(z.imag() - r.x0, tol), +1, z, cfg);
    case Region::Kind::Hminus: return minus_curves(halfplane(r.x0 - z.imag(), tol), -1, z, cfg);
    case Region::Kind::Strip: return halfplane(r.x0 - std::abs(z.imag()), tol);
    }
    return Membership::Outside;
}

Membership region_contains(const RegionPair& r, const SpectralPoint& p, const ProblemConfig& cfg)
{
    const Membership a = region_contains(r.first, p.alpha1, cfg);
    const Membership b = region_contains(r.second, p.alpha2, cfg);
    if (a == Membership::Outside || b == Membership::Outside) return Membership::Outside;
    if (a == Membership::Boundary || b == Membership::Boundary) return Membership::Boundary;
    return Membership::Inside;
}

const char* side_name(Side s)
{
    switch (s) {
    case Side::Left: return "left";
    case Side::Right: return "right";
    default: return "none";
    }
}

ContourPoint Contour::at(int seg, double t) const
{
    const Segment& s = segments.at(seg);
    ContourPoint p;
    p.t = t;
    p.z = s.z(t);
    p.dz = s.dz(t);
    p.segment = seg;
    p.side = s.side;
    if (s.side != Side::None && p.dz != 0.0) {
        // left of the direction of travel
        p.dir = kI * p.dz / std::abs(p.dz);
    }
    return p;
}

void Contour::write_csv(std::ostream& os, int samples_per_segment) const
{
    os << "t,re_z,im_z,side,segment_id\n";
    char buf[160];
    for (size_t s = 0; s < segments.size(); ++s) {
        const Segment& g = segments[s];
        double a = g.t0, b = g.t1;
        if (g.tail) {  // skip the point at infinity
            const double h = (b - a) * 1e-3;
            if (std::isinf(std::abs(g.z(a)))) a += h;
            if (std::isinf(std::abs(g.z(b)))) b -= h;
        }
        for (int i = 0; i <= samples_per_segment; ++i) {
            const double t = a + (b - a) * i / samples_per_segment;
            const cplx z = g.z(t);
            if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) continue;
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%s,%d\n", t, z.real(), z.imag(), side_name(g.side), g.id);
            os << buf;
        }
    }
}

Contour build_P(int j, const ProblemConfig& cfg, double T)
{
    if (T <= 0) T = default_truncation(cfg);
    const cplx k = cfg.k(j);
    if (!(T > std::abs(k))) throw ConfigError("build_P: truncation must exceed |k_j|");
    auto zx = [k](double x) { return -kappa_k(k, cplx(x, 0.0)); };
    auto dzx = [k](double x) {
        const cplx q = kappa_k(k, cplx(x, 0.0));
        return q == 0.0 ? cplx(0.0) : cplx(x, 0.0) / q;
    };
    // features: branch tip and the near-branch points of the other medium
    std::vector<double> feat{0.0};
    const double rk = k.real();
    feat.push_back(-rk);
    feat.push_back(rk);
    const cplx other = cfg.k(3 - j);
    const cplx c = other * other - k * k;
    if (c != 0.0) {
        const double r = std::abs(std::sqrt(c).real());
        if (r > 0) {
            feat.push_back(-r);
            feat.push_back(r);
        }
    }
    Contour P;
    P.name = j == 1 ? "P1" : "P2";
    P.truncation = T;
    P.branch_points = {-k};

    Segment lt;
    lt.id = 0;
    lt.side = Side::Left;
    lt.tail = true;
    lt.t0 = 0;
    lt.t1 = 1;
    lt.z = [zx, T](double u) { return zx(-T / u); };
    lt.dz = [dzx, T](double u) { return dzx(-T / u) * (T / (u * u)); };

    Segment lb;
    lb.id = 1;
    lb.side = Side::Left;
    lb.t0 = -T;
    lb.t1 = 0;
    lb.z = zx;
    lb.dz = dzx;
    for (double f : feat)
        if (f < 0 && f > -T) lb.features.push_back(f);
    lb.features.push_back(0.0);

    Segment rb = lb;
    rb.id = 2;
    rb.side = Side::Right;
    rb.t0 = 0;
    rb.t1 = T;
    rb.features.clear();
    rb.features.push_back(0.0);
    for (double f : feat)
        if (f > 0 && f < T) rb.features.push_back(f);

    Segment rt;
    rt.id = 3;
    rt.side = Side::Right;
    rt.tail = true;
    rt.t0 = 0;
    rt.t1 = 1;
    rt.z = [zx, T](double u) { return zx(T / (1 - u)); };
    rt.dz = [dzx, T](double u) { return dzx(T / (1 - u)) * (T / ((1 - u) * (1 - u))); };

    P.segments = {lt, lb, rb, rt};
    return P;
}

Contour shifted_line(double c, double T, bool with_tails)
{
    Contour L;
    L.name = "line";
    L.truncation = T;
    const cplx ic(0.0, c);
    if (with_tails) {
        Segment lt;
        lt.id = 0;
        lt.tail = true;
        lt.t0 = 0;
        lt.t1 = 1;
        lt.z = [T, ic](double u) { return cplx(-T / u, 0.0) + ic; };
        lt.dz = [T](double u) { return cplx(T / (u * u), 0.0); };
        L.segments.push_back(lt);
    }
    Segment b;
    b.id = with_tails ? 1 : 0;
    b.t0 = -T;
    b.t1 = T;
    b.z = [ic](double x) { return cplx(x, 0.0) + ic; };
    b.dz = [](double) { return cplx(1.0, 0.0); };
    L.segments.push_back(b);
    if (with_tails) {
        Segment rt;
        rt.id = 2;
        rt.tail = true;
        rt.t0 = 0;
        rt.t1 = 1;
        rt.z = [T, ic](double u) { return cplx(T / (1 - u), 0.0) + ic; };
        rt.dz = [T](double u) { return cplx(T / ((1 - u) * (1 - u)), 0.0); };
        L.segments.push_back(rt);
    }
    return L;
}

}  // namespace pwedge
