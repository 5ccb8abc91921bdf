// Regions, branch curves h(+/-)_j, the side-tracking contours P_1, P_2 and
// shifted integration lines.
#pragma once

#include "pwedge/kernel.hpp"

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace pwedge {

// h(+)_j = +kappa_j(x), h(-)_j = -kappa_j(x), x real.
cplx h_curve(int j, int sign, double x, const ProblemConfig& cfg);

double tau_geo(const ProblemConfig& cfg);

// Approximate distance from z to the curve h(sign)_j (first order in the
// distance, exact on the curve).
double curve_distance(int j, int sign, cplx z, const ProblemConfig& cfg);

enum class Membership { Outside, Inside, Boundary };

struct Region {
    enum class Kind { All, UHP, LHP, Hplus, Hminus, Strip };
    Kind kind = Kind::All;
    double x0 = 0;  // offset for UHP/LHP/H+-, half width for Strip

    static Region uhp(double x0 = 0) { return {Kind::UHP, x0}; }
    static Region lhp(double x0 = 0) { return {Kind::LHP, x0}; }
    static Region hplus(double x0 = 0) { return {Kind::Hplus, x0}; }
    static Region hminus(double x0 = 0) { return {Kind::Hminus, x0}; }
    static Region strip(double eps) { return {Kind::Strip, eps}; }
    std::string name() const;
};

struct RegionPair {
    Region first, second;
    std::string name() const { return first.name() + " x " + second.name(); }
};

Membership region_contains(const Region& r, cplx z, const ProblemConfig& cfg);
Membership region_contains(const RegionPair& r, const SpectralPoint& p, const ProblemConfig& cfg);

enum class Side { None, Left, Right };

struct ContourPoint {
    double t = 0;
    cplx z, dz;    // position and dz/dt
    cplx dir;      // unit vector pointing to the side the point belongs to (0: none)
    int segment = 0;
    Side side = Side::None;
};

struct Segment {
    std::function<cplx(double)> z;
    std::function<cplx(double)> dz;
    double t0 = 0, t1 = 1;
    Side side = Side::None;
    int id = 0;
    bool tail = false;  // parameter u maps an infinite piece onto a finite one
    std::vector<double> features;  // parameter values needing local refinement
};

struct Contour {
    std::string name;
    std::vector<Segment> segments;
    std::vector<cplx> branch_points;
    double truncation = 0;

    ContourPoint at(int seg, double t) const;
    // CSV polyline: header "t,re_z,im_z,side,segment_id"
    void write_csv(std::ostream& os, int samples_per_segment = 200) const;
};

// P_j: up the left side of h(-)_j from -i infinity to -k_j, then down the
// right side. Segments: left tail, left body, right body, right tail. The
// left tail and right tail use x = -T/u and x = T/(1-u).
Contour build_P(int j, const ProblemConfig& cfg, double T = 0);

// R + i c, oriented left to right; tails mapped when with_tails is set.
Contour shifted_line(double c, double T, bool with_tails = false);

double default_truncation(const ProblemConfig& cfg);

const char* side_name(Side s);

}  // namespace pwedge
