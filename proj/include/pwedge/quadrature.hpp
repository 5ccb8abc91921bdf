// Adaptive Gauss-Kronrod contour integration, fixed panel rules with
// barycentric interpolation, tensor-product integration, Cauchy transforms
// with one-sided limits, and residues by the trapezoidal rule on circles.
#pragma once

#include "pwedge/geometry.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace pwedge {

struct QuadratureResult {
    cplx value;
    double error_estimate = 0;
    double tail_estimate = 0;
    long evaluations = 0;
    bool converged = true;
    int max_depth = 0;
    std::vector<long> depth_histogram;  // panels per subdivision depth

    std::string to_json() const;
};

struct QuadOptions {
    double tol = 1e-10;        // relative to max(abs_floor, |value|)
    double abs_floor = 1.0;
    int max_depth = 30;
    long max_evals = 4000000;
    double decay_p = 2.0;      // tail model |f| ~ |z|^-p
    bool parallel = false;     // evaluate the nodes of a panel concurrently
};

using ContourFn = std::function<cplx(const ContourPoint&)>;
using RealFn = std::function<cplx(double)>;

// 21-point Kronrod rule with embedded 10-point Gauss rule on [-1, 1].
struct GK21 {
    std::array<double, 21> x, wk, wg;
    static const GK21& get();
};

QuadratureResult integrate_interval(const RealFn& f, double a, double b, const QuadOptions& opt,
                                    const std::vector<double>& breaks = {});
QuadratureResult integrate_contour(const ContourFn& f, const Contour& c, const QuadOptions& opt);
QuadratureResult integrate_contour(const ContourFn& f, const Contour& c, double tol, double decay_p = 2.0);

using ContourFn2 = std::function<cplx(const ContourPoint&, const ContourPoint&)>;
// Iterated: the inner integral over c1 is cached per outer node of c2.
QuadratureResult integrate_tensor2(const ContourFn2& f, const Contour& c1, const Contour& c2, double tol,
                                   bool parallel = false);

// Graded breakpoints on [a, b]: panel width near feature f_i is w_i and grows
// linearly with slope (growth - 1) away from it, capped at max_width.
struct Feature {
    double at;
    double width;
};
std::vector<double> graded_breaks(double a, double b, const std::vector<Feature>& features, double growth,
                                  double max_width);

struct Panel {
    int segment;
    double a, b;
    int first;  // index of the first node
};

// Fixed composite GK21 rule on a contour. wk/wg include dz/dt.
struct NodeSet {
    std::vector<ContourPoint> pts;
    std::vector<cplx> wk, wg;
    std::vector<Panel> panels;
    size_t size() const { return pts.size(); }
};

struct PanelSpec {
    double feature_width = 0.05;  // panel width at features
    double growth = 1.3;
    double max_width = 2.0;
    int tail_panels = 4;
    std::vector<Feature> extra;   // added to every non-tail segment
};

NodeSet make_nodes(const Contour& c, const PanelSpec& spec);
NodeSet make_nodes_from_breaks(const Contour& c, const std::vector<std::vector<double>>& breaks);
std::vector<std::vector<double>> node_breaks(const NodeSet& n, size_t segments);

// Barycentric interpolation of nodal values on the panel containing (seg, t).
class PanelInterpolant {
public:
    PanelInterpolant() = default;
    PanelInterpolant(const NodeSet* nodes, std::vector<cplx> values);
    cplx operator()(int segment, double t) const;
    const std::vector<cplx>& values() const { return values_; }
    // max deviation between the panel interpolant and the values on the
    // 10-point Gauss subset rebuilt from the remaining nodes
    double self_error() const;

private:
    const NodeSet* nodes_ = nullptr;
    std::vector<cplx> values_;
};

struct FixedSum {
    cplx value;
    double error_estimate;
};
// Composite sums with nodal integrand values (already excluding weights).
FixedSum fixed_sum(const NodeSet& n, const std::vector<cplx>& fvals);

struct NearestPoint {
    double dist = 1e300;
    int seg = 0;
    double t = 0;
};
// Sampling plus golden-section refinement; tail segments are sampled in u.
NearestPoint nearest_point(const Contour& c, cplx z);
// Breakpoints on a geometric scale around a near-singular contour point.
void add_near_breaks(std::vector<std::vector<double>>& breaks, const Contour& c, const NearestPoint& np);
// Adaptive integration starting from per-segment breakpoints (segment ends
// are implied).
QuadratureResult integrate_contour_from(const ContourFn& f, const Contour& c,
                                        const std::vector<std::vector<double>>& breaks, const QuadOptions& opt);

// Interpolatory weights for int f(z) w(z) dz with f known only at the nodes
// of n and w smooth except near the listed points. k uses the 21-node panel
// interpolant of f, g the 10-node Gauss one; sum (k - g) f is the error model.
struct ProductRule {
    std::vector<cplx> k, g;
};
ProductRule product_rule(const Contour& c, const NodeSet& n, const ContourFn& w, const std::vector<cplx>& near);

struct SidedPoint {
    int segment = 0;
    double t = 0;
    Side side = Side::Left;
};

// (1/2 pi i) int_c f(z')/(z'-z) dz'. Throws when z is within 1e-9 |c| of c.
cplx cauchy_transform(const ContourFn& f, const Contour& c, cplx z, double tol = 1e-11);
// One-sided limit at a contour point; left is the side to the left of travel.
cplx cauchy_transform(const ContourFn& f, const Contour& c, const SidedPoint& s, double tol = 1e-11);

struct ResidueResult {
    cplx value;
    double error_estimate;
};
ResidueResult residue_circle(const std::function<cplx(cplx)>& f, cplx z0, double radius, int M = 64);
// Throws NumericalError when the M and M/2 results disagree (another
// singularity on or near the circle).
cplx residue_at_simple_pole(const std::function<cplx(cplx)>& f, cplx z0, double radius, int M = 64);

}  // namespace pwedge
