// Real traces of the singularities, the additive crossing check on the
// branch curves h(-)_j, the Q1 annihilation integral over P x P and the
// recovery of the four edge functions from F1(a2) + F2(a1) + a1 F3(a2) + a2 F4(a1).
#pragma once

#include "pwedge/continuation.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace pwedge {

enum class TraceKind { PolarLine, BranchLine, CircleArc };
enum class Owner { Psi, Phi34 };
// which wavenumber enters the extra line -sqrt(k^2 - a2^2) when theta0 is in (pi/2, pi)
enum class ExtendedK { K1, K2 };

const char* trace_kind_name(TraceKind k);
const char* owner_name(Owner o);

struct Trace {
    std::string id;
    TraceKind kind = TraceKind::PolarLine;
    Owner owner = Owner::Psi;
    std::vector<double> t;
    std::vector<std::array<double, 2>> pts;  // (Re alpha1, Re alpha2)
    int axis = 0;         // lines: the fixed coordinate (1 or 2); 0 for arcs
    double level = 0;     // lines: the constant; arcs: the radius
    double theta_lo = 0, theta_hi = 0;  // arcs: polar angle range
};

struct TraceSet {
    Owner owner = Owner::Psi;
    std::vector<Trace> traces;
    std::vector<std::string> notes;
    size_t count(TraceKind k) const;
    size_t count(TraceKind k, int axis) const;
};

struct TraceOptions {
    ExtendedK extended_k = ExtendedK::K2;
    double extent = 0;  // half width of the plotted window, 0 selects 2.5 Re k2
    int samples = 201;
};

// Traces in the limit Im k -> 0 (real parts of k and a only).
TraceSet compute_traces(Owner owner, const ProblemConfig& cfg, const TraceOptions& o = {});
// curve_id,kind,owner,t,a1,a2
void write_traces_csv(const std::vector<TraceSet>& sets, std::ostream& os);

// Zeros of K+o(alpha1, alpha2) in alpha1 for real alpha2 sweeping [-Re k2, Re k2],
// with Re k in place of k. All zeros should satisfy alpha1 <= 0 and lie on the
// circle of radius Re k2; those with alpha2 <= 0 should lie on the emitted arc.
struct ArcRootCheck {
    std::vector<double> alpha2;
    std::vector<cplx> root;
    double max_radius_error = 0;
    double max_arc_distance = 0;
    double max_imag = 0;
    bool all_left = true;
};
ArcRootCheck arc_roots(const ProblemConfig& cfg, const Trace& arc, int n = 41);
// distance from (x, y) to a circle-arc trace
double arc_distance(const Trace& arc, double x, double y);

// Additive crossing at a base pair on h(-)_{j1} x h(-)_{j2}: s_j > 0 is the real
// parameter, the base point is -kappa_j(s_j).
struct CornerValue {
    cplx value;
    double extrapolation_error = 0;
    bool ok = true;
    std::string note;
};

struct CrossingSample {
    int j1 = 1, j2 = 1;
    double s1 = 0, s2 = 0;
    SpectralPoint base;
    // Phi_3/4 at (r,r), (l,l), (l,r), (r,l)
    std::array<CornerValue, 4> corners;
    cplx phi_ac;
    double max_corner = 0;
    double error = 0;  // sum of the corner extrapolation errors
};

// Signed corner sum; the mixed-curve case carries the opposite sign.
cplx phi_ac_sum(const std::array<cplx, 4>& rr_ll_lr_rl, bool same_curve);

CrossingSample phi_ac(int j1, double s1, int j2, double s2, const SpectralData& d,
                      const std::vector<double>& etas = {1e-2, 1e-3, 1e-4});
void write_crossing_json(const std::vector<CrossingSample>& v, double tol, std::ostream& os);

// Double P x P integral of Phi_3/4 e^{-i alpha.x}. The inner P is replaced by
// a contour Gamma above the branch curves and the pole a1; the a1 residue term
// has no branch cut in alpha2 and integrates to zero over P.
struct Q1Options {
    double depth = 40;      // Gamma runs down to Im = -depth
    double crossing = 0;    // Im of the horizontal part, 0 selects 0.45 Im(-k_min)
    double half_width = 0;  // Re of the vertical parts, 0 selects 2 Re k2
    double body_only = 0;   // > 0: drop nodes with |Im| above this (negative control for x outside Q1)
    bool parallel = true;
};
struct Q1Result {
    cplx value;
    double error = 0;  // Kronrod minus Gauss on both contours plus propagated data error
    double magnitude = 0;    // sum of |integrand| |weights|, for scale
    double inner_scale = 0;  // sum over P of |weight| |inner Gamma integral|; the cancellation is in the outer sum
    size_t inner_nodes = 0, outer_nodes = 0;
};
Q1Result q1_annihilation(const SpectralData& d, double x1, double x2, const Q1Options& o = {});

// Recovery of F1..F4 on a table of points from samples of
// G(a1, a2) = F1(a2) + F2(a1) + a1 F3(a2) + a2 F4(a1), assuming each F_j -> 0 at infinity.
using Sampler2 = std::function<cplx(cplx, cplx)>;
struct DecomposeOptions {
    double tail_radius = 1e3;  // |alpha| where limits are fitted
    int tail_samples = 12;
    int inverse_terms = 4;     // 1/alpha^m terms in the tail fit
};
struct EdgeDecomposition {
    std::vector<cplx> points;
    std::vector<cplx> F1, F2, F3, F4;
    double fit_residual = 0;  // worst relative residual of the tail fits
};
EdgeDecomposition decompose_edge_functions(const Sampler2& G, const std::vector<cplx>& points,
                                           const DecomposeOptions& o = {});

}  // namespace pwedge
