// Evaluation of Psi++, Phi = K Psi++ and Phi_3/4 from the slice data g, h by
// dispatching among the single-integral representations (line and P forms)
// and the double-integral forms on the base grid.
#pragma once

#include "pwedge/geometry.hpp"
#include "pwedge/quadrature.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <string>
#include <vector>

namespace pwedge {

enum class Formula { F1, F2, F1Single, F2Single, SecondStep1, SecondStep2, WHDirect };
const char* formula_name(Formula f);

// A contour with a fixed composite rule and exact kappa_1, kappa_2 at its
// nodes (sided on P_j, where kappa_j is the real parameter itself).
struct Slice {
    Contour contour;
    NodeSet nodes;
    std::vector<cplx> kap1, kap2;
    int branch = 0;  // 0 for a line, j for P_j

    size_t size() const { return nodes.size(); }
    void kappas(int segment, double t, const ProblemConfig& cfg, cplx& k1, cplx& k2) const;
};

std::shared_ptr<Slice> make_line_slice(double shift, double T, const PanelSpec& spec, const ProblemConfig& cfg);
std::shared_ptr<Slice> make_p_slice(int j, double T, const PanelSpec& spec, const ProblemConfig& cfg);
// real parameter x on P_j for a (segment, t) pair
double p_parameter(int segment, double t, double T);

struct GridSpec {
    double truncation = 0;  // 0 selects default_truncation
    PanelSpec line{0.1, 1.4, 3.0, 4, {}};
    PanelSpec p{0.1, 1.4, 3.0, 4, {}};
    PanelSpec base{0.1, 1.5, 4.0, 4, {}};
    double base_truncation = 0;  // 0 selects 20 kmax

    // refine all panel widths by the factor s (s = 2 halves the spacing)
    GridSpec refined(double s) const;
    double T(const ProblemConfig& cfg) const;
};

// K Psi++ on a tensor product of two shifted lines, index i1 * n2 + i2.
struct BaseGrid {
    std::shared_ptr<const Slice> line1, line2;
    std::vector<cplx> kpsi;
    std::vector<double> err;  // error estimate per grid point
};

struct Provenance {
    std::string method = "none";
    int iterations = 0;
    bool converged = false;
    double final_update = 0;
};

struct SpectralData {
    ProblemConfig cfg;
    GridSpec grid;
    std::shared_ptr<const Slice> L;               // R - i epsilon
    std::array<std::shared_ptr<const Slice>, 2> P;
    std::vector<cplx> g, h;                       // on L nodes
    std::array<std::vector<cplx>, 2> gP, hP;      // on P_1, P_2 nodes
    std::shared_ptr<const BaseGrid> base;         // (R - i b0) x (R + i b0)
    std::shared_ptr<const BaseGrid> base_mirror;  // (R + i b0) x (R - i b0)
    double interp_error = 0;   // barycentric self-check, max over slices
    double closure_error = 0;  // Kronrod minus Gauss closure residual, relative
    Provenance provenance;

    PanelInterpolant gi, hi;
    std::array<PanelInterpolant, 2> gPi, hPi;

    static SpectralData geometry(const ProblemConfig& cfg, const GridSpec& grid);
    // rebuild the interpolants and the interpolation error after the values change
    void refresh();
    bool has_P() const { return !gP[0].empty(); }
};

struct EvalOptions {
    double tol = 1e-10;
    bool cross_check = false;  // evaluate a second formula where both apply
};

struct ContinuationResult {
    cplx value;
    Formula formula_used = Formula::WHDirect;
    RegionPair region;
    QuadratureResult quadrature;
    double clearance = 0;
    bool adaptive = false;         // fixed rule was not accurate enough
    double cross_check_diff = -1;  // |difference| to the second formula, -1 if none
    std::string note;
};

// Distance-like margin of a single-integral formula at p (negative: invalid).
double formula_clearance(Formula f, const SpectralPoint& p, const ProblemConfig& cfg);

ContinuationResult psi_pp(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o = {});
ContinuationResult phi(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o = {});
ContinuationResult phi_34(const SpectralPoint& p, const SpectralData& d, const EvalOptions& o = {});

// Forced formula (F1Single, F2Single, SecondStep1, SecondStep2). want_phi
// selects Phi instead of Psi++.
ContinuationResult evaluate_with(Formula f, const SpectralPoint& p, const SpectralData& d, bool want_phi,
                                 const EvalOptions& o = {});
// Same with kappa_j(alpha_1), kappa_j(alpha_2) supplied; used on the P slices
// where the sided values are known exactly and recomputing them loses digits.
struct KappaValues {
    cplx a1k1, a1k2, a2k1, a2k2;
};
ContinuationResult evaluate_with(Formula f, const SpectralPoint& p, const KappaValues& k, const SpectralData& d,
                                 bool want_phi, const EvalOptions& o = {});
// kappa1 + kappa2 at a common argument without cancellation.
cplx kappa_sum(cplx kap1, cplx kap2, const ProblemConfig& cfg);
// Double-integral forms F1/F2 on the base grids.
ContinuationResult psi_double(Formula f, const SpectralPoint& p, const SpectralData& d);

// Closed-form residues of Phi at alpha1 = a1 (axis 1) or alpha2 = a2 (axis 2).
cplx residue_phi(int axis, cplx other, const ProblemConfig& cfg);

// Phi_3/4 at a point whose coordinates both sit on branch curves: the second
// coordinate is nudged along dir2 by eta_k |k| and the values are
// extrapolated to eta = 0.
struct OneSided {
    cplx value;
    double extrapolation_error = 0;
    std::vector<cplx> samples;
};
OneSided phi34_both_sided(const SpectralPoint& p, const SpectralData& d,
                          const std::vector<double>& etas = {1e-2, 1e-3, 1e-4}, double tol = 1e-11);

// Neville extrapolation of samples f(x_i) to x = 0; err from the last two orders.
cplx neville_zero(const std::vector<double>& x, const std::vector<cplx>& f, double* err = nullptr);

enum class Quantity { Psi, Phi, Phi34 };

// Points of one grid axis with kappa_1, kappa_2 (sided values on P).
struct Axis {
    std::vector<cplx> z, kap1, kap2;
    size_t size() const { return z.size(); }
};
Axis axis_from(const std::vector<cplx>& z, const ProblemConfig& cfg);
Axis axis_from(const Slice& s);

struct GridValues {
    size_t n1 = 0, n2 = 0;
    std::vector<cplx> value;  // index i1 * n2 + i2
    std::vector<double> err;
};
// One single-integral formula on the tensor grid A1 x A2. The integral is
// separable in the two coordinates, so the grid is a matrix product over a
// refined copy of the integration contour carrying interpolated slice data.
// No validity check: the caller picks the formula per point.
GridValues grid_eval(Formula f, const Axis& A1, const Axis& A2, const SpectralData& d, Quantity q,
                     bool parallel = true);
// Several quantities sharing one matrix product, in the order of qs. adapt
// keeps the stock panels of the data contour and refines them only near
// Cauchy points within one panel width of the line (for large grids far from it).
std::vector<GridValues> grid_eval(Formula f, const Axis& A1, const Axis& A2, const SpectralData& d,
                                  const std::vector<Quantity>& qs, bool parallel = true, bool adapt = false);
// Batch CSV: re_a1,im_a1,re_a2,im_a2 in; the same columns plus
// re_val,im_val,formula_used,err_est out.
int eval_csv(std::istream& in, std::ostream& out, const SpectralData& d, Quantity q, const EvalOptions& o = {});

}  // namespace pwedge
