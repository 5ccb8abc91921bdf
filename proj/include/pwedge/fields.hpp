// Physical fields from the spectral functions: psi from Psi++ over Q1 and
// phi_sc from Phi_3/4 elsewhere, by the inverse double Fourier integral on
// contours tilted into the half planes where exp(-i alpha.x) decays, plus the
// Helmholtz, interface and corner checks.
#pragma once

#include "pwedge/continuation.hpp"

#include <array>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <tuple>
#include <vector>

namespace pwedge {

enum class Which { PhiSc, Psi, PhiTotal };
const char* which_name(Which w);
Which which_from_name(const std::string& s);

struct FieldSample {
    double x1 = 0, x2 = 0;
    Which which = Which::Psi;
    cplx value;
    double err = 0;         // quad + data + tail
    double quad_err = 0;    // Kronrod minus Gauss on both axes
    double data_err = 0;    // propagated spectral error
    double tail_err = 0;    // truncation of the tilted contours
    size_t nodes1 = 0, nodes2 = 0;
    size_t pointwise = 0;   // grid points that fell back to single-point dispatch
};

struct FieldOptions {
    double tau = 0;             // tilt alpha = t -/+ i tau |t|; 0 picks it from k and a
    double tail_exponent = 22;  // tau * T * |x| at the truncation T
    double osc_width = 6;       // panel width times |x|max
    double feature_width = 0.05;
    double growth = 1.3;
    double margin = 1e-3;       // |x_j| below this counts as on the boundary
    size_t max_nodes = 6000;    // per axis
    bool parallel = true;
};

// Tilt used for the contours: small enough that the circles
// alpha1^2 + alpha2^2 = k_j^2, the poles a_j and the branch points stay clear.
double field_tilt(const ProblemConfig& cfg);

// alpha = t + i sign tau |t| on [-T, T], GK21 panels.
struct TiltedAxis {
    int sign = -1;  // -1 for x_j > 0, +1 for x_j < 0
    double lo = 0, hi = 0, T = 0;
    Axis axis;
    std::vector<cplx> wk, wg;  // dalpha included
};
TiltedAxis tilted_axis(int sign, double lo, double hi, const ProblemConfig& cfg, const FieldOptions& o);

// Psi++ and Phi_3/4 on a tensor grid; formulas picked per row, then per
// column, then per point.
struct SpectralGrid {
    GridValues psi, phi34;
    size_t pointwise = 0;
    std::vector<std::pair<Formula, size_t>> usage;  // rows or columns per formula
};
SpectralGrid spectral_grid(const Axis& A1, const Axis& A2, const SpectralData& d, bool parallel = true);

class FieldEvaluator {
public:
    explicit FieldEvaluator(const SpectralData& d, const FieldOptions& o = {});

    // Points are grouped by quadrant and by octave of |x_j|; one grid per group.
    std::vector<FieldSample> reconstruct(Which w, const std::vector<std::array<double, 2>>& xs);
    FieldSample reconstruct(Which w, double x1, double x2);
    // All points of one quadrant through a single grid (keeps finite differences
    // free of grid-to-grid noise). deriv = 1 or 2 returns d/dx1 or d/dx2.
    std::vector<FieldSample> reconstruct_joint(Which w, const std::vector<std::array<double, 2>>& xs,
                                               int deriv = 0);

    const SpectralData& data() const { return d_; }
    const FieldOptions& options() const { return o_; }
    size_t grids_built() const { return built_; }
    void clear() { cache_.clear(); }

private:
    struct Block {
        TiltedAxis a1, a2;
        SpectralGrid grid;
    };
    using Key = std::tuple<int, int, double, double, double, double>;
    const Block& block(int s1, int s2, double lo1, double hi1, double lo2, double hi2);
    FieldSample sum(const Block& b, Which w, double x1, double x2, int deriv) const;

    const SpectralData& d_;
    FieldOptions o_;
    std::map<Key, std::unique_ptr<Block>> cache_;
    size_t built_ = 0;
};

FieldSample reconstruct(Which w, double x1, double x2, const SpectralData& d, const FieldOptions& o = {});

// 5-point Laplacian plus k^2 times the value; k2 for psi, k1 otherwise.
struct HelmholtzResult {
    double x1 = 0, x2 = 0, h = 0;
    cplx value, residual;
    double relative = 0;    // |residual| / |k^2 value|
    double quad_noise = 0;  // 8 max err / h^2 relative to |k^2 value|
};
HelmholtzResult helmholtz_residual(FieldEvaluator& fe, Which w, double x1, double x2, double h);

// Face 1: x2 = 0, x1 = s; face 2: x1 = 0, x2 = s. psi from inside PW and
// phi = phi_in + phi_sc from outside, reconstructed at distance eta_k 2 pi/|k1|
// from the face and extrapolated to eta = 0; the normal derivative is d/dx2
// on face 1 and d/dx1 on face 2, taken spectrally.
struct InterfaceSample {
    int face = 1;
    double s = 0;
    cplx psi, phi, dpsi, dphi;
    double mismatch = 0, dmismatch = 0;  // relative
    double err = 0;                      // extrapolation plus quadrature, relative
};
struct InterfaceReport {
    std::vector<InterfaceSample> samples;
    std::vector<double> etas;
    double max_mismatch = 0, max_dmismatch = 0, max_err = 0;
};
InterfaceReport interface_check(const SpectralData& d, const std::vector<double>& abscissae,
                                const FieldOptions& o = {},
                                const std::vector<double>& etas = {1e-2, 3e-3, 1e-3});

// Face limits from one single-integral form in closed form (alpha2 or alpha1
// integral done by residues and the large-alpha expansion). Exact for data that
// need not satisfy the closure, so it checks the tilted quadrature, not the data.
struct FaceTraces {
    cplx psi_in, dpsi_in;     // x -> face from inside Q1
    cplx phisc_out, dphisc_out;
    double err = 0;
};
FaceTraces face_traces(int face, double s, const SpectralData& d, const FieldOptions& o = {});

// Fit of B + (A1 sin t + B1 cos t) r on circles of radius r: phi_total over the
// three outside quadrants and psi over Q1.
struct CircleFit {
    double r = 0;
    cplx B, A1, B1;
    double residual = 0;  // rms misfit
};
struct MeixnerReport {
    std::vector<CircleFit> phi, psi;
    double slope_phi = 0, slope_psi = 0;  // log-log slope of residual against r
    double b_mismatch = 0;                // |B_phi - B_psi| at the smallest radius
};
MeixnerReport meixner_fit(FieldEvaluator& fe, const std::vector<double>& radii, int per_quadrant = 4);

// x1,x2,re,im,which,err_est
void write_field_csv(const std::vector<FieldSample>& v, std::ostream& os);
// Cell-centred n x n grid on [lo, hi]^2: psi inside Q1, phi_total outside.
std::vector<FieldSample> field_grid(FieldEvaluator& fe, double lo, double hi, int n, bool total = true);

}  // namespace pwedge
