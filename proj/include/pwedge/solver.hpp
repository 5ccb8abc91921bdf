// Damped fixed-point iteration for the slice data g(w) = Psi++(kappa1(w), w)
// and h(w) = Psi++(w, kappa1(w)) on the line R - i epsilon, followed by one
// pass that fills the P slices and the base grids.
#pragma once

#include "pwedge/continuation.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace pwedge {

enum class SeedMode { Explicit, Zero };

struct SolverConfig {
    GridSpec grid;
    double theta = 0.7;
    int max_iters = 200;
    double tol_residual = 1e-12;
    SeedMode seed_mode = SeedMode::Explicit;
    bool base_grids = true;  // build the tensor grids for the double-integral forms
    bool parallel = true;    // OpenMP in the node loops
    double eval_tol = 1e-11; // adaptive fallback tolerance for the P and base passes
};

struct SolveReport {
    int iterations = 0;
    std::vector<double> history_g, history_h;  // sup-norm of the update per sweep
    double wh_residual = -1;                   // sup |-K Psi - Phi34 - P| on the validation grid
    double wh_scale = 0;                       // max grid magnitude used to normalise it
    bool converged = false;
    bool diverged = false;
    double closure_error = 0;
    std::string message;
};

// The closure operator on L: g = M h + e_g, h = M g + e_h (the same M for both).
struct Closure {
    size_t n = 0;
    std::vector<cplx> M;       // row-major, Kronrod weights
    std::vector<cplx> Mdiff;   // Kronrod minus Gauss, for the closure error
    std::vector<cplx> eg, eh;  // explicit terms
    std::vector<cplx> scale;   // 2 kappa1/(kappa1 + kappa2) per row, folded into M
};

Closure build_closure(const SpectralData& d, bool parallel);
// One sweep with relaxation. Returns the sup-norm updates of g and h.
std::pair<double, double> iterate_once(SpectralData& d, const Closure& c, double theta, bool parallel);
// Convenience overload that builds the closure first.
std::pair<double, double> iterate_once(SpectralData& d, const SolverConfig& s);

SpectralData seed(const ProblemConfig& cfg, const SolverConfig& s);
// P slices, base grids, closure error; after g and h have converged.
void complete(SpectralData& d, const SolverConfig& s);
// K Psi++ on (R - i b0) x (R + i b0) and its mirror, from the line data.
void build_base_grids(SpectralData& d, const SolverConfig& s);
std::pair<SpectralData, SolveReport> solve(const ProblemConfig& cfg, const SolverConfig& s = {});

// sup over an n x n grid in S x S of |-K Psi - Phi34 - P| with Psi from the
// F1 single form and Phi34 from the F2 single form.
double wh_residual(const SpectralData& d, int n, double* scale = nullptr);

struct DecayFit {
    double exponent = 0;  // |f| ~ |z|^-exponent
    double residual = 0;  // rms of the log fit
    int samples = 0;
};
DecayFit fit_decay(const std::vector<double>& r, const std::vector<cplx>& f);

struct EdgeReport {
    DecayFit g, h;     // along the slices (both arguments grow)
    DecayFit line;     // Psi++(alpha1*, x - i epsilon/2), alpha1* fixed in the UHP
};
EdgeReport edge_condition_check(const SpectralData& d);

// Checkpoint: a JSON header line followed by CSV blocks for g, h, gP, hP.
// Base grids are rebuilt on load.
void save_checkpoint(const SpectralData& d, std::ostream& os);
SpectralData load_checkpoint(std::istream& is, bool rebuild_base = true);

}  // namespace pwedge
