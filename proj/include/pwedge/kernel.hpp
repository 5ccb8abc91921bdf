// Branch-aware square root, the kernel K = K2/K1, its four one-variable
// factorizations and the forcing term P++.
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

namespace pwedge {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr cplx kI{0.0, 1.0};

// Raised when an evaluation lands inside a pole guard.
class PoleError : public std::runtime_error {
public:
    explicit PoleError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid parameters (bad JSON, Im k <= 0, forbidden angle, ...).
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// Failure of a numerical procedure that should have worked.
class NumericalError : public std::runtime_error {
public:
    explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

enum class Regime { Baseline, Extended };

struct ProblemConfig {
    cplx k1, k2;
    double theta0 = 0;
    double b0 = 0;
    // derived
    cplx a1, a2;
    double delta = 0;
    double epsilon = 0;
    Regime regime = Regime::Baseline;

    // b0 <= 0 selects epsilon/2.
    static ProblemConfig make(cplx k1, cplx k2, double theta0, double b0 = -1.0);
    static ProblemConfig from_json_text(const std::string& text);
    static ProblemConfig from_json_file(const std::string& path);
    std::string to_json_text() const;  // input keys only
    std::string hash() const;          // FNV-1a of to_json_text(), hex

    double kmax() const { return std::max(std::abs(k1), std::abs(k2)); }
    cplx k(int j) const { return j == 1 ? k1 : k2; }
    double pole_guard() const;
    bool degenerate() const { return k1 == k2; }
    // k2^2 - k1^2, the prefactor of every integral term
    cplx contrast() const { return k2 * k2 - k1 * k1; }
};

// arg in [0, 2 pi); points on the positive real axis take arg 0.
cplx sqrt_arrow(cplx z);

// One-sided value of sqrt_arrow when w sits on its cut and is approached
// along dw. Off the cut this is sqrt_arrow(w).
cplx sqrt_arrow_dir(cplx w, cplx dw);

// kappa_j(z) = sqrt_arrow(k_j^2 - z^2). dir != 0 selects the side of the
// branch curve the point is approached from.
cplx kappa(int j, cplx z, const ProblemConfig& cfg, cplx dir = 0.0);
cplx kappa_k(cplx k, cplx z, cplx dir = 0.0);

struct SpectralPoint {
    cplx alpha1, alpha2;
    // approach directions for points on branch curves, 0 when unused
    cplx dir1 = 0.0, dir2 = 0.0;
};

struct KernelParts {
    cplx K2, K1;
    cplx value() const { return K2 / K1; }
};

KernelParts kernel_parts(const SpectralPoint& p, const ProblemConfig& cfg);
cplx kernel_K(const SpectralPoint& p, const ProblemConfig& cfg);

enum class Factor { PlusO, MinusO, OPlus, OMinus };

// K+o = (kap2(a2)+a1)/(kap1(a2)+a1), K-o with minus signs,
// Ko+ and Ko- the same with the roles of a1 and a2 exchanged.
cplx factor(Factor which, const SpectralPoint& p, const ProblemConfig& cfg);
// 1/factor computed as the swapped ratio (finite where the factor vanishes).
cplx factor_inv(Factor which, const SpectralPoint& p, const ProblemConfig& cfg);

// Same factors for raw wavenumbers, used by the real-trace sweeps.
cplx factor_raw(Factor which, cplx a1, cplx a2, cplx k1, cplx k2);

cplx forcing_P(const SpectralPoint& p, const ProblemConfig& cfg);

// Incident wave exp(-i(a1 x1 + a2 x2)).
cplx incident_wave(double x1, double x2, const ProblemConfig& cfg);

std::string fnv1a_hex(const std::string& bytes);

}  // namespace pwedge
