#include "pwedge/kernel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace pwedge {

namespace {

double normalized_theta(double t)
{
    double r = std::fmod(t, 2 * kPi);
    if (r < 0) r += 2 * kPi;
    return r;
}

void check_guard(cplx d, const ProblemConfig& cfg, const char* what)
{
    if (std::abs(d) < cfg.pole_guard()) throw PoleError(std::string("pole guard: ") + what);
}

}  // namespace

ProblemConfig ProblemConfig::make(cplx k1, cplx k2, double theta0, double b0)
{
    if (!(k1.imag() > 0) || !(k2.imag() > 0))
        throw ConfigError("wavenumbers need Im(k) > 0");
    if (!std::isfinite(theta0)) throw ConfigError("theta0 not finite");
    ProblemConfig c;
    c.k1 = k1;
    c.k2 = k2;
    c.theta0 = theta0;
    const double t = normalized_theta(theta0);
    const double tol = 1e-12;
    if (!(t > kPi / 2 + tol) || std::abs(t - kPi) < tol || std::abs(t - 1.5 * kPi) < tol)
        throw ConfigError("theta0 must lie in (pi/2, 2pi) minus {pi, 3pi/2}");
    c.regime = (t > kPi && t < 1.5 * kPi) ? Regime::Baseline : Regime::Extended;
    c.a1 = k1 * std::cos(theta0);
    c.a2 = k1 * std::sin(theta0);
    c.delta = std::min(k1.imag() * std::abs(std::cos(theta0)), k1.imag() * std::abs(std::sin(theta0)));
    c.epsilon = 0.5 * std::min(c.delta, k2.imag());
    if (k1.imag() == k2.imag()) c.epsilon = 0.5 * c.delta;
    c.b0 = b0 > 0 ? b0 : 0.5 * c.epsilon;
    if (!(c.b0 > 0 && c.b0 < c.epsilon)) throw ConfigError("b0 must satisfy 0 < b0 < epsilon");
    return c;
}

ProblemConfig ProblemConfig::from_json_text(const std::string& text)
{
    auto line_at = [&](size_t pos) {
        return 1 + std::count(text.begin(), text.begin() + std::min(pos, text.size()), '\n');
    };
    auto where = [&](const std::string& key) {
        const size_t pos = text.find("\"" + key + "\"");
        return "line " + std::to_string(line_at(pos == std::string::npos ? text.size() : pos));
    };
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("line " + std::to_string(line_at(e.byte > 0 ? e.byte - 1 : 0)) +
                          ": config parse error: " + e.what());
    }
    if (!j.is_object()) throw ConfigError("line 1: config must be a JSON object");
    auto num = [&](const char* key) -> double {
        if (!j.contains(key))
            throw ConfigError("line " + std::to_string(line_at(text.size())) + ": missing key '" + key + "'");
        if (!j[key].is_number()) throw ConfigError(where(key) + ": key '" + key + "' must be a number");
        return j[key].get<double>();
    };
    double b0 = -1.0;
    if (j.contains("b0")) b0 = num("b0");
    // one key at a time so the first missing key is reported
    const double k1r = num("k1_re"), k1i = num("k1_im"), k2r = num("k2_re"), k2i = num("k2_im");
    const double theta0 = num("theta0");
    const cplx k1(k1r, k1i), k2(k2r, k2i);
    try {
        return make(k1, k2, theta0, b0);
    } catch (const ConfigError& e) {
        const std::string m = e.what();
        std::string key = "theta0";
        if (m.find("Im(k)") != std::string::npos) key = k1.imag() > 0 ? "k2_im" : "k1_im";
        if (m.find("b0") != std::string::npos) key = "b0";
        throw ConfigError(where(key) + ": " + m);
    }
}

ProblemConfig ProblemConfig::from_json_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_text(ss.str());
}

std::string ProblemConfig::to_json_text() const
{
    // %.17g keeps the round trip exact
    char buf[512];
    std::snprintf(buf, sizeof buf,
                  "{\"b0\":%.17g,\"k1_im\":%.17g,\"k1_re\":%.17g,\"k2_im\":%.17g,\"k2_re\":%.17g,\"theta0\":%.17g}",
                  b0, k1.imag(), k1.real(), k2.imag(), k2.real(), theta0);
    return buf;
}

std::string ProblemConfig::hash() const { return fnv1a_hex(to_json_text()); }

double ProblemConfig::pole_guard() const { return 1e-8 * std::max(1.0, kmax()); }

std::string fnv1a_hex(const std::string& bytes)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

cplx sqrt_arrow(cplx z)
{
    if (z == 0.0) return 0.0;
    double a = std::arg(z);  // (-pi, pi]
    if (a < 0) a += 2 * kPi;
    if (z.imag() == 0.0 && z.real() > 0) a = 0.0;  // -0.0 imaginary part lands here too
    return std::polar(std::sqrt(std::abs(z)), a / 2);
}

cplx sqrt_arrow_dir(cplx w, cplx dw)
{
    if (dw != 0.0 && w.real() > 0 && std::abs(w.imag()) <= 1e-9 * std::abs(w)) {
        const double r = std::sqrt(std::abs(w));
        return dw.imag() >= 0 ? cplx(r, 0.0) : cplx(-r, 0.0);
    }
    return sqrt_arrow(w);
}

cplx kappa_k(cplx k, cplx z, cplx dir)
{
    const cplx w = k * k - z * z;
    if (dir == 0.0) return sqrt_arrow(w);
    return sqrt_arrow_dir(w, -2.0 * z * dir);
}

cplx kappa(int j, cplx z, const ProblemConfig& cfg, cplx dir) { return kappa_k(cfg.k(j), z, dir); }

KernelParts kernel_parts(const SpectralPoint& p, const ProblemConfig& cfg)
{
    const cplx s = p.alpha1 * p.alpha1 + p.alpha2 * p.alpha2;
    return {cfg.k2 * cfg.k2 - s, cfg.k1 * cfg.k1 - s};
}

cplx kernel_K(const SpectralPoint& p, const ProblemConfig& cfg)
{
    const auto kp = kernel_parts(p, cfg);
    if (cfg.degenerate()) return 1.0;
    check_guard(kp.K1, cfg, "K1 = 0");
    return kp.value();
}

namespace {

// numerator and denominator of a factor
std::pair<cplx, cplx> factor_nd(Factor which, const SpectralPoint& p, cplx k1, cplx k2)
{
    switch (which) {
    case Factor::PlusO:
    case Factor::MinusO: {
        const cplx s = which == Factor::PlusO ? 1.0 : -1.0;
        const cplx q2 = kappa_k(k2, p.alpha2, p.dir2), q1 = kappa_k(k1, p.alpha2, p.dir2);
        return {q2 + s * p.alpha1, q1 + s * p.alpha1};
    }
    case Factor::OPlus:
    case Factor::OMinus: {
        const cplx s = which == Factor::OPlus ? 1.0 : -1.0;
        const cplx q2 = kappa_k(k2, p.alpha1, p.dir1), q1 = kappa_k(k1, p.alpha1, p.dir1);
        return {q2 + s * p.alpha2, q1 + s * p.alpha2};
    }
    }
    return {1.0, 1.0};
}

}  // namespace

cplx factor(Factor which, const SpectralPoint& p, const ProblemConfig& cfg)
{
    if (cfg.degenerate()) return 1.0;
    const auto [n, d] = factor_nd(which, p, cfg.k1, cfg.k2);
    check_guard(d, cfg, "factor denominator");
    return n / d;
}

cplx factor_inv(Factor which, const SpectralPoint& p, const ProblemConfig& cfg)
{
    if (cfg.degenerate()) return 1.0;
    const auto [n, d] = factor_nd(which, p, cfg.k1, cfg.k2);
    check_guard(n, cfg, "factor numerator");
    return d / n;
}

cplx factor_raw(Factor which, cplx a1, cplx a2, cplx k1, cplx k2)
{
    const auto [n, d] = factor_nd(which, SpectralPoint{a1, a2}, k1, k2);
    return n / d;
}

cplx forcing_P(const SpectralPoint& p, const ProblemConfig& cfg)
{
    const cplx d1 = p.alpha1 - cfg.a1, d2 = p.alpha2 - cfg.a2;
    check_guard(d1, cfg, "alpha1 = a1");
    check_guard(d2, cfg, "alpha2 = a2");
    return 1.0 / (d1 * d2);
}

cplx incident_wave(double x1, double x2, const ProblemConfig& cfg)
{
    return std::exp(-kI * (cfg.a1 * x1 + cfg.a2 * x2));
}

}  // namespace pwedge
