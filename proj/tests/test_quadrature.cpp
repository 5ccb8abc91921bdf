#include "pwedge/quadrature.hpp"
#include "support.hpp"

#include <doctest.h>

#include <boost/math/special_functions/erf.hpp>

#include <string>
#include <vector>

using namespace pwedge;

namespace {

Contour circle(cplx z0, double r)
{
    Contour c;
    c.name = "circle";
    Segment s;
    s.t0 = 0;
    s.t1 = 2 * kPi;
    s.z = [z0, r](double t) { return z0 + r * std::exp(kI * t); };
    s.dz = [r](double t) { return kI * r * std::exp(kI * t); };
    c.segments.push_back(s);
    return c;
}

struct Case {
    std::string name;
    RealFn f;
    double a, b;
    cplx exact;
};

std::vector<Case> battery()
{
    const cplx c(0.5, 0.01);
    const double a = 10.0;
    return {
        {"x^3", [](double x) { return cplx(x * x * x); }, 0, 1, 0.25},
        {"exp", [](double x) { return cplx(std::exp(x)); }, 0, 1, std::exp(1.0) - 1},
        {"sin", [](double x) { return cplx(std::sin(x)); }, 0, kPi, 2.0},
        {"lorentz", [](double x) { return cplx(1 / (1 + x * x)); }, 0, 1, kPi / 4},
        {"sqrt", [](double x) { return cplx(std::sqrt(x)); }, 0, 1, 2.0 / 3},
        {"log", [](double x) { return cplx(std::log(x)); }, 0, 1, -1.0},
        {"peak", [](double x) { return cplx(1 / (x * x + 1e-2)); }, -1, 1, 20 * std::atan(10.0)},
        {"cos20", [](double x) { return cplx(std::cos(20 * x)); }, 0, 2 * kPi, 0.0},
        {"eix", [](double x) { return std::exp(kI * x); }, 0, 1, (std::exp(kI) - 1.0) / kI},
        {"decay", [](double x) { return cplx(std::exp(-x)); }, 0, 50, 1 - std::exp(-50.0)},
        {"inv_sqrt", [](double x) { return cplx(1 / std::sqrt(x)); }, 0, 1, 2.0},
        {"near_pole", [c](double x) { return 1.0 / (x - c); }, 0, 1, std::log(1.0 - c) - std::log(-c)},
        {"cos2", [](double x) { return cplx(std::cos(x) * std::cos(x)); }, 0, 1, 0.5 + std::sin(2.0) / 4},
        {"kink", [](double x) { return cplx(std::abs(x - 1)); }, 0, 3, 2.5},
        {"xexp", [](double x) { return cplx(x * std::exp(x)); }, 0, 1, 1.0},
        {"arcsin", [](double x) { return cplx(1 / std::sqrt(1 - x * x)); }, 0, 1, kPi / 2},
        {"osc", [a](double x) { return x * std::exp(kI * a * x); }, 0, 1,
         std::exp(kI * a) * (1.0 / (kI * a) + 1.0 / (a * a)) - 1.0 / (a * a)},
        {"gauss", [](double x) { return cplx(std::exp(-x * x)); }, -5, 5, std::sqrt(kPi) * boost::math::erf(5.0)},
        {"pow03", [](double x) { return cplx(std::pow(x, 0.3)); }, 0, 1, 1 / 1.3},
        {"runge", [](double x) { return cplx(1 / (1 + 25 * x * x)); }, 0, 2, std::atan(10.0) / 5},
    };
}

}  // namespace

TEST_SUITE("quadrature")
{
    TEST_CASE("error estimates bound the true error")
    {
        for (double tol : {1e-6, 1e-9}) {
            for (const auto& c : battery()) {
                QuadOptions o;
                o.tol = tol;
                const auto r = integrate_interval(c.f, c.a, c.b, o);
                const double err = std::abs(r.value - c.exact);
                INFO(c.name << " tol " << tol << " err " << err << " est " << r.error_estimate);
                CHECK(err <= std::max(r.error_estimate, 1e-14 * std::max(1.0, std::abs(c.exact))));
                if (r.converged) CHECK(err <= 10 * tol * std::max(1.0, std::abs(c.exact)));
            }
        }
    }

    TEST_CASE("real axis lorentzian with mapped tails")
    {
        const auto L = shifted_line(0.0, 10.0, true);
        const auto r = integrate_contour([](const ContourPoint& p) { return 1.0 / (p.z * p.z + 1.0); }, L, 1e-12);
        CHECK(std::abs(r.value - kPi) < 1e-11);
        CHECK(r.converged);
        CHECK(r.tail_estimate > 0.15);  // 2 atan(1/10)
        CHECK(r.tail_estimate < 0.25);
    }

    TEST_CASE("truncated line reports a tail estimate")
    {
        const auto L = shifted_line(0.0, 10.0);
        const auto r = integrate_contour([](const ContourPoint& p) { return 1.0 / (p.z * p.z + 1.0); }, L, 1e-12, 2.0);
        const double missing = kPi - r.value.real();
        CHECK(r.tail_estimate > 0.5 * missing);
        CHECK(r.tail_estimate < 2.0 * missing);
    }

    TEST_CASE("residue completed line integral")
    {
        const auto cfg = testing_support::small_contrast();
        const double T = 500;
        const auto L = shifted_line(-cfg.epsilon, T);
        const cplx b(0, 2);
        auto f = [&](const ContourPoint& p) { return std::exp(kI * p.z) / ((p.z - cfg.a1) * (p.z - b)); };
        QuadOptions o;
        o.tol = 1e-11;
        const auto r = integrate_contour(f, L, o);
        // only the pole at 2i lies above the line
        const cplx exact = 2.0 * kPi * kI * std::exp(kI * b) / (b - cfg.a1);
        CHECK(std::abs(r.value - exact) < 4.0 * std::exp(cfg.epsilon) / (T * T));
    }

    TEST_CASE("deformation invariance")
    {
        const auto cfg = testing_support::small_contrast();
        auto f = [&](const ContourPoint& p) { return 1.0 / ((p.z - cfg.a1) * (p.z - cplx(0, 3))); };
        const auto r0 = integrate_contour(f, shifted_line(0.0, 20.0, true), 1e-12);
        const auto r1 = integrate_contour(f, shifted_line(-0.05, 20.0, true), 1e-12);
        CHECK(std::abs(r0.value - r1.value) < r0.error_estimate + r1.error_estimate + 1e-12);
    }

    TEST_CASE("tensor integration")
    {
        const auto L = shifted_line(0.0, 8.0, true);
        SUBCASE("separable")
        {
            auto f1 = [](cplx z) { return 1.0 / (z * z + 1.0); };
            auto f2 = [](cplx z) { return 1.0 / ((z - cplx(0, 1)) * (z + cplx(0, 2))); };
            const auto r = integrate_tensor2([&](const ContourPoint& a, const ContourPoint& b) { return f1(a.z) * f2(b.z); }, L, L, 1e-10);
            const auto a = integrate_contour([&](const ContourPoint& p) { return f1(p.z); }, L, 1e-12);
            const auto b = integrate_contour([&](const ContourPoint& p) { return f2(p.z); }, L, 1e-12);
            CHECK(std::abs(r.value - a.value * b.value) < 1e-8);
        }
        SUBCASE("gaussian")
        {
            const auto r = integrate_tensor2(
                [](const ContourPoint& a, const ContourPoint& b) { return std::exp(-a.z * a.z - b.z * b.z); }, L, L, 1e-10, true);
            CHECK(std::abs(r.value - kPi) < 1e-9);
        }
        SUBCASE("double pole")
        {
            const cplx c1(0.3, 0.2), c2(-0.5, 0.1);
            auto f = [&](const ContourPoint& a, const ContourPoint& b) {
                return 1.0 / ((a.z - c1) * (a.z + kI) * (b.z - c2) * (b.z + kI));
            };
            const auto r = integrate_tensor2(f, L, L, 1e-10);
            // close each integral in the upper half plane
            const cplx exact = (2.0 * kPi * kI / (c1 + kI)) * (2.0 * kPi * kI / (c2 + kI));
            CHECK(std::abs(r.value - exact) < 1e-8);
        }
    }

    TEST_CASE("cauchy transform on a circle")
    {
        const auto C = circle(0.0, 1.0);
        auto one = [](const ContourPoint&) { return cplx(1.0); };
        CHECK(std::abs(cauchy_transform(one, C, cplx(0.2, 0.3)) - 1.0) < 1e-10);
        CHECK(std::abs(cauchy_transform(one, C, cplx(1.5, 0.3))) < 1e-10);
        CHECK_THROWS_AS(cauchy_transform(one, C, cplx(1.0, 0.0)), NumericalError);
    }

    TEST_CASE("plemelj jump on an h-minus arc")
    {
        const auto cfg = testing_support::small_contrast();
        Contour arc;
        Segment s;
        s.t0 = 0.2;
        s.t1 = 2.0;
        s.side = Side::Right;
        s.z = [&cfg](double x) { return h_curve(1, -1, x, cfg); };
        s.dz = [&cfg](double x) { return cplx(x, 0) / kappa(1, cplx(x, 0), cfg); };
        arc.segments.push_back(s);
        auto f = [](const ContourPoint& p) { return p.z; };
        for (double t : {0.5, 1.0, 1.7}) {
            const cplx tau = arc.at(0, t).z;
            const cplx yl = cauchy_transform(f, arc, SidedPoint{0, t, Side::Left});
            const cplx yr = cauchy_transform(f, arc, SidedPoint{0, t, Side::Right});
            CHECK(std::abs((yl - yr) - tau) < 1e-6 * std::abs(tau));
            // the limits agree with nearby off-contour values
            const ContourPoint p = arc.at(0, t);
            const cplx n = kI * p.dz / std::abs(p.dz);
            const double eta = 1e-5;
            CHECK(std::abs(cauchy_transform(f, arc, tau + eta * n) - yl) < 1e-3);
            CHECK(std::abs(cauchy_transform(f, arc, tau - eta * n) - yr) < 1e-3);
        }
    }

    TEST_CASE("residues")
    {
        const cplx z0(0.3, -0.2);
        CHECK(std::abs(residue_at_simple_pole([z0](cplx z) { return 1.0 / (z - z0); }, z0, 0.1) - 1.0) < 1e-13);
        CHECK(std::abs(residue_at_simple_pole([](cplx z) { return std::exp(z) * std::cos(z); }, z0, 0.1)) < 1e-12);
        const auto cfg = testing_support::small_contrast();
        const cplx z2(0.4, 0.05);
        const cplx zd = kappa(1, z2, cfg);
        auto K = [&](cplx z1) { return kernel_K({z1, z2}, cfg); };
        const cplx r = residue_at_simple_pole(K, zd, 0.05);
        CHECK(std::abs(r - cfg.contrast() / (-2.0 * zd)) < 1e-12);
        CHECK_THROWS_AS(residue_at_simple_pole([](cplx z) { return 1.0 / (z * (z - 0.1)); }, 0.0, 0.1), NumericalError);
    }

    TEST_CASE("fixed rules and interpolation")
    {
        const auto cfg = testing_support::small_contrast();
        const auto L = shifted_line(-cfg.epsilon, 30.0, true);
        PanelSpec ps;
        ps.feature_width = 0.05;
        ps.extra = {{1.0, 0.05}, {-1.0, 0.05}};
        const NodeSet n = make_nodes(L, ps);
        auto f = [](cplx z) { return 1.0 / (z * z + 1.0); };
        std::vector<cplx> v;
        for (const auto& p : n.pts) v.push_back(f(p.z));
        const auto s = fixed_sum(n, v);
        // contour lies between the poles +-i
        CHECK(std::abs(s.value - kPi) < 1e-10);
        const PanelInterpolant I(&n, v);
        for (double x : {-3.3, -0.71, 0.0, 0.123, 2.5, 17.0}) CHECK(std::abs(I(1, x) - f(cplx(x, -cfg.epsilon))) < 1e-10);
        CHECK(I.self_error() < 1e-8);
        // rebuild from stored breakpoints
        const NodeSet m = make_nodes_from_breaks(L, node_breaks(n, L.segments.size()));
        REQUIRE(m.size() == n.size());
        for (size_t i = 0; i < n.size(); ++i) CHECK(m.pts[i].z == n.pts[i].z);
    }

    TEST_CASE("graded breaks")
    {
        const auto b = graded_breaks(-10, 10, {{0.0, 0.01}}, 1.3, 1.0);
        CHECK(b.front() == -10);
        CHECK(b.back() == 10);
        double wmin = 1e9, wmax = 0;
        for (size_t i = 0; i + 1 < b.size(); ++i) {
            CHECK(b[i + 1] > b[i]);
            wmin = std::min(wmin, b[i + 1] - b[i]);
            wmax = std::max(wmax, b[i + 1] - b[i]);
        }
        CHECK(wmin < 0.02);
        CHECK(wmax <= 1.5);
        CHECK(std::find(b.begin(), b.end(), 0.0) != b.end());
    }

    TEST_CASE("diagnostics json")
    {
        QuadOptions o;
        const auto r = integrate_interval([](double x) { return cplx(std::exp(x)); }, 0, 1, o);
        const std::string j = r.to_json();
        CHECK(j.find("\"evaluations\"") != std::string::npos);
        CHECK(j.find("\"depth_histogram\"") != std::string::npos);
    }
}
