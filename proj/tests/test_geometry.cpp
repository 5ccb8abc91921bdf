#include "pwedge/geometry.hpp"
#include "pwedge/quadrature.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pwedge;
using testing_support::Gen;

TEST_SUITE("geometry")
{
    TEST_CASE("h curves")
    {
        const auto cfg = testing_support::small_contrast();
        CHECK(std::abs(h_curve(1, -1, 0.0, cfg) + cfg.k1) < 1e-15);
        for (double x = -10 * std::abs(cfg.k2); x <= 10 * std::abs(cfg.k2); x += 0.01) {
            CHECK(h_curve(2, -1, x, cfg) == h_curve(2, -1, -x, cfg));
            CHECK(h_curve(1, -1, x, cfg).imag() < 0);
            CHECK(h_curve(2, -1, x, cfg).imag() < 0);
            CHECK(h_curve(1, +1, x, cfg).imag() > 0);
        }
    }

    TEST_CASE("region membership")
    {
        const auto cfg = testing_support::small_contrast();
        CHECK(region_contains(Region::uhp(), kI, cfg) == Membership::Inside);
        CHECK(region_contains(Region::hminus(), -cfg.k1, cfg) == Membership::Boundary);
        CHECK(region_contains(Region::hminus(), h_curve(2, -1, 3.0, cfg), cfg) == Membership::Boundary);
        CHECK(region_contains(Region::hminus(), cplx(0.5, -1.0), cfg) == Membership::Inside);
        CHECK(region_contains(Region::strip(0.1), cplx(3, 0.05), cfg) == Membership::Inside);
        CHECK(region_contains(Region::strip(0.1), cplx(3, 0.2), cfg) == Membership::Outside);
        Gen g(2);
        for (int i = 0; i < 200; ++i) {
            const SpectralPoint p{g.box(-3, 3, -3, 3), g.box(-3, 3, -3, 3)};
            const RegionPair r{Region::uhp(-0.1), Region::hminus()};
            const bool a = region_contains(r.first, p.alpha1, cfg) == Membership::Inside;
            const bool b = region_contains(r.second, p.alpha2, cfg) == Membership::Inside;
            CHECK((region_contains(r, p, cfg) == Membership::Inside) == (a && b));
        }
    }

    TEST_CASE("kappa maps off-curve points into H+")
    {
        const auto cfg = testing_support::small_contrast();
        Gen g(17);
        int tested = 0, violations = 0;
        while (tested < 1000) {
            const cplx z = g.box(-6, 6, -6, 6);
            bool near = false;
            for (int j = 1; j <= 2; ++j)
                for (int s : {-1, 1}) near = near || curve_distance(j, s, z, cfg) <= 10 * tau_geo(cfg);
            if (near) continue;
            ++tested;
            for (int j = 1; j <= 2; ++j)
                if (region_contains(Region::hplus(), kappa(j, z, cfg), cfg) != Membership::Inside) ++violations;
        }
        CHECK(violations == 0);
    }

    TEST_CASE("P contour structure")
    {
        const auto cfg = testing_support::small_contrast();
        for (int j = 1; j <= 2; ++j) {
            const Contour P = build_P(j, cfg, 40.0);
            CHECK(P.segments.size() == 4);
            const cplx tip = P.at(1, 0.0).z;
            CHECK(std::abs(tip + cfg.k(j)) < 1e-15);
            const cplx end = P.at(2, 40.0).z;
            CHECK(end.imag() < -39.0);
            CHECK(std::abs(end.imag() + std::sqrt(1600 - (cfg.k(j) * cfg.k(j)).real())) < 0.05);
            // sided kappa_j reproduces the parameter on both sides
            for (double x : {-30.0, -2.0, -0.3, -1e-3, 1e-3, 0.3, 2.0, 30.0}) {
                const ContourPoint p = P.at(x < 0 ? 1 : 2, x);
                CHECK(std::abs(kappa(j, p.z, cfg, p.dir) - x) < 1e-12 * (1 + std::abs(x)));
                // nudged points straddle the curve: left side lies left of the upward tangent
                const cplx up = x < 0 ? p.dz : -p.dz;
                const cplx off = p.z + 1e-3 * p.dir;
                const double cross = (std::conj(up) * (off - p.z)).imag();
                CHECK((x < 0 ? cross > 0 : cross < 0));
            }
        }
        CHECK_THROWS_AS(build_P(1, cfg, 0.5), ConfigError);
    }

    TEST_CASE("integral over P of an entire function vanishes")
    {
        const auto cfg = testing_support::small_contrast();
        const cplx k = cfg.k1;
        const Contour P = build_P(1, cfg, 40.0);
        QuadOptions o;
        o.tol = 1e-12;
        auto r = integrate_contour([k](const ContourPoint& p) { return p.z * p.z * std::exp(-kI * p.z) / (k * k); }, P, o);
        CHECK(std::abs(r.value) < 1e-10);
    }

    TEST_CASE("shifted lines")
    {
        const auto L0 = shifted_line(0.0, 5.0);
        CHECK(L0.at(0, 2.0).z == cplx(2.0, 0.0));
        const auto L = shifted_line(-0.1, 5.0);
        CHECK(L.at(0, -5.0).z == cplx(-5.0, -0.1));
        CHECK(L.at(0, 5.0).z == cplx(5.0, -0.1));
        // residue oracle: int e^{iz}/(z^2+4) dz = 2 pi i e^{-2}/(4i)
        const double T = 400;
        auto line = shifted_line(0.0, T);
        QuadOptions o;
        o.tol = 1e-11;
        auto r = integrate_contour([](const ContourPoint& p) { return std::exp(kI * p.z) / (p.z * p.z + 4.0); }, line, o);
        const double exact = kPi * std::exp(-2.0) / 2.0;
        // truncated oscillatory tail is O(1/T^2)
        CHECK(std::abs(r.value - exact) < 2.0 / (T * T));
    }

    TEST_CASE("contour csv")
    {
        const auto cfg = testing_support::small_contrast();
        std::ostringstream os;
        build_P(2, cfg, 10.0).write_csv(os, 10);
        const std::string s = os.str();
        CHECK(s.rfind("t,re_z,im_z,side,segment_id\n", 0) == 0);
        CHECK(s.find(",left,1") != std::string::npos);
        CHECK(s.find(",right,2") != std::string::npos);
    }
}
