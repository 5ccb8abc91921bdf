#include "pwedge/fields.hpp"
#include "pwedge/solver.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pwedge;

namespace {

const SpectralData& degenerate_data()
{
    static const SpectralData d = solve(testing_support::degenerate()).first;
    return d;
}

}  // namespace

TEST_SUITE("fields")
{
    TEST_CASE("names")
    {
        for (Which w : {Which::PhiSc, Which::Psi, Which::PhiTotal}) CHECK(which_from_name(which_name(w)) == w);
        CHECK_THROWS(which_from_name("nope"));
    }

    TEST_CASE("tilt and tilted contour weights")
    {
        const auto cfg = testing_support::small_contrast();
        const double tau = field_tilt(cfg);
        CHECK(tau > 0);
        CHECK(tau <= 0.2);
        for (int sign : {-1, 1}) {
            const TiltedAxis ax = tilted_axis(sign, 1, 2, cfg, FieldOptions{});
            // exp(-alpha^2) is entire, so the tilted contour integrates it to sqrt(pi)
            cplx sum = 0;
            for (size_t i = 0; i < ax.axis.size(); ++i) sum += ax.wk[i] * std::exp(-ax.axis.z[i] * ax.axis.z[i]);
            CHECK(std::abs(sum - std::sqrt(kPi)) < 1e-12);
            for (size_t i = 0; i < ax.axis.size(); ++i)
                CHECK(ax.axis.z[i].imag() * sign >= 0);
        }
    }

    TEST_CASE("degenerate field is the incident wave inside and nothing outside")
    {
        FieldEvaluator fe(degenerate_data());
        const auto& cfg = fe.data().cfg;
        for (const auto& s : fe.reconstruct(Which::Psi, {{1, 1}, {0.5, 1.5}, {1.7, 0.3}})) {
            const cplx ex = incident_wave(s.x1, s.x2, cfg);
            CHECK(std::abs(s.value - ex) < 1e-8 * std::abs(ex));
            CHECK(s.err < 1e-6);
        }
        for (const auto& s : fe.reconstruct(Which::PhiSc, {{-1, 1}, {-0.5, -0.7}, {1.2, -0.4}}))
            CHECK(std::abs(s.value) < 1e-10);
        // support: psi vanishes outside PW
        for (const auto& s : fe.reconstruct(Which::Psi, {{-1, 1}, {0.8, -1.3}})) CHECK(std::abs(s.value) < 1e-8);
        const FieldSample t = fe.reconstruct(Which::PhiTotal, -0.5, -0.7);
        CHECK(std::abs(t.value - incident_wave(-0.5, -0.7, cfg)) < 1e-8);
    }

    TEST_CASE("helmholtz residual is second order")
    {
        FieldEvaluator fe(degenerate_data());
        const double h = 1e-2 * 2 * kPi / std::abs(fe.data().cfg.k1);
        const HelmholtzResult a = helmholtz_residual(fe, Which::Psi, 1.0, 0.8, h);
        const HelmholtzResult b = helmholtz_residual(fe, Which::Psi, 1.0, 0.8, h / 2);
        CHECK(a.relative < 1e-3);
        CHECK(a.relative / b.relative == doctest::Approx(4).epsilon(0.1));
        CHECK(b.quad_noise < 0.1 * b.relative);
        CHECK_THROWS_AS(helmholtz_residual(fe, Which::Psi, 0.01, 0.8, h), std::invalid_argument);
    }

    TEST_CASE("points on a face are rejected")
    {
        FieldEvaluator fe(degenerate_data());
        CHECK_THROWS_AS(fe.reconstruct(Which::Psi, 0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(fe.reconstruct(Which::PhiTotal, 1.0, 1.0), std::invalid_argument);
    }

    TEST_CASE("csv export")
    {
        FieldSample s;
        s.x1 = 1;
        s.x2 = -2;
        s.which = Which::PhiSc;
        s.value = cplx(0.5, -0.25);
        s.err = 1e-9;
        std::ostringstream os;
        write_field_csv({s}, os);
        std::istringstream in(os.str());
        std::string head, row;
        std::getline(in, head);
        std::getline(in, row);
        CHECK(head == "x1,x2,re,im,which,err_est");
        CHECK(row.find("phi_sc") != std::string::npos);
    }
}
