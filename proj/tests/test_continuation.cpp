#include "pwedge/solver.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pwedge;
using testing_support::Gen;

namespace {

const SpectralData& small_data()
{
    static const SpectralData d = solve(testing_support::small_contrast()).first;
    return d;
}

const SpectralData& degenerate_data()
{
    static const SpectralData d = solve(testing_support::degenerate()).first;
    return d;
}

}  // namespace

TEST_SUITE("continuation")
{
    TEST_CASE("neville extrapolation")
    {
        std::vector<double> x{0.1, 0.05, 0.02};
        std::vector<cplx> f;
        for (double t : x) f.push_back(cplx(1, 2) + 3.0 * t - cplx(0, 4) * t * t);
        double err = 0;
        CHECK(std::abs(neville_zero(x, f, &err) - cplx(1, 2)) < 1e-13);
        // err compares the two highest orders, so it bounds the linear truncation
        CHECK(err > 0);
        CHECK(err < 1e-2);
    }

    TEST_CASE("kappa_sum matches the plain sum")
    {
        const auto cfg = testing_support::small_contrast();
        Gen g(4);
        for (int i = 0; i < 200; ++i) {
            const cplx z = g.box(-5, 5, -2, 2);
            const cplx k1 = kappa(1, z, cfg), k2 = kappa(2, z, cfg);
            CHECK(std::abs(kappa_sum(k1, k2, cfg) - (k1 + k2)) < 1e-12 * std::abs(k1 + k2));
        }
    }

    TEST_CASE("formula clearance")
    {
        const auto cfg = testing_support::small_contrast();
        // F1 single needs alpha2 above R - i epsilon
        CHECK(formula_clearance(Formula::F1Single, {{0.3, 0.5}, {0.2, -2.0}}, cfg) < 0);
        CHECK(formula_clearance(Formula::F1Single, {{0.3, 0.5}, {0.2, 0.5}}, cfg) > 0);
    }

    TEST_CASE("degenerate data gives -P and zero Phi_3/4")
    {
        const SpectralData& d = degenerate_data();
        Gen g(8);
        for (int i = 0; i < 20; ++i) {
            const SpectralPoint p{g.box(-3, 3, 0.1, 2), g.box(-3, 3, 0.1, 2)};
            const cplx P = forcing_P(p, d.cfg);
            CHECK(std::abs(psi_pp(p, d).value + P) < 1e-10 * std::abs(P));
        }
        for (int i = 0; i < 20; ++i) {
            const SpectralPoint p{g.box(-3, 3, -0.04, 0.04), g.box(-3, 3, -0.04, 0.04)};
            CHECK(std::abs(phi_34(p, d).value) < 1e-10 * std::abs(forcing_P(p, d.cfg)));
        }
    }

    TEST_CASE("residues at the incident poles")
    {
        const SpectralData& d = small_data();
        for (double o : {-0.7, 0.4, 1.3}) {
            const auto f = [&](cplx z) { return phi({z, o}, d).value; };
            const cplx num = residue_at_simple_pole(f, d.cfg.a1, 0.03);
            const cplx ex = residue_phi(1, o, d.cfg);
            CHECK(std::abs(num - ex) < 1e-6 * std::abs(ex));
        }
    }

    TEST_CASE("single forms agree where both apply")
    {
        const SpectralData& d = small_data();
        Gen g(12);
        int n = 0;
        while (n < 10) {
            const SpectralPoint p{g.box(-2, 2, 0.0, 0.5), g.box(-2, 2, 0.0, 0.5)};
            if (formula_clearance(Formula::F1Single, p, d.cfg) < 0.25 * d.cfg.epsilon) continue;
            if (formula_clearance(Formula::F2Single, p, d.cfg) < 0.25 * d.cfg.epsilon) continue;
            const cplx a = evaluate_with(Formula::F1Single, p, d, false).value;
            const cplx b = evaluate_with(Formula::F2Single, p, d, false).value;
            CHECK(std::abs(a - b) < 1e-8 * std::max(1.0, std::abs(a)));
            ++n;
        }
    }

    TEST_CASE("grid evaluation matches pointwise")
    {
        const SpectralData& d = small_data();
        std::vector<cplx> z1{{-1.2, 0.3}, {0.1, 0.6}, {0.9, 0.2}}, z2{{-0.5, 0.4}, {1.4, 0.2}};
        const Axis A1 = axis_from(z1, d.cfg), A2 = axis_from(z2, d.cfg);
        const GridValues gs = grid_eval(Formula::F1Single, A1, A2, d, Quantity::Psi, false);
        const GridValues gp = grid_eval(Formula::F1Single, A1, A2, d, Quantity::Psi, true);
        for (size_t i = 0; i < z1.size(); ++i)
            for (size_t j = 0; j < z2.size(); ++j) {
                const cplx ref = evaluate_with(Formula::F1Single, {z1[i], z2[j]}, d, false).value;
                const cplx v = gs.value[i * z2.size() + j];
                CHECK(std::abs(v - ref) < 1e-9 * std::max(1.0, std::abs(ref)));
                CHECK(std::abs(gp.value[i * z2.size() + j] - v) < 1e-14 * std::max(1.0, std::abs(v)));
            }
    }

    TEST_CASE("batch csv")
    {
        const SpectralData& d = small_data();
        std::istringstream in("re_a1,im_a1,re_a2,im_a2\n0.3,0.5,-0.2,0.4\n1.0,0.1,0.5,0.2\n-0.4,-0.01,0.3,0.01\n");
        std::ostringstream out;
        CHECK(eval_csv(in, out, d, Quantity::Psi) == 3);
        std::istringstream res(out.str());
        std::string line;
        std::getline(res, line);
        CHECK(line == "re_a1,im_a1,re_a2,im_a2,re_val,im_val,formula_used,err_est");
        int rows = 0;
        while (std::getline(res, line)) {
            const double err = std::stod(line.substr(line.rfind(',') + 1));
            CHECK(std::isfinite(err));
            ++rows;
        }
        CHECK(rows == 3);
    }

    TEST_CASE("Phi = K Psi++ in the strip")
    {
        const SpectralData& d = small_data();
        Gen g(21);
        for (int i = 0; i < 10; ++i) {
            const SpectralPoint p{g.box(-2, 2, -0.03, 0.03), g.box(-2, 2, -0.03, 0.03)};
            const cplx lhs = -kernel_K(p, d.cfg) * psi_pp(p, d).value - phi_34(p, d).value - forcing_P(p, d.cfg);
            CHECK(std::abs(lhs) < 1e-6 * std::abs(forcing_P(p, d.cfg)));
        }
    }
}
