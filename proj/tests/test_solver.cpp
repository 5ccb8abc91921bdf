#include "pwedge/solver.hpp"
#include "support.hpp"

#include <doctest.h>

#include <sstream>

using namespace pwedge;
using testing_support::Gen;

namespace {

const std::pair<SpectralData, SolveReport>& small_solved()
{
    static const auto r = solve(testing_support::small_contrast());
    return r;
}

}  // namespace

TEST_SUITE("solver")
{
    TEST_CASE("degenerate contrast stops after one sweep")
    {
        const auto [d, rep] = solve(testing_support::degenerate());
        CHECK(rep.iterations == 1);
        CHECK(rep.converged);
        CHECK(rep.wh_residual < 1e-12 * rep.wh_scale);
        // Psi++ = -P everywhere in S x S
        Gen g(3);
        for (int i = 0; i < 20; ++i) {
            const SpectralPoint p{g.box(-3, 3, -0.05, 0.05), g.box(-3, 3, -0.05, 0.05)};
            const cplx P = forcing_P(p, d.cfg);
            CHECK(std::abs(psi_pp(p, d).value + P) < 1e-10 * std::abs(P));
        }
    }

    TEST_CASE("small contrast converges")
    {
        const auto& [d, rep] = small_solved();
        REQUIRE(rep.converged);
        CHECK_FALSE(rep.diverged);
        CHECK(rep.iterations > 1);
        // relative stopping rule: the last update is below tol_residual times the data scale
        CHECK(std::max(rep.history_g.back(), rep.history_h.back()) < 1e-10);
        CHECK(rep.history_g.back() < rep.history_g.front());
        CHECK(rep.wh_residual < 1e-4 * rep.wh_scale);
        CHECK(d.closure_error < 1e-6);
        CHECK(d.provenance.converged);
    }

    TEST_CASE("serial and parallel sweeps agree")
    {
        SolverConfig s;
        s.base_grids = false;
        SpectralData a = seed(testing_support::small_contrast(), s);
        SpectralData b = a;
        const Closure cs = build_closure(a, false);
        const Closure cp = build_closure(b, true);
        REQUIRE(cs.M.size() == cp.M.size());
        double dm = 0;
        for (size_t i = 0; i < cs.M.size(); ++i) dm = std::max(dm, std::abs(cs.M[i] - cp.M[i]));
        CHECK(dm == 0.0);
        iterate_once(a, cs, 0.7, false);
        iterate_once(b, cp, 0.7, true);
        double dg = 0;
        for (size_t i = 0; i < a.g.size(); ++i) dg = std::max(dg, std::abs(a.g[i] - b.g[i]));
        CHECK(dg < 1e-14);
    }

    TEST_CASE("checkpoint round trip")
    {
        const auto& d = small_solved().first;
        std::stringstream ss;
        save_checkpoint(d, ss);
        const SpectralData e = load_checkpoint(ss);
        CHECK(e.cfg.hash() == d.cfg.hash());
        REQUIRE(e.g.size() == d.g.size());
        for (size_t i = 0; i < d.g.size(); ++i) {
            CHECK(e.g[i] == d.g[i]);
            CHECK(e.h[i] == d.h[i]);
        }
        for (int j = 0; j < 2; ++j) CHECK(e.gP[j] == d.gP[j]);
        const SpectralPoint p{{0.3, 0.5}, {-0.4, 0.7}};
        CHECK(psi_pp(p, e).value == psi_pp(p, d).value);
        std::stringstream bad("not a checkpoint\n");
        CHECK_THROWS_AS(load_checkpoint(bad), ConfigError);
    }

    TEST_CASE("relaxation range")
    {
        SolverConfig s;
        s.theta = 1.5;
        CHECK_THROWS_AS(solve(testing_support::small_contrast(), s), ConfigError);
    }

    TEST_CASE("decay fit")
    {
        std::vector<double> r;
        std::vector<cplx> f;
        for (double x = 10; x < 1000; x *= 1.5) {
            r.push_back(x);
            f.push_back(cplx(2, 1) * std::pow(x, -1.5));
        }
        const DecayFit fit = fit_decay(r, f);
        CHECK(fit.exponent == doctest::Approx(1.5).epsilon(1e-10));
        CHECK(fit.residual < 1e-10);
    }

    TEST_CASE("slice data decays")
    {
        const EdgeReport e = edge_condition_check(small_solved().first);
        CHECK(e.g.exponent > 0.5);
        CHECK(e.h.exponent > 0.5);
        CHECK(e.line.exponent > 0.5);
    }
}
