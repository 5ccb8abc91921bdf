#include "pwedge/analysis.hpp"
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

const Trace& find(const TraceSet& s, TraceKind k)
{
    for (const auto& t : s.traces)
        if (t.kind == k) return t;
    throw std::runtime_error("trace kind missing");
}

}  // namespace

TEST_SUITE("analysis")
{
    TEST_CASE("baseline atlas layout")
    {
        const auto cfg = testing_support::small_contrast();
        const TraceSet psi = compute_traces(Owner::Psi, cfg);
        CHECK(psi.count(TraceKind::PolarLine) == 2);
        CHECK(psi.count(TraceKind::BranchLine) == 4);
        CHECK(psi.count(TraceKind::CircleArc) == 1);
        const Trace& arc = find(psi, TraceKind::CircleArc);
        const double R = cfg.k2.real();
        CHECK(arc.pts.front()[0] == doctest::Approx(-R).epsilon(1e-14));
        CHECK(std::abs(arc.pts.front()[1]) < 1e-14);
        CHECK(std::abs(arc.pts.back()[0]) < 1e-14);
        CHECK(arc.pts.back()[1] == doctest::Approx(-R).epsilon(1e-14));
        for (const auto& p : arc.pts) {
            CHECK(p[0] <= 0);
            CHECK(p[1] <= 0);
            CHECK(std::hypot(p[0], p[1]) == doctest::Approx(R).epsilon(1e-14));
        }
        // the Phi34 arc has the k1 radius
        const TraceSet p34 = compute_traces(Owner::Phi34, cfg);
        CHECK(find(p34, TraceKind::CircleArc).level == doctest::Approx(cfg.k1.real()));
    }

    TEST_CASE("K+o zeros sit on the arc")
    {
        const auto cfg = testing_support::small_contrast();
        const TraceSet psi = compute_traces(Owner::Psi, cfg);
        const ArcRootCheck rc = arc_roots(cfg, find(psi, TraceKind::CircleArc));
        CHECK(rc.all_left);
        CHECK(rc.max_radius_error < 1e-10);
        CHECK(rc.max_arc_distance < 1e-10);
        CHECK(rc.root.size() > 0);
    }

    TEST_CASE("extended regime line and the k switch")
    {
        const auto cfg = ProblemConfig::make({1, 0.4}, {1.3, 0.4}, 0.8 * kPi);
        REQUIRE(cfg.regime == Regime::Extended);
        TraceOptions o;
        const TraceSet a = compute_traces(Owner::Psi, cfg, o);
        o.extended_k = ExtendedK::K1;
        const TraceSet b = compute_traces(Owner::Psi, cfg, o);
        CHECK(a.count(TraceKind::PolarLine) == 3);
        CHECK(a.traces.size() == b.traces.size());
        const double a2 = cfg.a2.real();
        CHECK(a.traces.back().level == doctest::Approx(-std::sqrt(1.69 - a2 * a2)));
        CHECK(b.traces.back().level == doctest::Approx(-std::sqrt(1.0 - a2 * a2)));
        // baseline has no such line
        CHECK(compute_traces(Owner::Psi, testing_support::small_contrast()).count(TraceKind::PolarLine) == 2);
    }

    TEST_CASE("traces csv")
    {
        const auto cfg = testing_support::small_contrast();
        std::ostringstream os;
        write_traces_csv({compute_traces(Owner::Psi, cfg)}, os);
        const std::string s = os.str();
        CHECK(s.rfind("curve_id,kind,owner,t,a1,a2\n", 0) == 0);
        CHECK(s.find(std::string(",") + trace_kind_name(TraceKind::CircleArc) + ",") != std::string::npos);
    }

    TEST_CASE("corner sum sign")
    {
        const std::array<cplx, 4> v{cplx(1, 2), cplx(3, -1), cplx(0.5, 0.5), cplx(3.5, 0.5)};
        CHECK(std::abs(phi_ac_sum(v, true)) < 1e-15);
        CHECK(phi_ac_sum(v, true) == -phi_ac_sum(v, false));
        const std::array<cplx, 4> w{cplx(2, 0), 0.0, 0.0, 0.0};
        CHECK(phi_ac_sum(w, true) == cplx(2, 0));
    }

    TEST_CASE("edge function decomposition")
    {
        Gen g(31);
        const std::vector<cplx> pts{{0.2, 0.3}, {-0.6, -0.1}, {1.0, 0.5}};
        for (int trial = 0; trial < 3; ++trial) {
            const cplx p1 = g.box(2, 3, -1, 1), p2 = g.box(-3, -2, -1, 1), p3 = g.box(-1, 1, 2, 3),
                       p4 = g.box(-1, 1, -3, -2);
            auto F1 = [&](cplx a) { return 1.0 / (a - p1); };
            auto F2 = [&](cplx a) { return cplx(0, 2) / (a - p2); };
            auto F3 = [&](cplx a) { return 1.0 / ((a - p3) * (a - p3)); };
            auto F4 = [&](cplx a) { return cplx(0.5, -1) / ((a - p4) * (a - p1)); };
            const auto e = decompose_edge_functions(
                [&](cplx a1, cplx a2) { return F1(a2) + F2(a1) + a1 * F3(a2) + a2 * F4(a1); }, pts);
            for (size_t k = 0; k < pts.size(); ++k) {
                CHECK(std::abs(e.F1[k] - F1(pts[k])) < 1e-6);
                CHECK(std::abs(e.F2[k] - F2(pts[k])) < 1e-6);
                CHECK(std::abs(e.F3[k] - F3(pts[k])) < 1e-6);
                CHECK(std::abs(e.F4[k] - F4(pts[k])) < 1e-6);
            }
        }
    }

    TEST_CASE("additive crossing on the solved data")
    {
        const SpectralData& d = small_data();
        for (int j1 = 1; j1 <= 2; ++j1)
            for (int j2 = 1; j2 <= 2; ++j2) {
                const CrossingSample c = phi_ac(j1, 0.5, j2, 0.45, d);
                for (const auto& v : c.corners) CHECK(v.ok);
                CHECK(std::abs(c.phi_ac) < 1e-3 * c.max_corner);
            }
        std::vector<CrossingSample> v{phi_ac(1, 0.5, 2, 0.5, d)};
        std::ostringstream os;
        write_crossing_json(v, 1e-3, os);
        CHECK(os.str().find("\"rr\"") != std::string::npos);
    }
}
