#include "pwedge/kernel.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace pwedge;
using testing_support::Gen;

TEST_SUITE("kernel")
{
    TEST_CASE("sqrt_arrow examples")
    {
        CHECK(sqrt_arrow(1.0) == cplx(1.0, 0.0));
        CHECK(std::abs(sqrt_arrow(-4.0) - cplx(0, 2)) < 1e-15);
        CHECK(std::abs(sqrt_arrow(cplx(0, 2)) - cplx(1, 1)) < 1e-15);
        CHECK(std::abs(sqrt_arrow(cplx(4, -1e-12)) - cplx(-2, 0)) < 1e-9);
        CHECK(sqrt_arrow(0.0) == cplx(0.0));
        // negative zero imaginary part still counts as the cut from above
        CHECK(sqrt_arrow(cplx(4.0, -0.0)) == cplx(2.0, 0.0));
    }

    TEST_CASE("sqrt_arrow properties")
    {
        Gen g(11);
        for (int i = 0; i < 10000; ++i) {
            const cplx z = g.box(-50, 50, -50, 50);
            const cplx s = sqrt_arrow(z);
            CHECK(s.imag() >= 0);
            CHECK(std::abs(s * s - z) <= 1e-14 * std::abs(z));
        }
    }

    TEST_CASE("sided square root on the cut")
    {
        CHECK(sqrt_arrow_dir(4.0, cplx(0, 1)) == cplx(2.0));
        CHECK(sqrt_arrow_dir(4.0, cplx(0, -1)) == cplx(-2.0));
        CHECK(sqrt_arrow_dir(cplx(4, 1), cplx(0, -1)) == sqrt_arrow(cplx(4, 1)));
    }

    TEST_CASE("kappa examples")
    {
        const auto cfg = testing_support::small_contrast();
        CHECK(std::abs(kappa(2, 0.0, cfg) - cfg.k2) < 1e-15);
        CHECK(std::abs(kappa(1, cfg.k1, cfg)) == 0.0);
        Gen g(3);
        for (int i = 0; i < 100; ++i) {
            const cplx z = g.box(-5, 5, -5, 5);
            CHECK(kappa(1, z, cfg) == kappa(1, -z, cfg));
        }
    }

    TEST_CASE("kernel examples")
    {
        const auto cfg = testing_support::small_contrast();
        CHECK(std::abs(kernel_K({0.0, 0.0}, cfg) - cfg.k2 * cfg.k2 / (cfg.k1 * cfg.k1)) < 1e-15);
        const auto deg = testing_support::degenerate();
        CHECK(kernel_K({cplx(0.3, 0.1), cplx(-2, 0.5)}, deg) == cplx(1.0));
        CHECK(std::abs(kernel_K({cplx(1e7, 0), cplx(0.5, 0.1)}, cfg) - 1.0) < 1e-12);
        const auto kp = kernel_parts({cplx(0.2), cplx(0.3)}, cfg);
        CHECK(std::abs(kp.value() - kernel_K({cplx(0.2), cplx(0.3)}, cfg)) == 0.0);
    }

    TEST_CASE("factorization identity at random points")
    {
        const auto cfg = testing_support::small_contrast();
        Gen g(5);
        int done = 0;
        while (done < 1000) {
            const SpectralPoint p{g.box(-6, 6, -3, 3), g.box(-6, 6, -3, 3)};
            const cplx K = kernel_K(p, cfg);
            const double tol = 1e-12 * std::max(1.0, std::abs(K));
            const cplx a = factor(Factor::PlusO, p, cfg) * factor(Factor::MinusO, p, cfg);
            const cplx b = factor(Factor::OPlus, p, cfg) * factor(Factor::OMinus, p, cfg);
            CHECK(std::abs(a - K) < tol);
            CHECK(std::abs(b - K) < tol);
            CHECK(std::abs(factor_inv(Factor::PlusO, p, cfg) * factor(Factor::PlusO, p, cfg) - 1.0) < 1e-13);
            ++done;
        }
    }

    TEST_CASE("factor examples and zero set")
    {
        const auto cfg = testing_support::small_contrast();
        const cplx a2(0.4, 0.05);
        const SpectralPoint p0{0.0, a2};
        CHECK(std::abs(factor(Factor::PlusO, p0, cfg) - kappa(2, a2, cfg) / kappa(1, a2, cfg)) < 1e-14);
        const SpectralPoint pz{-kappa(2, a2, cfg), a2};
        CHECK(factor(Factor::PlusO, pz, cfg) == cplx(0.0));
        CHECK_THROWS_AS(factor_inv(Factor::PlusO, pz, cfg), PoleError);
        const SpectralPoint pp{-kappa(1, a2, cfg), a2};
        CHECK_THROWS_AS(factor(Factor::PlusO, pp, cfg), PoleError);
    }

    TEST_CASE("degenerate factors are one")
    {
        const auto cfg = testing_support::degenerate();
        Gen g(9);
        for (int i = 0; i < 200; ++i) {
            const SpectralPoint p{g.box(-4, 4, -2, 2), g.box(-4, 4, -2, 2)};
            for (Factor f : {Factor::PlusO, Factor::MinusO, Factor::OPlus, Factor::OMinus}) CHECK(factor(f, p, cfg) == cplx(1.0));
            CHECK(kernel_K(p, cfg) == cplx(1.0));
        }
    }

    TEST_CASE("forcing term")
    {
        const auto cfg = testing_support::small_contrast();
        CHECK(std::abs(forcing_P({cfg.a1 + 1.0, cfg.a2 + 1.0}, cfg) - 1.0) < 1e-15);
        const auto c2 = ProblemConfig::make({2, 0.1}, {2.1, 0.1}, 1.25 * kPi);
        // direct arithmetic: 1/(2 * (-i)) = i/2
        CHECK(std::abs(forcing_P({c2.a1 + 2.0, c2.a2 - kI}, c2) - cplx(0, 0.5)) < 1e-15);
        CHECK_THROWS_AS(forcing_P({cfg.a1, cfg.a2 + 1.0}, cfg), PoleError);
        // residue in alpha1 at a1: (alpha1 - a1) P -> 1/(alpha2 - a2)
        const cplx a2 = 0.3;
        const cplx h = 1e-7;
        CHECK(std::abs(h * forcing_P({cfg.a1 + h, a2}, cfg) - 1.0 / (a2 - cfg.a2)) < 1e-8);  // rounding in (a1 + h) - a1
    }

    TEST_CASE("derived constants")
    {
        const auto cfg = ProblemConfig::make({1, 0.3}, {1.2, 0.3}, 1.3 * kPi, 0.01);
        CHECK(cfg.epsilon == cfg.delta / 2);
        CHECK(cfg.a1 == cfg.k1 * std::cos(cfg.theta0));
        CHECK(cfg.a2 == cfg.k1 * std::sin(cfg.theta0));
        CHECK(cfg.regime == Regime::Baseline);
        CHECK(cfg.a1.imag() <= -cfg.delta + 1e-15);
        CHECK(cfg.a2.imag() <= -cfg.delta + 1e-15);
        CHECK(ProblemConfig::make({1, 0.3}, {1.2, 0.3}, 0.8 * kPi).regime == Regime::Extended);
        CHECK_THROWS_AS(ProblemConfig::make({1, 0.3}, {1.2, 0.3}, kPi), ConfigError);
        CHECK_THROWS_AS(ProblemConfig::make({1, 0.3}, {1.2, 0.3}, 0.3), ConfigError);
        CHECK_THROWS_AS(ProblemConfig::make({1, 0.0}, {1.2, 0.3}, 1.2 * kPi), ConfigError);
        CHECK_THROWS_AS(ProblemConfig::make({1, 0.3}, {1.2, 0.3}, 1.2 * kPi, 1.0), ConfigError);
        // unequal imaginary parts
        const auto u = ProblemConfig::make({1, 0.3}, {1.2, 0.05}, 1.3 * kPi);
        CHECK(u.epsilon == 0.5 * std::min(u.delta, 0.05));
    }

    TEST_CASE("json config")
    {
        const auto c = ProblemConfig::from_json_text(
            R"({"k1_re":1,"k1_im":0.4,"k2_re":1.05,"k2_im":0.42,"theta0":3.7699111843077517,"b0":0.02})");
        CHECK(c.k2 == cplx(1.05, 0.42));
        CHECK(c.b0 == 0.02);
        const auto back = ProblemConfig::from_json_text(c.to_json_text());
        CHECK(back.hash() == c.hash());
        CHECK(back.a1 == c.a1);
        CHECK_THROWS_AS(ProblemConfig::from_json_text(R"({"k1_re":1})"), ConfigError);
        CHECK_THROWS_AS(ProblemConfig::from_json_text("{bad"), ConfigError);
    }
}
