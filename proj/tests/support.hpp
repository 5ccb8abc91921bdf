// Shared helpers for the unit tests.
#pragma once

#include "pwedge/kernel.hpp"

#include <random>

namespace testing_support {

using pwedge::cplx;

// Small-contrast configuration used across the suites.
inline pwedge::ProblemConfig small_contrast(double ratio = 1.05)
{
    const cplx k1(1.0, 0.4);
    return pwedge::ProblemConfig::make(k1, ratio * k1, 1.2 * pwedge::kPi);
}

inline pwedge::ProblemConfig degenerate()
{
    const cplx k1(1.0, 0.4);
    return pwedge::ProblemConfig::make(k1, k1, 1.2 * pwedge::kPi);
}

struct Gen {
    std::mt19937_64 rng;
    explicit Gen(unsigned long long seed) : rng(seed) {}
    double uniform(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
    cplx box(double re0, double re1, double im0, double im1) { return {uniform(re0, re1), uniform(im0, im1)}; }
};

}  // namespace testing_support
