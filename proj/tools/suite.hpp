// Invariant checks shared by the acceptance binary and `pwedge selftest`.
#pragma once

#include "pwedge/solver.hpp"

#include <memory>
#include <string>
#include <vector>

namespace pwedge::suite {

struct CheckResult {
    std::string id;
    std::string module;
    std::string title;
    bool pass = false;
    double value = 0;  // the measured quantity compared against tol
    double tol = 0;
    double seconds = 0;
    std::string detail;
};

struct SuiteOptions {
    bool inject_kernel_sign = false;  // test fixture: flips K+o in the factorization check
    bool parallel = true;
};

// Lazily solved data shared between checks.
class Context {
public:
    explicit Context(const SuiteOptions& o = {}) : opt(o) {}
    const SpectralData& small_contrast();
    const SpectralData& degenerate(SolveReport* rep = nullptr);
    SuiteOptions opt;

private:
    std::unique_ptr<SpectralData> small_, degen_;
    SolveReport degen_report_;
};

// The twelve acceptance criteria, in order.
const std::vector<std::string>& primary_ids();
// Checks cheap enough for the fast self-test profile.
const std::vector<std::string>& fast_ids();

CheckResult run_check(const std::string& id, Context& ctx);
std::string format_line(const CheckResult& r);
std::string report_json(const std::vector<CheckResult>& v, const std::string& profile);

}  // namespace pwedge::suite
