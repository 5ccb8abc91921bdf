// One line per acceptance criterion; nonzero exit if any fails.
#include "suite.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

int main(int argc, char** argv)
{
    pwedge::suite::Context ctx;
    std::vector<pwedge::suite::CheckResult> out;
    int failed = 0;
    for (const auto& id : pwedge::suite::primary_ids()) {
        out.push_back(pwedge::suite::run_check(id, ctx));
        if (!out.back().pass) ++failed;
        std::printf("%s (%.1f s)\n", pwedge::suite::format_line(out.back()).c_str(), out.back().seconds);
        std::fflush(stdout);
    }
    if (argc > 2 && std::strcmp(argv[1], "--json") == 0) std::ofstream(argv[2]) << pwedge::suite::report_json(out, "acceptance");
    std::printf("%d/%zu criteria pass\n", static_cast<int>(out.size()) - failed, out.size());
    return failed ? 1 : 0;
}
