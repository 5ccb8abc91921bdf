#include "pwedge/kernel.hpp"

#include <doctest.h>
#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path scratch(const std::string& name)
{
    const fs::path p = fs::temp_directory_path() / ("pwedge_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// runs the CLI, stdout and stderr to dir/log.txt; returns the exit status
int run(const fs::path& dir, const std::string& args)
{
    const std::string cmd = std::string(PWEDGE_CLI) + " " + args + " > " + (dir / "log.txt").string() + " 2>&1";
    const int st = std::system(cmd.c_str());
    return WIFEXITED(st) ? WEXITSTATUS(st) : -1;
}

fs::path write_config(const fs::path& dir, const std::string& name, const std::string& text)
{
    const fs::path p = dir / name;
    std::ofstream(p) << text;
    return p;
}

const char* kBaseline = R"({
  "k1_re": 1.0, "k1_im": 0.4,
  "k2_re": 1.05, "k2_im": 0.42,
  "theta0": 3.7699111843077517
})";

const char* kDegenerate = R"({
  "k1_re": 1.0, "k1_im": 0.4,
  "k2_re": 1.0, "k2_im": 0.4,
  "theta0": 3.7699111843077517
})";

const char* kExtended = R"({
  "k1_re": 1.0, "k1_im": 0.4,
  "k2_re": 1.05, "k2_im": 0.42,
  "theta0": 2.5132741228718345
})";

void check_manifest(const fs::path& dir)
{
    const json m = json::parse(slurp(dir / "manifest.json"));
    REQUIRE(m["outputs"].is_array());
    for (const auto& f : m["outputs"])
        CHECK(f["fnv1a"].get<std::string>() == pwedge::fnv1a_hex(slurp(dir / f["path"].get<std::string>())));
}

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("atlas writes the arc and is deterministic")
    {
        const fs::path d = scratch("atlas");
        const fs::path cfg = write_config(d, "c.json", kBaseline);
        REQUIRE(run(d, "atlas --config " + cfg.string() + " --out " + (d / "a").string()) == 0);
        REQUIRE(run(d, "atlas --config " + cfg.string() + " --out " + (d / "b").string()) == 0);
        const std::string csv = slurp(d / "a" / "traces.csv");
        CHECK(csv.rfind("curve_id,kind,owner,t,a1,a2", 0) == 0);
        CHECK(csv.find("psi-circle-k2,circle-arc,") != std::string::npos);
        check_manifest(d / "a");
        const json ma = json::parse(slurp(d / "a" / "manifest.json"));
        const json mb = json::parse(slurp(d / "b" / "manifest.json"));
        CHECK(ma["outputs"] == mb["outputs"]);
        CHECK(ma["config_hash"] == mb["config_hash"]);
        const json roots = json::parse(slurp(d / "a" / "arc_roots.json"));
        CHECK(roots["arcs"][0]["all_left"].get<bool>());
    }

    TEST_CASE("extended regime: atlas only")
    {
        const fs::path d = scratch("extended");
        const fs::path cfg = write_config(d, "c.json", kExtended);
        CHECK(run(d, "atlas --config " + cfg.string() + " --out " + (d / "o").string()) == 0);
        CHECK(slurp(d / "o" / "traces.csv").find("psi-extended") != std::string::npos);
        CHECK(run(d, "solve --config " + cfg.string() + " --out " + (d / "s").string()) == 2);
        CHECK_FALSE(fs::exists(d / "s" / "manifest.json"));
        CHECK(run(d, "atlas --theta0-regime baseline --config " + cfg.string() + " --out " + (d / "o2").string()) == 2);
    }

    TEST_CASE("config errors carry a line and exit 2")
    {
        const fs::path d = scratch("config");
        const fs::path missing = write_config(d, "m.json", "{\n  \"k1_re\": 1.0,\n  \"k1_im\": 0.4\n}\n");
        CHECK(run(d, "atlas --config " + missing.string()) == 2);
        const std::string log = slurp(d / "log.txt");
        CHECK(log.find("line") != std::string::npos);
        CHECK(log.find("k2_re") != std::string::npos);
        const fs::path bad = write_config(d, "b.json", "{\n  \"k1_re\": 1.0,\n  \"k1_im\": \"x\"\n}\n");
        CHECK(run(d, "atlas --config " + bad.string()) == 2);
        CHECK(slurp(d / "log.txt").find("line 3") != std::string::npos);
        CHECK(run(d, "atlas --config " + (d / "none.json").string()) == 2);
        CHECK(run(d, "bogus") == 2);
    }

    TEST_CASE("degenerate solve, eval and fields")
    {
        const fs::path d = scratch("degenerate");
        const fs::path cfg = write_config(d, "c.json", kDegenerate);
        REQUIRE(run(d, "solve --config " + cfg.string() + " --out " + (d / "s").string()) == 0);
        const json m = json::parse(slurp(d / "s" / "manifest.json"));
        CHECK(m["metrics"]["iterations"] == 1);
        CHECK(m["metrics"]["converged"] == true);
        check_manifest(d / "s");

        std::ofstream(d / "q.csv") << "re_a1,im_a1,re_a2,im_a2\n0.3,0.5,-0.2,0.4\n1.0,0.1,0.5,0.2\n-0.4,0.01,0.3,0.01\n";
        const std::string ck = (d / "s" / "spectral.ckpt").string();
        REQUIRE(run(d, "eval --config " + cfg.string() + " --data " + ck + " --input " + (d / "q.csv").string() +
                           " --out " + (d / "e").string()) == 0);
        std::istringstream rows(slurp(d / "e" / "eval.csv"));
        std::string line;
        std::getline(rows, line);
        int n = 0;
        while (std::getline(rows, line)) {
            CHECK(std::isfinite(std::stod(line.substr(line.rfind(',') + 1))));
            ++n;
        }
        CHECK(n == 3);

        REQUIRE(run(d, "fields --config " + cfg.string() + " --data " + ck + " --lo 0.5 --hi 1.5 --n 2 --out " +
                           (d / "f").string()) == 0);
        std::istringstream f(slurp(d / "f" / "fields.csv"));
        std::getline(f, line);
        CHECK(line == "x1,x2,re,im,which,err_est");
        n = 0;
        while (std::getline(f, line)) ++n;
        CHECK(n == 4);
        check_manifest(d / "f");
    }

    TEST_CASE("selftest fast passes and names an injected fault")
    {
        const fs::path d = scratch("selftest");
        CHECK(run(d, "selftest --profile fast --out " + (d / "ok").string()) == 0);
        const json r = json::parse(slurp(d / "ok" / "selftest.json"));
        CHECK(r["pass"] == true);
        CHECK(run(d, "selftest --profile fast --inject-fault kernel-sign --out " + (d / "bad").string()) == 3);
        const std::string log = slurp(d / "log.txt");
        CHECK(log.find("FAIL factorization") != std::string::npos);
        const json b = json::parse(slurp(d / "bad" / "selftest.json"));
        CHECK(b["pass"] == false);
    }
}
