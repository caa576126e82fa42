#include <doctest.h>

#include <cstdlib>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "support.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code;
    std::string out;
};

Run cli(const std::string& args, const fs::path& log) {
    std::string cmd = std::string("\"") + GEPPML_CLI + "\" " + args + " > \"" + log.string() + "\" 2>&1";
    int status = std::system(cmd.c_str());
    int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return {code, support::read_text(log)};
}

const char* kScenario = R"(name = "chl-usa"
evaluation_year = 2008
reference_country = "DEU"
add = [["CHL", "USA"]]
)";

// Synthetic panel, estimate and scenario file under one scratch directory.
fs::path prepared(const std::string& name) {
    auto dir = support::scratch(name);
    auto log = dir / "log.txt";
    auto s = cli("synth --out \"" + (dir / "data").string() +
                     "\" --countries 6 --seed 3 --fta-share 0.3 --codes AUS,CHL,DEU,JPN,MEX,USA",
                 log);
    REQUIRE_MESSAGE(s.code == 0, s.out);
    auto e = cli("estimate --data \"" + (dir / "data").string() + "\" --out \"" + (dir / "est").string() + "\"", log);
    REQUIRE_MESSAGE(e.code == 0, e.out);
    support::write_text(dir / "scenario.toml", kScenario);
    return dir;
}

std::string sim_args(const fs::path& dir, const std::string& out, const std::string& extra = "") {
    return "simulate --baseline \"" + (dir / "est" / "baseline.json").string() + "\" --scenario \"" +
           (dir / "scenario.toml").string() + "\" --out \"" + (dir / out).string() + "\" " + extra;
}

}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("usage and input errors exit with 1") {
        auto dir = support::scratch("cli_usage");
        auto log = dir / "log.txt";
        CHECK(cli("", log).code == 1);
        CHECK(cli("simulate --out x", log).code == 1);
        fs::create_directories(dir / "empty");
        support::write_text(dir / "empty" / "flows.csv", "exporter,importer,year,flow\n");
        support::write_text(dir / "empty" / "covariates.csv", "exporter,importer,log_dist,cntg,lang,clny\n");
        support::write_text(dir / "empty" / "fta.csv", "exporter,importer,year,fta\n");
        auto r = cli("estimate --data \"" + (dir / "empty").string() + "\" --out \"" + (dir / "o").string() + "\"", log);
        CHECK(r.code == 1);
        CHECK(r.out.find("error") != std::string::npos);
    }

    TEST_CASE("pipeline runs, verifies and repeats byte for byte") {
        auto dir = prepared("cli_pipeline");
        auto log = dir / "log.txt";
        auto a = cli(sim_args(dir, "a"), log);
        REQUIRE_MESSAGE(a.code == 0, a.out);
        CHECK(a.out.find("CHL ") != std::string::npos);
        CHECK(a.out.find("converged") != std::string::npos);
        auto b = cli(sim_args(dir, "b"), log);
        REQUIRE(b.code == 0);
        for (const char* f : {"outcome.csv", "outcome_display.csv", "trace.csv", "ge_state.json"}) {
            CHECK_MESSAGE(support::read_text(dir / "a" / f) == support::read_text(dir / "b" / f), f);
        }
        auto v = cli("verify --run \"" + (dir / "a").string() + "\"", log);
        CHECK_MESSAGE(v.code == 0, v.out);
        CHECK(v.out.find("FAIL") == std::string::npos);
        auto ve = cli("verify --run \"" + (dir / "est").string() + "\"", log);
        CHECK_MESSAGE(ve.code == 0, ve.out);
    }

    TEST_CASE("verify echoes tolerances and catches corruption") {
        auto dir = prepared("cli_verify");
        auto log = dir / "log.txt";
        REQUIRE(cli(sim_args(dir, "run"), log).code == 0);
        auto t = cli("verify --run \"" + (dir / "run").string() + "\" --clearing-tol 1e-07 --price-tol 1e-06", log);
        CHECK(t.out.find("clearing=1e-07") != std::string::npos);
        CHECK(t.out.find("price=1e-06") != std::string::npos);
        CHECK(t.code == 4);

        auto file = dir / "run" / "outcome.csv";
        std::istringstream in(support::read_text(file));
        std::string line, text;
        while (std::getline(in, line)) {
            if (line.rfind("MEX,", 0) == 0) {
                line = line.substr(0, line.rfind(',')) + ",3.5";
            }
            text += line + "\n";
        }
        support::write_text(file, text);
        auto v = cli("verify --run \"" + (dir / "run").string() + "\"", log);
        CHECK(v.code == 4);
        CHECK(v.out.find("FAIL") != std::string::npos);
        CHECK(v.out.find("MEX") != std::string::npos);
    }

    TEST_CASE("non-convergence exits with 3 and keeps the trace") {
        auto dir = prepared("cli_noconv");
        auto log = dir / "log.txt";
        auto r = cli(sim_args(dir, "run", "--max-outer-iter 1"), log);
        CHECK(r.code == 3);
        CHECK(fs::exists(dir / "run" / "trace.csv"));
        auto bad = cli(sim_args(dir, "bad", "--damping 2"), log);
        CHECK(bad.code == 1);
    }
}

TEST_SUITE("cli") {
    TEST_CASE("malformed run state is an input error") {
        auto dir = prepared("cli_malformed");
        auto log = dir / "log.txt";
        REQUIRE(cli(sim_args(dir, "run"), log).code == 0);
        support::write_text(dir / "run" / "ge_state.json", "{\"countries\": 3}");
        auto v = cli("verify --run \"" + (dir / "run").string() + "\"", log);
        CHECK(v.code == 1);
        CHECK(v.out.find("malformed") != std::string::npos);
    }
}
