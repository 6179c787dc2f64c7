#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "levycouple/cli.hpp"
#include "levycouple/config.hpp"
#include "levycouple/io.hpp"

using namespace levycouple;
using nlohmann::json;

namespace {

struct RunResult {
    int code = 0;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

// Jump-size lattice whose refined basic coupling has nontrivial contract and
// expand rows at distance 0.3 with kappa 0.5.
const char* kDiscreteConfig = R"({
  "dimension": 1,
  "measure": {"kind": "discrete",
              "atoms": [{"location": [0.3], "mass": 1.0},
                        {"location": [-0.3], "mass": 1.0},
                        {"location": [0.6], "mass": 1.0},
                        {"location": [-0.6], "mass": 1.0}]},
  "drift": {"kind": "zero"},
  "scheme": {"kind": "basic", "kappa": 0.5},
  "x0": [0.3],
  "y0": [0.0]
})";

const char* kFastStableConfig = R"({
  "measure": {"kind": "stable", "alpha": 1.0, "c": 0.1},
  "truncation": {"epsilon": 0.01},
  "simulation": {"max_step": 0.005, "horizon": 0.5, "record_drift": false},
  "scheme": {"kind": "basic"},
  "grids": {"t": [0.25, 0.5], "delta": [0.05, 0.1]},
  "n_paths": 60,
  "seed": 7
})";

struct TempFile {
    std::string path;
    explicit TempFile(std::string p, const std::string& content = "") : path(std::move(p)) {
        if (!content.empty()) io::write_file_atomic(path, content);
    }
    ~TempFile() { std::remove(path.c_str()); }
};

} // namespace

TEST_CASE("print-config emits the canonical default document") {
    auto result = run_cli({"print-config"});
    REQUIRE(result.code == 0);
    auto cfg = config::parse_config(result.out);
    CHECK(config::serialize_config(cfg) == result.out);
    CHECK(result.err.find("FNV hash") != std::string::npos);
}

TEST_CASE("help and usage errors map to exit codes") {
    CHECK(run_cli({"--help"}).code == 0);
    CHECK(run_cli({}).code == 1);
    CHECK(run_cli({"frobnicate"}).code == 1);

    auto bad_scheme = run_cli({"tail", "--scheme", "bogus"});
    CHECK(bad_scheme.code == 1);
    CHECK(bad_scheme.err.find("scheme") != std::string::npos);

    auto bad_format = run_cli({"tail", "--format", "xml"});
    CHECK(bad_format.code == 1);

    auto missing = run_cli({"tail", "--config", "no_such_file.json"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("no_such_file.json") != std::string::npos);
}

TEST_CASE("unknown config keys exit 1 and name the key") {
    TempFile cfg("cli_bad_key.json", R"({"simulation": {"max_steps": 1}})");
    auto result = run_cli({"tail", "--config", cfg.path});
    CHECK(result.code == 1);
    CHECK(result.err.find("simulation.max_steps") != std::string::npos);
}

TEST_CASE("verify reports exact defects for a discrete lattice") {
    TempFile cfg("cli_verify.json", kDiscreteConfig);
    auto result = run_cli({"verify", "--config", cfg.path});
    REQUIRE(result.code == 0);
    json report = json::parse(result.out);
    CHECK(report.at("marginality_defect").get<double>() <= 1e-12);
    CHECK(report.at("symmetry_defect").get<double>() <= 1e-12);
    CHECK(report.at("marginality_ok").get<bool>());
    CHECK(report.at("symmetry_ok").get<bool>());
    REQUIRE(report.at("rows").is_array());
    CHECK(report.at("rows").size() >= 4);

    bool has_contract = false;
    for (const auto& row : report.at("rows"))
        if (row.at("label").get<std::string>().find("contract") != std::string::npos)
            has_contract = true;
    CHECK(has_contract);

    auto on_continuum = run_cli({"verify"});
    CHECK(on_continuum.code == 1);
}

TEST_CASE("simulate rewrites byte-identical artifacts for a fixed seed") {
    TempFile cfg("cli_sim.json", kFastStableConfig);
    TempFile a("cli_sim_a.csv"), a_summary("cli_sim_a.json");
    TempFile b("cli_sim_b.csv"), b_summary("cli_sim_b.json");

    auto first = run_cli({"simulate", "--config", cfg.path, "--paths", "10", "--out", a.path});
    REQUIRE(first.code == 0);
    auto second = run_cli({"simulate", "--config", cfg.path, "--paths", "10", "--out", b.path});
    REQUIRE(second.code == 0);
    CHECK(io::read_file(a.path) == io::read_file(b.path));
    CHECK(io::read_file(a_summary.path) == io::read_file(b_summary.path));

    std::string csv = io::read_file(a.path);
    CHECK(csv.rfind("path,t,x_1,y_1,event_type\n", 0) == 0);
    CHECK(csv.find('\r') == std::string::npos);

    // A different worker count must not change the artifact bytes.
    ::setenv("LEVY_COUPLE_THREADS", "3", 1);
    auto threaded = run_cli({"simulate", "--config", cfg.path, "--paths", "10", "--out", b.path});
    ::unsetenv("LEVY_COUPLE_THREADS");
    REQUIRE(threaded.code == 0);
    CHECK(io::read_file(a.path) == io::read_file(b.path));

    auto reseeded = run_cli({"simulate", "--config", cfg.path, "--paths", "10", "--seed", "8",
                             "--out", b.path});
    REQUIRE(reseeded.code == 0);
    CHECK(io::read_file(a.path) != io::read_file(b.path));
}

TEST_CASE("tail writes a csv table with a json summary sidecar") {
    TempFile cfg("cli_tail.json", kFastStableConfig);
    TempFile table("cli_tail_out.csv"), sidecar("cli_tail_out.json");
    auto result = run_cli({"tail", "--config", cfg.path, "--out", table.path});
    REQUIRE(result.code == 0);
    CHECK(result.out.find(table.path) != std::string::npos);

    std::string csv = io::read_file(table.path);
    CHECK(csv.rfind("t,estimate,std_error\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

    json summary = json::parse(io::read_file(sidecar.path));
    CHECK(summary.at("command") == "tail");
    CHECK(summary.at("n_paths") == 60);
    CHECK(summary.at("seed") == 7);
    CHECK(summary.at("config_hash").is_number_unsigned());
}

TEST_CASE("estimator subcommands run end to end from one config") {
    TempFile cfg("cli_smoke.json", kFastStableConfig);

    auto tv = run_cli({"tv", "--config", cfg.path, "--paths", "80"});
    REQUIRE(tv.code == 0);
    CHECK(tv.out.rfind("t,upper,upper_std_error,lower,lower_std_error\n", 0) == 0);

    auto regularity =
        run_cli({"regularity", "--config", cfg.path, "--paths", "50", "--format", "json"});
    REQUIRE(regularity.code == 0);
    json reg = json::parse(regularity.out);
    CHECK(reg.at("summary").at("command") == "regularity");
    CHECK(reg.at("rows").size() == 4);

    auto driftcheck = run_cli({"driftcheck", "--config", cfg.path});
    REQUIRE(driftcheck.code == 0);
    CHECK(driftcheck.out.rfind("delta,value,contracting\n", 0) == 0);
    CHECK(driftcheck.out.find("true") != std::string::npos);

    auto compare = run_cli({"compare", "--config", cfg.path});
    REQUIRE(compare.code == 0);
    CHECK(compare.out.rfind("x_1,y_1,reflection,combined,basic\n", 0) == 0);
}

TEST_CASE("numeric failures exit 2") {
    TempFile cfg("cli_numeric.json", R"({
      "scheme": {"kind": "reflection"},
      "drift": {"kind": "linear", "k": 200.0},
      "grids": {"delta": [0.1, 0.5]}
    })");
    auto result = run_cli({"driftcheck", "--config", cfg.path});
    CHECK(result.code == 2);
    CHECK(result.err.find("numeric error") != std::string::npos);
}
