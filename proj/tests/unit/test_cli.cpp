#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "xbar/metrics.hpp"

namespace fs = std::filesystem;

namespace {

struct Run {
    int code = -1;
    std::string output;  // stdout and stderr
};

fs::path workdir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / "xbar_test_cli";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

Run xbar_dse(const std::string& args, const std::string& env = "") {
    const std::string cmd = "cd '" + workdir().string() + "' && " + env + " '" + XBAR_DSE_BIN + "' " + args + " 2>&1";
    Run r;
    FILE* p = popen(cmd.c_str(), "r");
    REQUIRE(p != nullptr);
    char buf[4096];
    std::size_t n;
    while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.output.append(buf, n);
    const int status = pclose(p);
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream s;
    s << f.rdbuf();
    return s.str();
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

// Every output except the manifest, and the manifest without its wall time.
void check_same_run(const fs::path& a, const fs::path& b) {
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(workdir() / a)) {
        const auto name = e.path().filename();
        REQUIRE(fs::exists(workdir() / b / name));
        if (name == "manifest.json") {
            auto ma = nlohmann::json::parse(slurp(e.path()));
            auto mb = nlohmann::json::parse(slurp(workdir() / b / name));
            ma.erase("wall_time_s");
            mb.erase("wall_time_s");
            CHECK(ma == mb);
        } else {
            CHECK_MESSAGE(slurp(e.path()) == slurp(workdir() / b / name), name.string());
        }
        ++files;
    }
    CHECK(files >= 2);
}

}  // namespace

TEST_CASE("solve prints the 1x1 FeFET column current") {
    const Run r = xbar_dse("solve --tech fefet --rows 1 --cols 1 --input 1 --weight 1 --out solve1");
    REQUIRE(r.code == 0);
    CHECK(contains(r.output, "4.1164"));
    std::istringstream csv(slurp(workdir() / "solve1" / "currents.csv"));
    std::string header, row;
    std::getline(csv, header);
    std::getline(csv, row);
    CHECK(header == "group,column,current_a,ideal_a,device_ideal_a,nf");
    const double i = std::stod(row.substr(4, row.find(',', 4) - 4));
    CHECK(i == doctest::Approx(4.1165e-6).epsilon(1e-4));
    const auto m = nlohmann::json::parse(slurp(workdir() / "solve1" / "manifest.json"));
    CHECK(m["format"] == "xbar-manifest");
    CHECK(m["config"]["array"]["rows"] == 1);
    CHECK(m["outputs"] == nlohmann::json::array({"currents.csv"}));
    CHECK(m.contains("wall_time_s"));
    CHECK(m["versions"].contains("xbar-dse"));
}

TEST_CASE("outputs are not overwritten without --force") {
    const std::string args = "solve --rows 2 --cols 2 --input 10 --weight 1101 --voltages --netlist --out solve2";
    REQUIRE(xbar_dse(args).code == 0);
    CHECK(fs::exists(workdir() / "solve2" / "voltages.csv"));
    CHECK(fs::exists(workdir() / "solve2" / "netlist.txt"));
    const Run again = xbar_dse(args);
    CHECK(again.code == 1);
    CHECK(contains(again.output, "--force"));
    CHECK(xbar_dse(args + " --force").code == 0);
}

TEST_CASE("usage errors exit 1 with a message") {
    Run r = xbar_dse("nf --rows 4 --cols 4 --out nf_noseed");
    CHECK(r.code == 1);
    CHECK(contains(r.output, "seed"));
    CHECK_FALSE(fs::exists(workdir() / "nf_noseed"));

    r = xbar_dse("nf --seed 1 --set parasitcs.wire_res=0 --out nf_typo");
    CHECK(r.code == 1);
    CHECK(contains(r.output, "did you mean 'parasitics'"));

    CHECK(xbar_dse("").code == 1);
    CHECK(xbar_dse("frobnicate").code == 1);
    CHECK(xbar_dse("nf --bogus").code == 1);
    CHECK(xbar_dse("nf --seed 1 --rows abc").code == 1);
    CHECK(xbar_dse("solve --tech flash").code == 1);
    CHECK(xbar_dse("solve --config /nonexistent.json").code == 1);
    CHECK(xbar_dse("solve --rows 2 --input 101 --out bad_bits").code == 1);
    CHECK(xbar_dse("infer --mode surrogate --out no_net").code == 1);
    CHECK(xbar_dse("nf --seed 1 --rows 4 --cols 4", "XBAR_DSE_THREADS=zero").code == 1);
    CHECK(xbar_dse("--help").code == 0);
    CHECK(xbar_dse("sweep --help").code == 0);
}

TEST_CASE("numerical failure exits 2") {
    const Run r = xbar_dse(
        "solve --tech reram --fidelity level1 --rows 4 --cols 4 --set solver.max_iterations=1 "
        "--set solver.residual_tol=1e-30 --out diverge");
    CHECK(r.code == 2);
    CHECK(contains(r.output, "convergence"));
}

TEST_CASE("re-running a manifest reproduces every output") {
    REQUIRE(xbar_dse("nf --seed 5 --rows 8 --cols 8 --samples 15 --keep-samples --out nf_a").code == 0);
    REQUIRE(xbar_dse("nf --config nf_a/manifest.json --out nf_b").code == 0);
    check_same_run("nf_a", "nf_b");

    REQUIRE(xbar_dse("sweep --seed 2 --tech sot-mram --knob t_mgo --values 1.1,1.3 --activations 0,8 "
                     "--rows 16 --cols 16 --samples 10 --out sw_a")
                .code == 0);
    REQUIRE(xbar_dse("sweep --config sw_a/manifest.json --out sw_b").code == 0);
    check_same_run("sw_a", "sw_b");

    REQUIRE(xbar_dse("variations --seed 3 --rows 8 --cols 8 --samples 10 --seeds 2 --out var_a").code == 0);
    REQUIRE(xbar_dse("variations --config var_a/manifest.json --out var_b").code == 0);
    check_same_run("var_a", "var_b");

    REQUIRE(xbar_dse("train-surrogate --seed 4 --rows 8 --cols 8 --records 300 --epochs 3 --out tr_a").code == 0);
    REQUIRE(xbar_dse("train-surrogate --config tr_a/manifest.json --out tr_b").code == 0);
    check_same_run("tr_a", "tr_b");

    REQUIRE(xbar_dse("infer --rows 8 --cols 8 --mode surrogate --surrogate tr_a/surrogate.json --max-samples 3 "
                     "--out inf_a")
                .code == 0);
    REQUIRE(xbar_dse("infer --config inf_a/manifest.json --out inf_b").code == 0);
    check_same_run("inf_a", "inf_b");

    const std::string cmp = "compare --seed 7 --rows 8 --cols 8 --samples 10 --set compare.inference=false";
    REQUIRE(xbar_dse(cmp + " --out cmp_a").code == 0);
    REQUIRE(xbar_dse(cmp + " --out cmp_b").code == 0);
    check_same_run("cmp_a", "cmp_b");
    const auto rep = nlohmann::json::parse(slurp(workdir() / "cmp_a" / "compare.json"));
    CHECK(rep["technologies"].size() == 4);
}

TEST_CASE("worker count does not change results") {
    const std::string args = "nf --seed 8 --rows 8 --cols 8 --samples 12";
    REQUIRE(xbar_dse(args + " --out w1", "XBAR_DSE_THREADS=1").code == 0);
    REQUIRE(xbar_dse(args + " --out w3", "XBAR_DSE_THREADS=3").code == 0);
    CHECK(slurp(workdir() / "w1" / "nf_summary.csv") == slurp(workdir() / "w3" / "nf_summary.csv"));
    const auto m = nlohmann::json::parse(slurp(workdir() / "w3" / "manifest.json"));
    CHECK(m["workers"] == 3);
}

TEST_CASE("drain-input SRAM margin is below gate-input at small x") {
    REQUIRE(xbar_dse("sm --tech sram --topology drain --rows 16 --cols 16 --out sm_drain").code == 0);
    REQUIRE(xbar_dse("sm --tech sram --topology gate --rows 16 --cols 16 --out sm_gate").code == 0);
    std::ifstream d(workdir() / "sm_drain" / "sm_curve.csv"), g(workdir() / "sm_gate" / "sm_curve.csv");
    const auto cd = xbar::metrics::read_sm_curve_csv(d);
    const auto cg = xbar::metrics::read_sm_curve_csv(g);
    REQUIRE(cd.points.size() == 16);
    for (int x = 1; x <= 4; ++x) CHECK(cd.points[x - 1].sm <= cg.points[x - 1].sm);

    // Lossless round trip of the emitted file.
    std::ostringstream again;
    xbar::metrics::write_sm_curve_csv(again, cg);
    CHECK(again.str() == slurp(workdir() / "sm_gate" / "sm_curve.csv"));
}

TEST_CASE("zero-parasitic override gives a zero NF") {
    REQUIRE(xbar_dse("nf --seed 1 --rows 8 --cols 8 --samples 10 --set parasitics.scale=0 --out nf_zero").code == 0);
    std::istringstream csv(slurp(workdir() / "nf_zero" / "nf_summary.csv"));
    std::string header, pooled;
    std::getline(csv, header);
    std::getline(csv, pooled);
    CHECK(header == "scope,count,excluded_zero_ideal,failed,min,q1,median,q3,max,mean");
    CHECK(pooled.rfind("pooled,", 0) == 0);
    const double max_nf = std::stod(pooled.substr(pooled.rfind(',', pooled.rfind(',') - 1) + 1));
    CHECK(max_nf <= 1e-9);
}
