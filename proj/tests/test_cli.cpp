#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef DIPOLESCOPE_BIN
#error "DIPOLESCOPE_BIN must point at the CLI executable"
#endif

namespace fs = std::filesystem;

namespace {

struct CommandResult {
    int exit_code = -1;
    std::string output;  // stdout + stderr
};

CommandResult run_cli(const std::string& args) {
    const std::string out_file = "/tmp/dipolescope_cli_out.txt";
    const std::string cmd = std::string(DIPOLESCOPE_BIN) + " " + args + " > " + out_file + " 2>&1";
    const int status = std::system(cmd.c_str());
    CommandResult r;
    r.exit_code = WEXITSTATUS(status);
    std::ifstream in(out_file);
    std::ostringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("physics queries") {
    const auto pe = run_cli("physics pe --power-uw 0.1515 --duration-us 2 --waist-um 20 "
                            "--detuning-mhz 100");
    CHECK(pe.exit_code == 0);
    CHECK(pe.output.find("p_e") != std::string::npos);

    const auto depth = run_cli("physics depth --power-w 3.5 --waist-um 40 --wavelength-nm 1030 "
                               "--format json");
    CHECK(depth.exit_code == 0);
    CHECK(depth.output.find("depth_uk") != std::string::npos);

    const auto strengths = run_cli("physics strengths --f 4");
    CHECK(strengths.exit_code == 0);
    CHECK(strengths.output.find("sum = 1") != std::string::npos);

    const auto bad = run_cli("physics nonsense");
    CHECK(bad.exit_code == 1);
}

TEST_CASE("run: exit codes and artifacts") {
    SUBCASE("valid built-in scenario") {
        const auto r = run_cli("run breathing --out /tmp/dipolescope_cli_run --seed 5");
        CHECK(r.exit_code == 0);
        CHECK(fs::exists("/tmp/dipolescope_cli_run/report.json"));
        fs::remove_all("/tmp/dipolescope_cli_run");
    }
    SUBCASE("malformed JSON reports line and column") {
        std::ofstream("/tmp/dipolescope_bad.json") << "{\"name\": \"losses\",\n  broken\n}";
        const auto r = run_cli("run /tmp/dipolescope_bad.json");
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("malformed JSON") != std::string::npos);
        CHECK(r.output.find(":2:") != std::string::npos);
    }
    SUBCASE("unknown scenario key is named") {
        std::ofstream("/tmp/dipolescope_badkey.json")
            << R"({"name": "losses", "grid": {"time_sec": [1,2,3]}})";
        const auto r = run_cli("run /tmp/dipolescope_badkey.json");
        CHECK(r.exit_code == 1);
        CHECK(r.output.find("time_sec") != std::string::npos);
    }
    SUBCASE("same seed twice gives identical artifacts") {
        const auto r1 = run_cli("run losses --out /tmp/dipolescope_det_a --seed 99");
        const auto r2 = run_cli("run losses --out /tmp/dipolescope_det_b --seed 99");
        CHECK(r1.exit_code == 0);
        CHECK(r2.exit_code == 0);
        CHECK(slurp("/tmp/dipolescope_det_a/report.json") ==
              slurp("/tmp/dipolescope_det_b/report.json"));
        CHECK(slurp("/tmp/dipolescope_det_a/dataset.csv") ==
              slurp("/tmp/dipolescope_det_b/dataset.csv"));
        fs::remove_all("/tmp/dipolescope_det_a");
        fs::remove_all("/tmp/dipolescope_det_b");
    }
}

TEST_CASE("fit: external CSV data") {
    {
        std::ofstream csv("/tmp/dipolescope_loss.csv");
        csv << "t,y,sigma\n";
        for (int i = 0; i < 40; ++i) {
            const double t = 1e-3 + 0.25 * i / 39.0;
            const double e = std::exp(-21.0 * t);
            const double y = 21.0 * 1e5 * e / (21.0 + 2.3e-4 * 1e5 * (1 - e));
            csv << t << "," << y << "," << 37.0 << "\n";
        }
    }
    const auto r = run_cli("fit --driver loss --data /tmp/dipolescope_loss.csv");
    CHECK(r.exit_code == 0);
    CHECK(r.output.find("Gamma") != std::string::npos);

    const auto rj = run_cli("fit --driver loss --data /tmp/dipolescope_loss.csv --format json");
    CHECK(rj.exit_code == 0);
    CHECK(rj.output.find("\"converged\": true") != std::string::npos);

    const auto missing = run_cli("fit --driver loss --data /tmp/no_such_file.csv");
    CHECK(missing.exit_code == 1);

    const auto badname = run_cli("fit --driver sideways --data /tmp/dipolescope_loss.csv");
    CHECK(badname.exit_code == 1);
}

TEST_CASE("oracle subcommands") {
    const auto r = run_cli("oracle ballistic --samples 100000");
    CHECK(r.exit_code == 0);
    const auto rr = run_cli("oracle riccati");
    CHECK(rr.exit_code == 0);
    const auto bad = run_cli("oracle tarot");
    CHECK(bad.exit_code == 1);
}
