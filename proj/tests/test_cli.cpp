#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "selfact/config.hpp"
#include "selfact/serialize.hpp"

using namespace selfact;
namespace fs = std::filesystem;

namespace {

struct CmdResult {
    int code = -1;
    std::string output;  // stdout + stderr
};

fs::path scratch_dir() {
    auto dir = fs::temp_directory_path() / "selfact_cli_tests";
    fs::create_directories(dir);
    return dir;
}

CmdResult run_cli(const std::string& args) {
    static int counter = 0;
    const fs::path capture = scratch_dir() / ("stdout_" + std::to_string(counter++) + ".txt");
    const std::string cmd =
        std::string(SELFACT_CLI_PATH) + " " + args + " > '" + capture.string() + "' 2>&1";
    const int raw = std::system(cmd.c_str());
    CmdResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    std::ifstream in(capture);
    std::ostringstream buf;
    buf << in.rdbuf();
    r.output = buf.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text) n += (c == '\n');
    return n;
}

// Settings small enough that every subcommand finishes in well under a second.
const std::string kTinySynth =
    "--set synth.windows_per_activity=12 --set synth.activities=2 "
    "--set synth.rounds=2 --set session.dbscan_min_pts=4";

// Drops lines that legitimately differ between reruns (wall-clock values).
std::string without_volatile_lines(const std::string& text) {
    std::istringstream in(text);
    std::string line, out;
    while (std::getline(in, line)) {
        if (line.rfind("meta.timestamp=", 0) == 0) continue;
        if (line.find("runtime_sec=") != std::string::npos) continue;
        out += line + "\n";
    }
    return out;
}

}  // namespace

TEST_CASE("cli: --help enumerates every config key with its default") {
    auto r = run_cli("--help");
    CHECK(r.code == 0);
    for (const auto& k : config_keys()) {
        CAPTURE(k.key);
        CHECK(r.output.find(k.key + " = ") != std::string::npos);
        if (!k.default_value.empty()) {
            CHECK(r.output.find(k.key + " = " + k.default_value) != std::string::npos);
        }
    }
}

TEST_CASE("cli: usage errors exit 1") {
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("frobnicate").code == 1);
    CHECK(run_cli("eval --config /does/not/exist.cfg").code == 1);
    CHECK(run_cli("eval --set not.a.key=1").code == 2);  // config data error
}

TEST_CASE("cli: pretrain writes a model that reloads to the same hash") {
    auto dir = scratch_dir();
    const auto model_a = dir / "model_a.txt";
    const auto model_b = dir / "model_b.txt";
    const std::string args = "pretrain " + kTinySynth +
                             " --set synth.users=2 --set pretrain.epochs=2"
                             " --set pretrain.batch_size=16 --seed 11 --out ";
    auto r1 = run_cli(args + "'" + model_a.string() + "'");
    CHECK(r1.code == 0);
    CHECK(r1.output.find("param hash") != std::string::npos);
    REQUIRE(fs::exists(model_a));

    // Reload round-trip: the saved container hashes to the same value.
    auto loaded = load_container(model_a.string());
    std::ostringstream printed;
    printed << std::hex << container_hash(loaded);
    CHECK(r1.output.find(printed.str()) != std::string::npos);

    // Determinism: same config + seed → identical model bytes.
    auto r2 = run_cli(args + "'" + model_b.string() + "'");
    CHECK(r2.code == 0);
    CHECK(slurp(model_a) == slurp(model_b));

    // Missing dataset path → nonzero exit naming the path.
    auto bad = run_cli("pretrain --set data.csv_paths=/missing/data.csv");
    CHECK(bad.code == 2);
    CHECK(bad.output.find("/missing/data.csv") != std::string::npos);
}

TEST_CASE("cli: run replays a session and writes its artifacts") {
    auto dir = scratch_dir() / "run_out";
    fs::remove_all(dir);
    auto r = run_cli("run " + kTinySynth + " --acc-th 0.5 --seed 7 --out '" + dir.string() + "'");
    REQUIRE(r.code == 0);

    // One trace line per window (24 = 2 activities x 12 windows).
    auto trace = slurp(dir / "trace.txt");
    CHECK(line_count(trace) == 24);
    CHECK(trace.find("accumulating,clusters_built") != std::string::npos);

    auto summary = slurp(dir / "session_summary.txt");
    CHECK(summary.find("windows=24") != std::string::npos);
    CHECK(summary.find("acc_th=12") != std::string::npos);
    CHECK(fs::exists(dir / "labeled.csv"));
    CHECK(fs::exists(dir / "classifier.txt"));

    // Absolute --acc-th beyond the stream → pipeline error with the guard text.
    auto guard = run_cli("run " + kTinySynth + " --acc-th 999");
    CHECK(guard.code == 3);
    CHECK(guard.output.find("accumulation never completed") != std::string::npos);
}

TEST_CASE("cli: eval sweeps thresholds and emits the report") {
    auto dir = scratch_dir() / "eval_out";
    fs::remove_all(dir);
    auto r = run_cli("eval " + kTinySynth +
                     " --thresholds 0.5,0.75,0.9,0.95 --seed 7 --out '" + dir.string() + "'");
    REQUIRE(r.code == 0);
    CHECK(r.output.find("mean weighted F1") != std::string::npos);

    auto csv = slurp(dir / "folds.csv");
    CHECK(line_count(csv) == 3 * 4 + 1);  // 3 users x 4 thresholds + header
    CHECK(fs::exists(dir / "summary.txt"));
    CHECK(fs::exists(dir / "f1_vs_threshold.svg"));
    CHECK(slurp(dir / "summary.txt").find("meta.backend=statistical") != std::string::npos);

    // Reruns are byte-identical except wall-clock lines.
    auto dir2 = scratch_dir() / "eval_out2";
    fs::remove_all(dir2);
    auto r2 = run_cli("eval " + kTinySynth +
                      " --thresholds 0.5,0.75,0.9,0.95 --seed 7 --out '" + dir2.string() + "'");
    REQUIRE(r2.code == 0);
    CHECK(slurp(dir / "folds.csv") == slurp(dir2 / "folds.csv"));
    CHECK(without_volatile_lines(slurp(dir / "summary.txt")) ==
          without_volatile_lines(slurp(dir2 / "summary.txt")));
    for (const char* svg :
         {"f1_vs_threshold.svg", "clusters_vs_threshold.svg", "al_rate_vs_threshold.svg"}) {
        CHECK(slurp(dir / svg) == slurp(dir2 / svg));
    }
}

TEST_CASE("cli: eval runs under the conv backend and records it") {
    auto dir = scratch_dir() / "eval_conv";
    fs::remove_all(dir);
    auto r = run_cli("eval " + kTinySynth +
                     " --set pretrain.epochs=2 --set pretrain.batch_size=16"
                     " --backend conv --thresholds 0.75 --seed 7 --out '" +
                     dir.string() + "'");
    REQUIRE(r.code == 0);
    CHECK(slurp(dir / "summary.txt").find("meta.backend=conv") != std::string::npos);
}
