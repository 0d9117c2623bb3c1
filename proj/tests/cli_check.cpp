// Drives the installed CLI binary through a shell and checks exit codes,
// stdout shapes and written artifacts. argv[1] is the binary's path.

#include <sys/wait.h>

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "deltamask/codec.hpp"
#include "deltamask/deflate.hpp"
#include "deltamask/png_image.hpp"

namespace fs = std::filesystem;

namespace {

int g_failures = 0;
std::string g_cli;

void check(bool ok, const std::string& what) {
    std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

// exit code of `cli <args>`, with stdout+stderr captured into capture_file
int run_cli(const std::string& args, const std::string& capture_file,
            const std::string& env_prefix = "") {
    std::string cmd = env_prefix + "\"" + g_cli + "\" " + args + " > " + capture_file + " 2>&1";
    int status = std::system(cmd.c_str());
    if (status == -1 || !WIFEXITED(status)) return -1;
    return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t line_count(const std::string& text) {
    std::size_t n = 0;
    for (char c : text)
        if (c == '\n') ++n;
    return n;
}

bool contains(const std::string& hay, const std::string& needle) {
    return hay.find(needle) != std::string::npos;
}

constexpr const char* kSmokeConfig =
    "# smoke experiment, small enough to finish in seconds\n"
    "[federation]\n"
    "clients = 3\n"
    "rounds = 4\n"
    "seed = 9\n"
    "\n"
    "[data]\n"
    "feature_dim = 2\n"
    "train_samples = 400\n"
    "test_samples = 160\n"
    "\n"
    "[model]\n"
    "hidden = 16\n"
    "\n"
    "[training]\n"
    "batch_size = 32\n";

constexpr const char* kMetricsHeader =
    "t,accuracy,mean_bpp,cum_bytes,mean_delta,mean_delta_prime,spurious_flips\n";

void check_basic_run() {
    int rc = run_cli("run --config smoke.ini --out out1", "cap_run.txt");
    std::string out = slurp("cap_run.txt");
    check(rc == 0 && contains(out, "rounds=4 ") && contains(out, "final_accuracy="),
          "run exits 0 and reports the round count and final accuracy");

    std::string csv = slurp("out1/metrics.csv");
    check(csv.rfind(kMetricsHeader, 0) == 0 && line_count(csv) == 5,
          "metrics.csv has the column header and one row per round");

    std::string summary = slurp("out1/summary.json");
    bool keys = contains(summary, "\"final_accuracy\"") && contains(summary, "\"mean_bpp\"") &&
                contains(summary, "\"total_bytes\"") && contains(summary, "\"config\"");
    check(keys, "summary.json carries the result and config fields");

    std::string resolved = slurp("out1/config.resolved");
    check(contains(resolved, "[federation]") && contains(resolved, "rounds = 4"),
          "config.resolved echoes the effective settings");

    std::string state = slurp("out1/state.bin");
    check(state.size() >= 33 && state.rfind("DMG1", 0) == 0,
          "state.bin is a server-state blob");
}

void check_config_errors() {
    std::ofstream("broken.ini") << "[training]\nlrr = 0.1\n";
    int rc = run_cli("run --config broken.ini", "cap_broken.txt");
    std::string out = slurp("cap_broken.txt");
    check(rc == 2 && contains(out, "lrr"), "a misspelled config key exits 2 and names the key");

    int rc2 = run_cli("run --config does-not-exist.ini", "cap_missing.txt");
    check(rc2 == 2, "a missing config file exits 2");
}

void check_overrides() {
    int rc = run_cli("run --config smoke.ini --set federation.rounds=3 --out out2",
                     "cap_set.txt");
    std::string csv = slurp("out2/metrics.csv");
    check(rc == 0 && contains(slurp("cap_set.txt"), "rounds=3 ") && line_count(csv) == 4,
          "--set overrides the config file before the run");

    int rc2 = run_cli("run --set nonsense=1", "cap_badset.txt");
    check(rc2 == 2 && contains(slurp("cap_badset.txt"), "nonsense"),
          "an unqualified --set key exits 2");
}

void check_dry_run() {
    int rc = run_cli("run --config smoke.ini --set federation.rounds=7 --dry-run",
                     "cap_dry.txt");
    std::string out = slurp("cap_dry.txt");
    check(rc == 0 && contains(out, "rounds = 7") && contains(out, "[filter]") &&
              !fs::exists("deltamask-out"),
          "--dry-run echoes the resolved config and writes nothing");
}

void check_env_out_dir() {
    int rc = run_cli("run --config smoke.ini", "cap_env.txt", "DELTAMASK_OUT=envout ");
    check(rc == 0 && fs::exists("envout/metrics.csv"),
          "DELTAMASK_OUT picks the output directory when --out is absent");
}

void check_bench() {
    int rc = run_cli("bench-filter --keys 20000 --reps 3", "cap_bench.txt");
    std::string out = slurp("cap_bench.txt");
    check(rc == 0 && contains(out, "bits_per_key=") && contains(out, "fpr="),
          "bench-filter reports space and false-positive measurements");

    int rc2 = run_cli("bench-filter --keys 20000 --layout xor --reps 1", "cap_benchx.txt");
    check(rc2 == 0 && contains(slurp("cap_benchx.txt"), "layout=xor"),
          "bench-filter drives the xor layout");

    int rc3 = run_cli("bench-filter --keys 100 --reps 0", "cap_bench0.txt");
    check(rc3 == 2, "bench-filter rejects --reps 0 with exit 2");
}

void check_verify_bound() {
    int rc = run_cli("verify-bound --dim 200 --clients 4 --trials 500 --seed 3",
                     "cap_vb.txt");
    check(rc == 0 && contains(slurp("cap_vb.txt"), "PASS"),
          "verify-bound passes on a clean channel");

    int rc2 = run_cli("verify-bound --dim 200 --clients 4 --trials 500 --flip-bits 8",
                      "cap_vbf.txt");
    check(rc2 == 0, "verify-bound passes with the 2^-8 flip channel");

    int rc3 = run_cli("verify-bound --trials 0", "cap_vb0.txt");
    check(rc3 == 2, "verify-bound rejects --trials 0 with exit 2");
}

void check_update_dumps_and_png() {
    int rc = run_cli(
        "run --config smoke.ini --set output.dump_updates=true --set output.dump_png=true "
        "--out out3",
        "cap_dump.txt");
    std::size_t dmu = 0, png = 0;
    if (fs::exists("out3/updates"))
        for (const auto& e : fs::directory_iterator("out3/updates")) {
            if (e.path().extension() == ".dmu") ++dmu;
            if (e.path().extension() == ".png") ++png;
        }
    check(rc == 0 && dmu == 12 && png == 12,
          "dump_updates writes one update blob and PNG per client per round");

    const std::string blob_path = "out3/updates/round0000_client000.dmu";
    int rc2 = run_cli("export-png --update " + blob_path + " --out exported.png",
                      "cap_png.txt");
    bool same_bytes = slurp("exported.png") == slurp("out3/updates/round0000_client000.png");
    check(rc2 == 0 && same_bytes, "export-png reproduces the PNG dumped during the run");

    // the PNG must round-trip back to the exact compressed payload
    auto blob = deltamask::read_binary_file(blob_path);
    deltamask::EncodedUpdate update = deltamask::deserialize_update(blob);
    auto raw = deltamask::inflate_bytes(update.compressed,
                                        deltamask::filter_entry_bytes(update.filter));
    auto decoded = deltamask::decode_gray_png(deltamask::read_binary_file("exported.png"));
    check(decoded == raw, "the exported PNG decodes back to the filter entries");

    std::ofstream("stub.dmu", std::ios::binary) << "DMU1xxxxxx";
    int rc3 = run_cli("export-png --update stub.dmu --out stub.png", "cap_pngbad.txt");
    check(rc3 == 2, "export-png rejects a truncated update blob with exit 2");
}

void check_gen_data() {
    int rc = run_cli("gen-data --kind blobs --samples 50 --classes 3 --dim 4 --out blobs.csv",
                     "cap_gen.txt");
    std::string csv = slurp("blobs.csv");
    check(rc == 0 && csv.rfind("label,f0,f1,f2,f3\n", 0) == 0 && line_count(csv) == 51,
          "gen-data writes a labeled blob CSV with a header row");

    int rc2 = run_cli("gen-data --kind rings --samples 30 --out rings.csv", "cap_genr.txt");
    std::string rings = slurp("rings.csv");
    check(rc2 == 0 && rings.rfind("label,f0,f1\n", 0) == 0 && line_count(rings) == 31,
          "gen-data writes the two-dimensional ring task");

    int rc3 = run_cli("gen-data --kind pigeon --out x.csv", "cap_genbad.txt");
    check(rc3 == 2, "gen-data rejects an unknown dataset kind with exit 2");
}

void check_parse_errors() {
    check(run_cli("run --bogus-flag", "cap_flag.txt") == 2, "an unknown flag exits 2");
    check(run_cli("frobnicate", "cap_sub.txt") == 2, "an unknown subcommand exits 2");
    check(run_cli("", "cap_nosub.txt") == 2, "a missing subcommand exits 2");
    check(run_cli("--help", "cap_help.txt") == 0, "--help exits 0");
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <path-to-cli>\n", argv[0]);
        return 2;
    }
    g_cli = fs::absolute(argv[1]).string();

    fs::path scratch = fs::current_path() / "cli_scratch";
    fs::remove_all(scratch);
    fs::create_directories(scratch);
    fs::current_path(scratch);
    std::ofstream("smoke.ini") << kSmokeConfig;

    check_basic_run();
    check_config_errors();
    check_overrides();
    check_dry_run();
    check_env_out_dir();
    check_bench();
    check_verify_bound();
    check_update_dumps_and_png();
    check_gen_data();
    check_parse_errors();

    std::printf("%d check(s) failed\n", g_failures);
    return g_failures == 0 ? 0 : 1;
}
