#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "deltamask/codec.hpp"
#include "deltamask/config.hpp"
#include "deltamask/dataset.hpp"
#include "deltamask/deflate.hpp"
#include "deltamask/png_image.hpp"
#include "deltamask/simulator.hpp"

namespace fs = std::filesystem;
using namespace deltamask;

namespace {

std::string default_out_dir(const std::string& flag_value) {
    if (!flag_value.empty()) return flag_value;
    if (const char* env = std::getenv("DELTAMASK_OUT"); env != nullptr && *env != '\0')
        return env;
    return "deltamask-out";
}

void write_text_file(const fs::path& path, const std::string& text) {
    write_binary_file(path.string(),
                      {reinterpret_cast<const std::uint8_t*>(text.data()), text.size()});
}

int cmd_run(const std::string& config_path, const std::vector<std::string>& overrides,
            const std::string& out_flag, bool dry_run) {
    ExperimentConfig cfg;
    if (!config_path.empty()) cfg = load_config_file(config_path);
    for (const auto& kv : overrides) apply_override(cfg, kv);
    validate(cfg);

    if (dry_run) {
        std::fputs(dump_config(cfg).c_str(), stdout);
        return 0;
    }

    std::string out_dir = default_out_dir(out_flag);
    fs::create_directories(out_dir);
    ExperimentResult result = run_experiment(cfg, out_dir);

    write_text_file(fs::path(out_dir) / "metrics.csv", metrics_csv(result.rounds));
    write_text_file(fs::path(out_dir) / "summary.json", summary_json(result, cfg));
    write_text_file(fs::path(out_dir) / "config.resolved", dump_config(cfg));
    auto state_blob = serialize_state(result.state);
    write_binary_file((fs::path(out_dir) / "state.bin").string(), state_blob);

    std::printf("rounds=%zu probe_accuracy=%.4f final_accuracy=%.4f mean_bpp=%.4f "
                "total_bytes=%llu\n",
                result.rounds.size(), result.probe_accuracy, result.final_accuracy,
                result.mean_bpp, static_cast<unsigned long long>(result.total_bytes));
    std::printf("outputs written to %s\n", out_dir.c_str());
    return 0;
}

int cmd_bench_filter(std::uint64_t keys, std::uint32_t bits_per_entry, std::uint32_t arity,
                     std::uint32_t reps, const std::string& layout, std::uint64_t seed) {
    if (reps == 0) throw ConfigError("flag '--reps': must be at least 1");
    if (keys == 0) throw ConfigError("flag '--keys': must be at least 1");

    // mix64 is bijective, so distinct counters give distinct keys
    std::vector<std::uint64_t> key_set(keys);
    for (std::uint64_t i = 0; i < keys; ++i) key_set[i] = hash64(i, HashSeed{seed});

    using clock = std::chrono::steady_clock;
    std::vector<double> build_ms(reps);
    Filter filter;
    for (std::uint32_t r = 0; r < reps; ++r) {
        auto t0 = clock::now();
        filter = layout == "xor"
                     ? build_xor_filter(key_set, bits_per_entry, HashSeed{seed + r})
                     : build_filter(key_set, bits_per_entry, arity, HashSeed{seed + r});
        build_ms[r] = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    }
    std::sort(build_ms.begin(), build_ms.end());
    double median_ms = build_ms[reps / 2];

    constexpr std::uint64_t kProbes = 1'000'000;
    std::size_t hits = 0;
    auto q0 = clock::now();
    for (std::uint64_t i = 0; i < kProbes; ++i)
        hits += contains(filter, key_set[i % key_set.size()]) ? 1 : 0;
    double member_ns =
        std::chrono::duration<double, std::nano>(clock::now() - q0).count() / kProbes;
    if (hits != kProbes) throw Error("false negative during benchmark");

    std::size_t false_positives = 0;
    auto f0 = clock::now();
    for (std::uint64_t i = 0; i < kProbes; ++i)
        false_positives += contains(filter, hash64(keys + i, HashSeed{seed})) ? 1 : 0;
    double nonmember_ns =
        std::chrono::duration<double, std::nano>(clock::now() - f0).count() / kProbes;

    std::printf("layout=%s keys=%llu bits_per_entry=%u arity=%u\n", layout.c_str(),
                static_cast<unsigned long long>(keys), bits_per_entry,
                layout == "xor" ? 3 : arity);
    std::printf("construct_ms_median=%.3f (%u reps)\n", median_ms, reps);
    std::printf("query_ns_member=%.1f query_ns_nonmember=%.1f\n", member_ns, nonmember_ns);
    std::printf("bits_per_key=%.3f\n", space_bits_per_key(filter));
    std::printf("fpr=%.3e (expected %.3e)\n",
                static_cast<double>(false_positives) / static_cast<double>(kProbes),
                std::pow(2.0, -static_cast<double>(bits_per_entry)));
    return 0;
}

int cmd_verify_bound(std::uint64_t dim, std::uint64_t clients, std::uint64_t trials,
                     std::uint32_t flip_bits, std::uint64_t seed) {
    if (trials == 0) throw ConfigError("flag '--trials': must be at least 1");
    if (dim == 0) throw ConfigError("flag '--dim': must be at least 1");
    if (clients == 0) throw ConfigError("flag '--clients': must be at least 1");

    std::vector<std::vector<double>> thetas(clients, std::vector<double>(dim));
    HashSeed s{seed};
    std::uint64_t counter = 0;
    for (auto& row : thetas)
        for (auto& v : row) v = uniform01(counter++, s);

    double flip_prob = flip_bits == 0 ? 0.0 : std::pow(2.0, -static_cast<double>(flip_bits));
    BoundCheck check = verify_error_bound(thetas, trials, seed, flip_prob);
    std::printf("dim=%llu clients=%llu trials=%llu flip_prob=%.3e\n",
                static_cast<unsigned long long>(dim), static_cast<unsigned long long>(clients),
                static_cast<unsigned long long>(trials), flip_prob);
    std::printf("empirical=%.6f bound=%.6f tolerance=%.6f\n", check.empirical, check.bound,
                check.tolerance);
    std::printf("%s\n", check.pass ? "PASS" : "FAIL");
    return check.pass ? 0 : 1;
}

int cmd_export_png(const std::string& update_path, const std::string& out_path) {
    auto blob = read_binary_file(update_path);
    EncodedUpdate update = deserialize_update(blob);
    auto raw = inflate_bytes(update.compressed, filter_entry_bytes(update.filter));
    auto png = encode_gray_png(raw);
    write_binary_file(out_path, png);
    std::printf("wrote %s (%zu payload bytes)\n", out_path.c_str(), raw.size());
    return 0;
}

int cmd_gen_data(const std::string& kind, std::uint64_t samples, std::uint64_t classes,
                 std::uint64_t clusters, std::uint64_t dim, double noise, std::uint64_t seed,
                 const std::string& out_path) {
    Dataset ds;
    if (kind == "blobs") {
        BlobSpec spec;
        spec.samples = samples;
        spec.classes = classes;
        spec.clusters_per_class = clusters;
        spec.feature_dim = dim;
        spec.noise = noise;
        ds = make_blobs(spec, HashSeed{seed});
    } else if (kind == "rings") {
        RingSpec spec;
        spec.samples = samples;
        spec.noise = noise;
        ds = make_rings(spec, HashSeed{seed});
    } else {
        throw ConfigError("flag '--kind': must be blobs or rings");
    }
    write_dataset_csv(out_path, ds);
    std::printf("wrote %zu samples to %s\n", ds.size(), out_path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated mask-delta compression simulator"};
    app.require_subcommand(1);

    auto* run = app.add_subcommand("run", "run a federated experiment");
    std::string run_config;
    std::string run_out;
    std::vector<std::string> run_sets;
    bool run_dry = false;
    run->add_option("--config", run_config, "config file (INI schema)");
    run->add_option("--out", run_out, "output directory (default $DELTAMASK_OUT)");
    run->add_option("--set", run_sets, "override, e.g. --set federation.rounds=5");
    run->add_flag("--dry-run", run_dry, "validate and echo the resolved config only");

    auto* bench = app.add_subcommand("bench-filter", "measure filter construction and queries");
    std::uint64_t bench_keys = 1'000'000;
    std::uint32_t bench_bpe = 8;
    std::uint32_t bench_arity = 4;
    std::uint32_t bench_reps = 5;
    std::uint64_t bench_seed = 1;
    std::string bench_layout = "fused";
    bench->add_option("--keys", bench_keys, "key count");
    bench->add_option("--bits-per-entry", bench_bpe, "8, 16 or 32");
    bench->add_option("--arity", bench_arity, "3 or 4 (fused layout)");
    bench->add_option("--reps", bench_reps, "construction repetitions");
    bench->add_option("--layout", bench_layout, "fused or xor")
        ->check(CLI::IsMember({"fused", "xor"}));
    bench->add_option("--seed", bench_seed, "key generation seed");

    auto* verify = app.add_subcommand("verify-bound", "Monte Carlo aggregation error bound");
    std::uint64_t vb_dim = 1000;
    std::uint64_t vb_clients = 10;
    std::uint64_t vb_trials = 10'000;
    std::uint32_t vb_flip_bits = 0;
    std::uint64_t vb_seed = 1;
    verify->add_option("--dim", vb_dim, "mask dimension");
    verify->add_option("--clients", vb_clients, "client count");
    verify->add_option("--trials", vb_trials, "Monte Carlo trials");
    verify->add_option("--flip-bits", vb_flip_bits,
                       "apply a 2^-b independent bit-flip channel (0 = off)");
    verify->add_option("--seed", vb_seed, "rng seed");

    auto* expng = app.add_subcommand("export-png", "render an update blob as a grayscale PNG");
    std::string ep_update;
    std::string ep_out;
    expng->add_option("--update", ep_update, "serialized update file")->required();
    expng->add_option("--out", ep_out, "output PNG path")->required();

    auto* gen = app.add_subcommand("gen-data", "write a synthetic dataset as CSV");
    std::string gd_kind = "blobs";
    std::uint64_t gd_samples = 1000;
    std::uint64_t gd_classes = 2;
    std::uint64_t gd_clusters = 1;
    std::uint64_t gd_dim = 2;
    double gd_noise = 0.5;
    std::uint64_t gd_seed = 1;
    std::string gd_out = "dataset.csv";
    gen->add_option("--kind", gd_kind, "blobs or rings");
    gen->add_option("--samples", gd_samples, "sample count");
    gen->add_option("--classes", gd_classes, "class count (blobs)");
    gen->add_option("--clusters", gd_clusters, "clusters per class (blobs)");
    gen->add_option("--dim", gd_dim, "feature dimension (blobs)");
    gen->add_option("--noise", gd_noise, "noise level");
    gen->add_option("--seed", gd_seed, "rng seed");
    gen->add_option("--out", gd_out, "output CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (run->parsed()) return cmd_run(run_config, run_sets, run_out, run_dry);
        if (bench->parsed())
            return cmd_bench_filter(bench_keys, bench_bpe, bench_arity, bench_reps,
                                    bench_layout, bench_seed);
        if (verify->parsed())
            return cmd_verify_bound(vb_dim, vb_clients, vb_trials, vb_flip_bits, vb_seed);
        if (expng->parsed()) return cmd_export_png(ep_update, ep_out);
        if (gen->parsed())
            return cmd_gen_data(gd_kind, gd_samples, gd_classes, gd_clusters, gd_dim, gd_noise,
                                gd_seed, gd_out);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const MalformedHeader& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const VersionMismatch& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const TruncatedPayload& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
