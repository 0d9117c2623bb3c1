#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "deltamask/codec.hpp"
#include "deltamask/config.hpp"
#include "deltamask/errors.hpp"
#include "deltamask/metrics.hpp"
#include "deltamask/simulator.hpp"

using namespace deltamask;

namespace {

// small but non-trivial: d = 2*8 = 16 masked weights, 3 clients
ExperimentConfig small_config() {
    ExperimentConfig cfg;
    cfg.clients = 3;
    cfg.rounds = 4;
    cfg.seed = 7;
    cfg.feature_dim = 2;
    cfg.clusters_per_class = 2;
    cfg.noise = 0.5;
    cfg.train_samples = 300;
    cfg.test_samples = 100;
    cfg.hidden = {8};
    cfg.probe_epochs = 1;
    cfg.lr = 0.1;
    cfg.batch_size = 32;
    cfg.bits_per_entry = 32;
    return cfg;
}

std::vector<double> sorted_first_features(const Dataset& d) {
    std::vector<double> f;
    f.reserve(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) f.push_back(d.row(i)[0]);
    std::sort(f.begin(), f.end());
    return f;
}

}  // namespace

TEST_CASE("dirichlet partition conserves and covers the dataset") {
    BlobSpec spec;
    spec.samples = 1000;
    spec.classes = 4;
    spec.feature_dim = 2;
    Dataset data = make_blobs(spec, HashSeed{3});

    auto shards = partition_dirichlet(data, 7, 10.0, HashSeed{5});
    REQUIRE(shards.size() == 7);
    std::size_t total = 0;
    Dataset pooled;
    pooled.feature_dim = 2;
    for (const auto& s : shards) {
        CHECK(s.size() >= 1);
        total += s.size();
        pooled.features.insert(pooled.features.end(), s.features.begin(), s.features.end());
        pooled.labels.insert(pooled.labels.end(), s.labels.begin(), s.labels.end());
    }
    CHECK(total == data.size());
    // same multiset of samples: nothing lost, nothing duplicated
    CHECK(sorted_first_features(pooled) == sorted_first_features(data));

    auto whole = partition_dirichlet(data, 1, 10.0, HashSeed{5});
    CHECK(whole[0].size() == data.size());

    Dataset few;
    few.feature_dim = 2;
    few.features = {0.0, 0.0};
    few.labels = {0};
    CHECK_THROWS_AS(partition_dirichlet(few, 2, 10.0, HashSeed{1}), TooFewSamples);
}

TEST_CASE("concentration controls per-client class coverage") {
    BlobSpec spec;
    spec.samples = 4000;
    spec.classes = 10;
    spec.clusters_per_class = 1;
    spec.feature_dim = 2;
    Dataset data = make_blobs(spec, HashSeed{8});

    auto uniform = partition_dirichlet(data, 20, 10.0, HashSeed{9});
    auto skewed = partition_dirichlet(data, 20, 0.1, HashSeed{9});
    double cov_uniform = class_coverage(uniform, 10);
    double cov_skewed = class_coverage(skewed, 10);
    CHECK(cov_uniform > 0.95);   // alpha = 10 leaves almost every class everywhere
    CHECK(cov_skewed < 0.5);     // alpha = 0.1 starves most classes per client
    CHECK(cov_skewed > 0.05);
    CHECK(cov_uniform > cov_skewed + 0.3);
}

TEST_CASE("kappa schedule endpoints, midpoint and modes") {
    CHECK(kappa_schedule(0, 40, 0.8, 1.0, KappaMode::Cosine) == doctest::Approx(0.8));
    CHECK(kappa_schedule(39, 40, 0.8, 1.0, KappaMode::Cosine) == doctest::Approx(1.0));
    CHECK(kappa_schedule(20, 41, 0.8, 1.0, KappaMode::Cosine) == doctest::Approx(0.9));
    for (std::uint32_t t = 1; t < 40; ++t)
        CHECK(kappa_schedule(t, 40, 0.8, 1.0, KappaMode::Cosine) >=
              kappa_schedule(t - 1, 40, 0.8, 1.0, KappaMode::Cosine));
    CHECK(kappa_schedule(17, 40, 0.6, 1.0, KappaMode::Constant) == 0.6);
    CHECK(kappa_schedule(0, 1, 0.8, 1.0, KappaMode::Cosine) == 0.8);  // single round
    CHECK_THROWS_AS(kappa_schedule(0, 10, 0.0, 1.0, KappaMode::Cosine), InvalidSpec);
    CHECK_THROWS_AS(kappa_schedule(0, 10, 0.8, 1.5, KappaMode::Cosine), InvalidSpec);
}

TEST_CASE("config validation names the offending key") {
    ExperimentConfig cfg = small_config();
    cfg.clients = 0;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("federation.clients"), ConfigError);
    cfg = small_config();
    cfg.kappa_start = 0.0;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("training.kappa_start"), ConfigError);
    cfg = small_config();
    cfg.bits_per_entry = 9;
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("filter.bits_per_entry"), ConfigError);
    cfg = small_config();
    cfg.hidden.clear();
    CHECK_THROWS_WITH_AS(validate(cfg), doctest::Contains("model.hidden"), ConfigError);
    CHECK_NOTHROW(validate(small_config()));
}

TEST_CASE("bypass transport matches a hand-rolled reference loop") {
    ExperimentConfig cfg = small_config();
    cfg.transport = Transport::Bypass;

    Simulation sim = prepare_experiment(cfg);
    Simulation ref = prepare_experiment(cfg);
    REQUIRE(sim.state.theta == ref.state.theta);
    REQUIRE(sim.model.layers.back().w == ref.model.layers.back().w);

    for (std::uint32_t t = 0; t < cfg.rounds; ++t) {
        RoundMetrics m = run_round(sim, t);

        // reference: the protocol reimplemented step by step on ref.state
        HashSeed round_seed{hash64(cfg.seed, HashSeed{t})};
        BinaryMask server = sample_mask(ref.state.theta, derive_seed(round_seed, kRoleServerMask));
        double kappa = kappa_schedule(t, static_cast<std::uint32_t>(cfg.rounds),
                                      cfg.kappa_start, cfg.kappa_end, cfg.kappa_mode);
        ProbabilityMask global = ProbabilityMask::from_probabilities(ref.state.theta);
        std::vector<BinaryMask> received;
        for (std::size_t k = 0; k < cfg.clients; ++k) {
            HashSeed train_seed{hash64(k, derive_seed(round_seed, kRoleClientTrain))};
            ProbabilityMask theta_k =
                client_update(ref.model, global, ref.shards[k], cfg.local_epochs, cfg.lr,
                              cfg.batch_size, train_seed);
            BinaryMask m_k = sample_mask(theta_k, derive_seed(round_seed, kRoleServerMask));
            auto delta = delta_indices(server, m_k);
            DeltaSet kept = rank_topk(delta, theta_k.probabilities(), ref.state.theta, kappa);
            received.push_back(reconstruct_mask(server, kept.indices));
        }
        bayes_agg(received, ref.state);

        REQUIRE(sim.state.theta == ref.state.theta);
        BinaryMask eval = sample_mask(ref.state.theta, derive_seed(round_seed, kRoleEvalMask));
        CHECK(m.accuracy == evaluate(ref.model, eval, ref.test_set));
    }
}

TEST_CASE("dense and bypass transports walk the same trajectory") {
    ExperimentConfig cfg = small_config();
    cfg.transport = Transport::Dense;
    ExperimentResult dense = run_experiment(cfg);
    cfg.transport = Transport::Bypass;
    ExperimentResult bypass = run_experiment(cfg);

    REQUIRE(dense.rounds.size() == bypass.rounds.size());
    CHECK(dense.state.theta == bypass.state.theta);
    for (std::size_t i = 0; i < dense.rounds.size(); ++i)
        CHECK(dense.rounds[i].accuracy == bypass.rounds[i].accuracy);
    CHECK(bypass.total_bytes == 0);
    CHECK(dense.total_bytes > 0);
}

TEST_CASE("dense baseline bpp is the raw mask plus header, exactly") {
    ExperimentConfig cfg = small_config();
    cfg.transport = Transport::Dense;
    Simulation sim = prepare_experiment(cfg);
    std::uint64_t d = sim.state.dimension;
    RoundMetrics m = dense_baseline_round(sim, 0);
    std::uint64_t bytes = dense_mask_byte_size(d);
    CHECK(bytes == 17 + (d + 7) / 8);
    CHECK(m.mean_bpp == doctest::Approx(8.0 * static_cast<double>(bytes) / d));
    CHECK(m.spurious_flips == 0);
}

TEST_CASE("dense wire format round-trips") {
    BinaryMask m(21);
    m.set(0, true);
    m.set(13, true);
    m.set(20, true);
    auto blob = serialize_dense_mask(m, 5);
    CHECK(blob.size() == dense_mask_byte_size(21));
}

TEST_CASE("whole experiments are reproducible from the seed") {
    ExperimentConfig cfg = small_config();
    ExperimentResult a = run_experiment(cfg);
    ExperimentResult b = run_experiment(cfg);
    CHECK(metrics_csv(a.rounds) == metrics_csv(b.rounds));
    CHECK(serialize_state(a.state) == serialize_state(b.state));
    CHECK(a.probe_accuracy == b.probe_accuracy);

    cfg.seed = 8;
    ExperimentResult c = run_experiment(cfg);
    CHECK(metrics_csv(a.rounds) != metrics_csv(c.rounds));
}

TEST_CASE("zero rounds runs the probe only") {
    ExperimentConfig cfg = small_config();
    cfg.rounds = 0;
    ExperimentResult r = run_experiment(cfg);
    CHECK(r.rounds.empty());
    CHECK(r.probe_accuracy > 0.0);
    CHECK(r.final_accuracy == r.probe_accuracy);
    CHECK(r.total_bytes == 0);
    CHECK(r.mean_bpp == 0.0);
}

TEST_CASE("cumulative bytes equal the serialized artifacts on disk") {
    namespace fs = std::filesystem;
    ExperimentConfig cfg = small_config();
    cfg.bits_per_entry = 8;
    cfg.transport = Transport::Filter;
    cfg.dump_updates = true;
    fs::path dir = fs::path("accounting_scratch");
    fs::remove_all(dir);
    fs::create_directories(dir);

    ExperimentResult r = run_experiment(cfg, dir.string());
    std::uint64_t on_disk = 0;
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(dir / "updates")) {
        if (entry.path().extension() == ".dmu") {
            on_disk += entry.file_size();
            ++files;
        }
    }
    CHECK(files == cfg.clients * cfg.rounds);
    CHECK(on_disk == r.total_bytes);
    std::uint64_t sum_rounds = r.rounds.back().cum_bytes;
    CHECK(sum_rounds == r.total_bytes);
    fs::remove_all(dir);
}

TEST_CASE("relative volume compares against 32-bit floats per coordinate") {
    ExperimentConfig cfg = small_config();
    cfg.transport = Transport::Dense;
    ExperimentResult r = run_experiment(cfg);
    double updates = static_cast<double>(cfg.clients * cfg.rounds);
    double dense_float = updates * static_cast<double>(r.state.dimension) * 4.0;
    CHECK(r.relative_volume == doctest::Approx(r.total_bytes / dense_float));
}

TEST_CASE("filter transport goes quiet after the first rounds on a toy run") {
    ExperimentConfig cfg;
    cfg.clients = 4;
    cfg.rounds = 6;
    cfg.seed = 11;
    cfg.feature_dim = 6;
    cfg.clusters_per_class = 2;
    cfg.noise = 0.8;
    cfg.train_samples = 2000;
    cfg.test_samples = 400;
    cfg.hidden = {200};
    cfg.bits_per_entry = 8;
    ExperimentResult r = run_experiment(cfg);
    REQUIRE(r.rounds.size() == 6);
    for (std::size_t i = 1; i < r.rounds.size(); ++i)
        CHECK(r.rounds[i].mean_bpp < 1.0);  // deltas are sparse after round one
    CHECK(r.construction_fallbacks == 0);
    // false-positive flips at 8 bits per entry are all but guaranteed
    std::uint64_t spurious = 0;
    for (const auto& m : r.rounds) spurious += m.spurious_flips;
    CHECK(spurious > 0);
}

TEST_CASE("spurious flips vanish at 32 bits per entry on small problems") {
    ExperimentConfig cfg = small_config();
    cfg.bits_per_entry = 32;
    cfg.transport = Transport::Filter;
    ExperimentResult r = run_experiment(cfg);
    for (const auto& m : r.rounds) CHECK(m.spurious_flips == 0);
}

TEST_CASE("threshold_mask rounds half up") {
    BinaryMask m = threshold_mask({0.49, 0.5, 0.51, 0.0, 1.0});
    CHECK(!m.get(0));
    CHECK(m.get(1));
    CHECK(m.get(2));
    CHECK(!m.get(3));
    CHECK(m.get(4));
}

TEST_CASE("summary json carries the headline numbers") {
    ExperimentConfig cfg = small_config();
    cfg.rounds = 1;
    ExperimentResult r = run_experiment(cfg);
    std::string json = summary_json(r, cfg);
    for (const char* key : {"probe_accuracy", "final_accuracy", "mean_bpp", "total_bytes",
                            "relative_volume", "construction_fallbacks", "dimension"})
        CHECK(json.find(key) != std::string::npos);
}

TEST_CASE("prepare_experiment wires the pieces together") {
    ExperimentConfig cfg = small_config();
    Simulation sim = prepare_experiment(cfg);
    CHECK(sim.state.dimension == sim.model.mask_dimension());
    CHECK(sim.shards.size() == cfg.clients);
    CHECK(sim.test_set.size() == cfg.test_samples);
    CHECK(sim.probe_accuracy >= 0.0);
    CHECK(sim.probe_accuracy <= 1.0);
    for (double t : sim.state.theta) CHECK(t == 0.5);
}

TEST_CASE("ring datasets look like rings") {
    RingSpec spec;
    spec.samples = 400;
    spec.inner_radius = 1.0;
    spec.outer_radius = 2.0;
    spec.noise = 0.05;
    Dataset d = make_rings(spec, HashSeed{10});
    REQUIRE(d.size() == 400);
    REQUIRE(d.feature_dim == 2);
    for (std::size_t i = 0; i < d.size(); ++i) {
        double r = std::hypot(d.row(i)[0], d.row(i)[1]);
        REQUIRE((d.labels[i] == 0 || d.labels[i] == 1));
        double target = d.labels[i] == 0 ? 1.0 : 2.0;
        CHECK(std::abs(r - target) < 0.5);
    }
    Dataset again = make_rings(spec, HashSeed{10});
    CHECK(again.features == d.features);
}

TEST_CASE("blob datasets are deterministic and class-balanced-ish") {
    BlobSpec spec;
    spec.samples = 600;
    spec.classes = 3;
    spec.clusters_per_class = 2;
    spec.feature_dim = 4;
    Dataset a = make_blobs(spec, HashSeed{77});
    Dataset b = make_blobs(spec, HashSeed{77});
    CHECK(a.features == b.features);
    CHECK(a.labels == b.labels);
    REQUIRE(a.size() == 600);
    REQUIRE(a.feature_dim == 4);
    std::vector<std::size_t> counts(3, 0);
    for (int l : a.labels) {
        REQUIRE(l >= 0);
        REQUIRE(l < 3);
        counts[l]++;
    }
    for (auto c : counts) CHECK(c > 100);  // roughly a third each
}
