#include "deltamask/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>

#include <json.hpp>

#include "deltamask/codec.hpp"
#include "deltamask/deflate.hpp"
#include "deltamask/errors.hpp"
#include "deltamask/png_image.hpp"

namespace deltamask {

namespace {

constexpr char kDenseMagic[4] = {'D', 'M', 'D', '1'};
constexpr std::uint8_t kDenseFormatVersion = 1;
constexpr std::size_t kDenseHeaderBytes = 4 + 1 + 4 + 8;

void shuffle_hash(std::vector<std::size_t>& v, HashSeed seed) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = bounded_rand(i, seed, i);
        std::swap(v[i - 1], v[j]);
    }
}

Dataset take_rows(const Dataset& data, const std::vector<std::size_t>& rows) {
    Dataset out;
    out.feature_dim = data.feature_dim;
    out.features.reserve(rows.size() * data.feature_dim);
    out.labels.reserve(rows.size());
    for (std::size_t r : rows) {
        const double* src = data.row(r);
        out.features.insert(out.features.end(), src, src + data.feature_dim);
        out.labels.push_back(data.labels[r]);
    }
    return out;
}

/// One Dirichlet draw of all shards; returns row lists per client.
std::vector<std::vector<std::size_t>> draw_partition(const Dataset& data, std::size_t clients,
                                                     double alpha, HashSeed seed,
                                                     std::uint32_t attempt) {
    std::mt19937_64 rng(hash64(attempt, derive_seed(seed, kRolePartition)));
    std::gamma_distribution<double> gamma(alpha, 1.0);

    // group sample indices by class, shuffled so quota cuts are random
    int max_label = 0;
    for (int l : data.labels) max_label = std::max(max_label, l);
    std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(max_label) + 1);
    for (std::size_t n = 0; n < data.size(); ++n)
        by_class[static_cast<std::size_t>(data.labels[n])].push_back(n);
    for (std::size_t c = 0; c < by_class.size(); ++c)
        shuffle_hash(by_class[c], HashSeed{hash64(c + 1, derive_seed(seed, kRolePartition)) +
                                           attempt});

    std::vector<std::vector<std::size_t>> shards(clients);
    for (auto& members : by_class) {
        if (members.empty()) continue;
        std::vector<double> weights(clients);
        double total = 0.0;
        for (auto& w : weights) {
            w = gamma(rng);
            total += w;
        }
        if (total <= 0.0) {  // pathological underflow; spread uniformly
            std::fill(weights.begin(), weights.end(), 1.0);
            total = static_cast<double>(clients);
        }
        // largest-remainder apportionment of this class across clients
        std::size_t n_c = members.size();
        std::vector<std::size_t> quota(clients);
        std::vector<std::pair<double, std::size_t>> frac(clients);
        std::size_t assigned = 0;
        for (std::size_t k = 0; k < clients; ++k) {
            double share = weights[k] / total * static_cast<double>(n_c);
            quota[k] = static_cast<std::size_t>(std::floor(share));
            frac[k] = {share - std::floor(share), k};
            assigned += quota[k];
        }
        std::sort(frac.begin(), frac.end(), [](const auto& a, const auto& b) {
            if (a.first != b.first) return a.first > b.first;
            return a.second < b.second;
        });
        for (std::size_t r = 0; assigned < n_c; ++r, ++assigned) quota[frac[r].second] += 1;

        std::size_t cursor = 0;
        for (std::size_t k = 0; k < clients; ++k) {
            for (std::size_t q = 0; q < quota[k]; ++q)
                shards[k].push_back(members[cursor++]);
        }
    }
    return shards;
}

std::uint64_t participant_count(const ExperimentConfig& cfg) {
    return static_cast<std::uint64_t>(
        std::ceil(cfg.participation * static_cast<double>(cfg.clients)));
}

void dump_update_files(Simulation& sim, std::uint32_t t, std::size_t client,
                       const EncodedUpdate& update) {
    if (sim.artifact_dir.empty() || !sim.config.dump_updates) return;
    namespace fs = std::filesystem;
    fs::path dir = fs::path(sim.artifact_dir) / "updates";
    fs::create_directories(dir);
    char name[64];
    std::snprintf(name, sizeof name, "round%04u_client%03zu", t, client);
    auto blob = serialize_update(update);
    write_binary_file((dir / (std::string(name) + ".dmu")).string(), blob);
    if (update.export_png) {
        auto raw = inflate_bytes(update.compressed, filter_entry_bytes(update.filter));
        auto png = encode_gray_png(raw);
        write_binary_file((dir / (std::string(name) + ".png")).string(), png);
    }
}

}  // namespace

void validate(const ExperimentConfig& c) {
    auto bad = [](const std::string& key, const std::string& why) {
        throw ConfigError("config key '" + key + "': " + why);
    };
    if (c.clients == 0) bad("federation.clients", "must be at least 1");
    if (!(c.participation > 0.0 && c.participation <= 1.0))
        bad("federation.participation", "must lie in (0, 1]");
    if (!(c.lambda0 > 0.0)) bad("federation.lambda0", "must be positive");
    if (c.classes < 2) bad("data.classes", "must be at least 2");
    if (c.data_kind == DataKind::Rings && c.classes != 2)
        bad("data.classes", "rings data has exactly 2 classes");
    if (c.clusters_per_class == 0) bad("data.clusters_per_class", "must be at least 1");
    if (c.feature_dim < 2) bad("data.feature_dim", "must be at least 2");
    if (c.train_samples < c.clients)
        bad("data.train_samples", "needs at least one sample per client");
    if (c.test_samples == 0) bad("data.test_samples", "must be positive");
    if (c.noise < 0.0) bad("data.noise", "must be non-negative");
    if (!(c.dirichlet_alpha > 0.0)) bad("data.dirichlet_alpha", "must be positive");
    if (c.hidden.empty()) bad("model.hidden", "need at least one maskable layer");
    for (auto h : c.hidden)
        if (h == 0) bad("model.hidden", "layer widths must be positive");
    if (c.probe_lr < 0.0) bad("model.probe_lr", "must be non-negative");
    if (c.lr < 0.0) bad("training.lr", "must be non-negative");
    if (c.batch_size == 0) bad("training.batch_size", "must be positive");
    if (!(c.kappa_start > 0.0 && c.kappa_start <= 1.0))
        bad("training.kappa_start", "must lie in (0, 1]");
    if (!(c.kappa_end > 0.0 && c.kappa_end <= 1.0))
        bad("training.kappa_end", "must lie in (0, 1]");
    if (c.bits_per_entry != 8 && c.bits_per_entry != 16 && c.bits_per_entry != 32)
        bad("filter.bits_per_entry", "must be 8, 16 or 32");
    if (c.arity != 3 && c.arity != 4) bad("filter.arity", "must be 3 or 4");
}

std::vector<Dataset> partition_dirichlet(const Dataset& data, std::size_t clients, double alpha,
                                         HashSeed seed) {
    if (clients == 0) throw InvalidSpec("clients must be positive");
    if (!(alpha > 0.0)) throw InvalidSpec("dirichlet alpha must be positive");
    if (data.size() < clients)
        throw TooFewSamples("dataset has " + std::to_string(data.size()) +
                            " samples for " + std::to_string(clients) + " clients");

    std::vector<std::vector<std::size_t>> rows;
    bool ok = false;
    for (std::uint32_t attempt = 0; attempt < 100 && !ok; ++attempt) {
        rows = draw_partition(data, clients, alpha, seed, attempt);
        ok = std::all_of(rows.begin(), rows.end(),
                         [](const auto& r) { return !r.empty(); });
    }
    if (!ok) {
        // deterministic repair: donate from the largest shard
        for (auto& shard : rows) {
            while (shard.empty()) {
                auto largest = std::max_element(
                    rows.begin(), rows.end(),
                    [](const auto& a, const auto& b) { return a.size() < b.size(); });
                if (largest->size() <= 1) throw TooFewSamples("cannot give every client a sample");
                shard.push_back(largest->back());
                largest->pop_back();
            }
        }
    }

    std::vector<Dataset> shards;
    shards.reserve(clients);
    for (const auto& r : rows) shards.push_back(take_rows(data, r));
    return shards;
}

double class_coverage(const std::vector<Dataset>& shards, std::size_t classes) {
    if (shards.empty() || classes == 0) return 0.0;
    double total = 0.0;
    for (const auto& s : shards) {
        std::vector<bool> seen(classes, false);
        for (int l : s.labels)
            if (l >= 0 && static_cast<std::size_t>(l) < classes) seen[static_cast<std::size_t>(l)] = true;
        total += static_cast<double>(std::count(seen.begin(), seen.end(), true)) /
                 static_cast<double>(classes);
    }
    return total / static_cast<double>(shards.size());
}

double kappa_schedule(std::uint32_t t, std::uint32_t rounds, double kappa_start,
                      double kappa_end, KappaMode mode) {
    if (!(kappa_start > 0.0 && kappa_start <= 1.0 && kappa_end > 0.0 && kappa_end <= 1.0))
        throw InvalidSpec("kappa endpoints must lie in (0, 1]");
    if (mode == KappaMode::Constant) return kappa_start;
    if (rounds < 2) return kappa_start;
    double phase = std::numbers::pi * static_cast<double>(t) / static_cast<double>(rounds - 1);
    return kappa_end + (kappa_start - kappa_end) * (1.0 + std::cos(phase)) / 2.0;
}

Simulation prepare_experiment(const ExperimentConfig& config) {
    validate(config);
    Simulation sim;
    sim.config = config;

    HashSeed master{config.seed};
    HashSeed data_seed = derive_seed(master, kRoleDataset);
    Dataset train;
    Dataset test;
    if (config.data_kind == DataKind::Blobs) {
        BlobSpec spec;
        spec.classes = config.classes;
        spec.clusters_per_class = config.clusters_per_class;
        spec.feature_dim = config.feature_dim;
        spec.noise = config.noise;
        spec.samples = config.train_samples;
        train = make_blobs(spec, HashSeed{hash64(0, data_seed)});
        spec.samples = config.test_samples;
        test = make_blobs(spec, HashSeed{hash64(1, data_seed)});
    } else {
        RingSpec spec;
        spec.noise = config.noise;
        spec.samples = config.train_samples;
        train = make_rings(spec, HashSeed{hash64(0, data_seed)});
        spec.samples = config.test_samples;
        test = make_rings(spec, HashSeed{hash64(1, data_seed)});
        Dataset padded;  // rings are 2-d; widen if the model expects more
        if (config.feature_dim > 2) {
            for (Dataset* ds : {&train, &test}) {
                padded.feature_dim = config.feature_dim;
                padded.labels = ds->labels;
                padded.features.assign(ds->size() * config.feature_dim, 0.0);
                for (std::size_t n = 0; n < ds->size(); ++n) {
                    padded.features[n * config.feature_dim] = ds->features[n * 2];
                    padded.features[n * config.feature_dim + 1] = ds->features[n * 2 + 1];
                }
                *ds = padded;
            }
        }
    }

    ModelSpec mspec;
    mspec.feature_dim = config.feature_dim;
    mspec.classes = config.classes;
    mspec.hidden = config.hidden;
    sim.model = init_model(mspec, master);

    // one-shot linear probe on the pooled training set, then the head freezes
    linear_probe(sim.model, train, config.probe_epochs, config.probe_lr, config.batch_size,
                 master);
    BinaryMask ones = BinaryMask::all_ones(sim.model.mask_dimension());
    sim.test_set = std::move(test);
    sim.probe_accuracy = evaluate(sim.model, ones, sim.test_set);

    sim.shards = partition_dirichlet(train, config.clients, config.dirichlet_alpha, master);
    sim.state = init_global_state(sim.model.mask_dimension(), config.participation,
                                  config.lambda0);
    return sim;
}

namespace {

RoundMetrics run_round_impl(Simulation& sim, std::uint32_t t, Transport transport) {
    const ExperimentConfig& cfg = sim.config;
    const std::uint64_t d = sim.state.dimension;
    HashSeed round_seed{hash64(cfg.seed, HashSeed{t})};

    BinaryMask server_mask = sample_mask(sim.state.theta, derive_seed(round_seed, kRoleServerMask));

    std::vector<std::size_t> order(cfg.clients);
    for (std::size_t i = 0; i < cfg.clients; ++i) order[i] = i;
    shuffle_hash(order, derive_seed(round_seed, kRoleParticipants));
    order.resize(static_cast<std::size_t>(participant_count(cfg)));
    std::sort(order.begin(), order.end());

    double kappa = kappa_schedule(t, static_cast<std::uint32_t>(cfg.rounds), cfg.kappa_start,
                                  cfg.kappa_end, cfg.kappa_mode);

    RoundMetrics m;
    m.round = t + 1;
    std::vector<BinaryMask> received;
    received.reserve(order.size());
    ProbabilityMask global_theta = ProbabilityMask::from_probabilities(sim.state.theta);

    for (std::size_t k : order) {
        HashSeed train_seed{hash64(k, derive_seed(round_seed, kRoleClientTrain))};
        ProbabilityMask theta_k = client_update(sim.model, global_theta, sim.shards[k],
                                                cfg.local_epochs, cfg.lr, cfg.batch_size,
                                                train_seed);
        // binarize with the round's public draws, the same ones behind
        // server_mask: coupling the two samples makes a coordinate differ
        // with probability |theta_k - theta| instead of 2*theta*(1-theta),
        // which is what keeps the deltas sparse once the mask settles
        BinaryMask m_k = sample_mask(theta_k, derive_seed(round_seed, kRoleServerMask));

        auto delta = delta_indices(server_mask, m_k);
        DeltaSet kept = rank_topk(delta, theta_k.probabilities(), sim.state.theta, kappa);
        m.mean_delta += static_cast<double>(delta.size());
        m.mean_delta_prime += static_cast<double>(kept.indices.size());

        std::uint64_t bytes = 0;
        BinaryMask reconstructed(0);
        bool use_dense = transport == Transport::Dense;
        if (transport == Transport::Filter) {
            try {
                EncodedUpdate update =
                    encode_update(kept, d, t, cfg.bits_per_entry, cfg.arity,
                                  HashSeed{hash64(k, derive_seed(round_seed, kRoleFilterBuild))});
                update.export_png = cfg.dump_png;
                bytes = update_byte_size(update);
                auto decoded = decode_update(update);
                reconstructed = reconstruct_mask(server_mask, decoded);
                m.spurious_flips += decoded.size() - kept.indices.size();
                dump_update_files(sim, t, k, update);
            } catch (const ConstructionFailed&) {
                // logged dense fallback keeps the round going
                sim.construction_fallbacks += 1;
                m.dense_fallbacks += 1;
                use_dense = true;
            }
        }
        if (transport != Transport::Filter || use_dense) {
            reconstructed = reconstruct_mask(server_mask, kept.indices);
            if (use_dense) bytes = dense_mask_byte_size(d);
        }

        sim.cum_bytes += bytes;
        double bpp = 8.0 * static_cast<double>(bytes) / static_cast<double>(d);
        m.mean_bpp += bpp;
        sim.bpp_sum += bpp;
        sim.update_count += 1;
        received.push_back(std::move(reconstructed));
    }

    double participants = static_cast<double>(order.size());
    m.mean_delta /= participants;
    m.mean_delta_prime /= participants;
    m.mean_bpp /= participants;

    bayes_agg(received, sim.state);

    BinaryMask eval_mask =
        cfg.eval_mode == EvalMode::Sampled
            ? sample_mask(sim.state.theta, derive_seed(round_seed, kRoleEvalMask))
            : threshold_mask(sim.state.theta);
    m.accuracy = evaluate(sim.model, eval_mask, sim.test_set);
    m.cum_bytes = sim.cum_bytes;
    return m;
}

}  // namespace

RoundMetrics run_round(Simulation& sim, std::uint32_t t) {
    return run_round_impl(sim, t, sim.config.transport);
}

RoundMetrics dense_baseline_round(Simulation& sim, std::uint32_t t) {
    return run_round_impl(sim, t, Transport::Dense);
}

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& artifact_dir) {
    Simulation sim = prepare_experiment(config);
    sim.artifact_dir = artifact_dir;

    ExperimentResult result;
    result.probe_accuracy = sim.probe_accuracy;
    for (std::uint32_t t = 0; t < config.rounds; ++t)
        result.rounds.push_back(run_round(sim, t));

    result.final_accuracy =
        result.rounds.empty() ? sim.probe_accuracy : result.rounds.back().accuracy;
    result.total_bytes = sim.cum_bytes;
    result.mean_bpp = sim.update_count == 0
                          ? 0.0
                          : sim.bpp_sum / static_cast<double>(sim.update_count);
    std::uint64_t dense_float_bytes =
        sim.update_count * sim.state.dimension * 4;  // 32-bit float per coordinate
    result.relative_volume = dense_float_bytes == 0
                                 ? 0.0
                                 : static_cast<double>(result.total_bytes) /
                                       static_cast<double>(dense_float_bytes);
    result.construction_fallbacks = sim.construction_fallbacks;
    result.state = std::move(sim.state);
    return result;
}

BinaryMask threshold_mask(const std::vector<double>& probs) {
    BinaryMask m(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i)
        if (probs[i] >= 0.5) m.set(i, true);
    return m;
}

std::string summary_json(const ExperimentResult& result, const ExperimentConfig& config) {
    nlohmann::ordered_json j;
    j["probe_accuracy"] = result.probe_accuracy;
    j["final_accuracy"] = result.final_accuracy;
    j["mean_bpp"] = result.mean_bpp;
    j["total_bytes"] = result.total_bytes;
    j["relative_volume"] = result.relative_volume;
    j["construction_fallbacks"] = result.construction_fallbacks;
    j["rounds"] = result.rounds.size();
    j["dimension"] = result.state.dimension;
    j["config"] = {
        {"clients", config.clients},
        {"rounds", config.rounds},
        {"participation", config.participation},
        {"local_epochs", config.local_epochs},
        {"seed", config.seed},
        {"bits_per_entry", config.bits_per_entry},
        {"arity", config.arity},
        {"transport", config.transport == Transport::Filter
                          ? "filter"
                          : (config.transport == Transport::Dense ? "dense" : "bypass")},
        {"eval", config.eval_mode == EvalMode::Sampled ? "sampled" : "thresholded"},
    };
    return j.dump(2) + "\n";
}

std::vector<std::uint8_t> serialize_dense_mask(const BinaryMask& mask, std::uint32_t round) {
    std::vector<std::uint8_t> out;
    std::uint64_t d = mask.size();
    out.reserve(kDenseHeaderBytes + (d + 7) / 8);
    out.insert(out.end(), kDenseMagic, kDenseMagic + 4);
    out.push_back(kDenseFormatVersion);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(round >> (8 * i)));
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(d >> (8 * i)));
    const auto& words = mask.words();
    for (std::uint64_t byte = 0; byte < (d + 7) / 8; ++byte)
        out.push_back(static_cast<std::uint8_t>(words[byte / 8] >> (8 * (byte % 8))));
    return out;
}

std::size_t dense_mask_byte_size(std::uint64_t dimension) {
    return kDenseHeaderBytes + (dimension + 7) / 8;
}

}  // namespace deltamask
