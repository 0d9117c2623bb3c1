#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "deltamask/aggregate.hpp"
#include "deltamask/dataset.hpp"
#include "deltamask/metrics.hpp"
#include "deltamask/model.hpp"

namespace deltamask {

enum class KappaMode { Constant, Cosine };
enum class EvalMode { Sampled, Thresholded };
enum class DataKind { Blobs, Rings };

/// How client updates travel to the server.
///  Filter: fingerprint-filter codec (the real transport).
///  Dense:  raw d-bit mask of the same pruned update; lossless.
///  Bypass: no wire format at all; pruned flips applied directly.
/// Dense and Bypass produce identical trajectories; Filter matches them
/// whenever no false positive occurs.
enum class Transport { Filter, Dense, Bypass };

struct ExperimentConfig {
    // federation
    std::size_t clients = 8;
    std::size_t rounds = 40;
    double participation = 1.0;
    std::size_t local_epochs = 1;
    double lambda0 = 1.0;
    std::uint64_t seed = 42;

    // data
    DataKind data_kind = DataKind::Blobs;
    std::size_t classes = 2;
    std::size_t clusters_per_class = 2;
    std::size_t feature_dim = 6;
    std::size_t train_samples = 16000;
    std::size_t test_samples = 2000;
    double noise = 0.8;
    double dirichlet_alpha = 10.0;

    // model: one wide maskable layer; the probe plateaus well below
    // what mask training reaches on this layout, which is the headroom
    // the toy task exists to demonstrate
    std::vector<std::size_t> hidden = {1500};
    std::size_t probe_epochs = 1;
    double probe_lr = 0.05;

    // mask training
    double lr = 0.1;
    std::size_t batch_size = 64;
    double kappa_start = 0.8;
    double kappa_end = 1.0;
    KappaMode kappa_mode = KappaMode::Cosine;

    // codec
    std::uint32_t bits_per_entry = 8;
    std::uint32_t arity = 4;
    Transport transport = Transport::Filter;

    // outputs
    EvalMode eval_mode = EvalMode::Sampled;
    bool dump_updates = false;
    bool dump_png = false;
};

/// Throws ConfigError naming the offending field.
void validate(const ExperimentConfig& config);

/// Split a dataset into per-client shards: for every class, client quotas
/// are drawn from Dirichlet(alpha * 1_N). Every client ends up with at
/// least one sample (the draw is repaired deterministically if needed).
std::vector<Dataset> partition_dirichlet(const Dataset& data, std::size_t clients, double alpha,
                                         HashSeed seed);

/// Mean fraction of classes present in each client shard.
double class_coverage(const std::vector<Dataset>& shards, std::size_t classes);

/// Fraction of delta positions kept at round t of R. Cosine mode anneals
/// from kappa_start at t=0 to kappa_end at t=R-1; constant mode always
/// returns kappa_start.
double kappa_schedule(std::uint32_t t, std::uint32_t rounds, double kappa_start,
                      double kappa_end, KappaMode mode);

/// Everything one experiment needs between rounds.
struct Simulation {
    ExperimentConfig config;
    FrozenModel model;
    std::vector<Dataset> shards;
    Dataset test_set;
    GlobalState state;
    double probe_accuracy = 0.0;
    std::uint64_t cum_bytes = 0;
    std::uint64_t construction_fallbacks = 0;
    double bpp_sum = 0.0;          // per-update bpp accumulator
    std::uint64_t update_count = 0;
    std::string artifact_dir;      // when non-empty and dumping is on
};

/// Build model + data, run the linear probe, initialize server state.
Simulation prepare_experiment(const ExperimentConfig& config);

/// Execute federated round t (0-based): sample the public server mask,
/// train the selected clients, move their pruned deltas through the
/// configured transport, aggregate, evaluate.
RoundMetrics run_round(Simulation& sim, std::uint32_t t);

/// run_round with the transport forced to the raw dense-mask baseline.
RoundMetrics dense_baseline_round(Simulation& sim, std::uint32_t t);

struct ExperimentResult {
    double probe_accuracy = 0.0;
    double final_accuracy = 0.0;
    double mean_bpp = 0.0;  // over all transmitted updates
    std::uint64_t total_bytes = 0;
    double relative_volume = 0.0;  // vs 32-bit floats for every coordinate
    std::uint64_t construction_fallbacks = 0;
    std::vector<RoundMetrics> rounds;
    GlobalState state;
};

ExperimentResult run_experiment(const ExperimentConfig& config,
                                const std::string& artifact_dir = "");

/// Threshold at 0.5 (>= picks 1).
BinaryMask threshold_mask(const std::vector<double>& probs);

std::string summary_json(const ExperimentResult& result, const ExperimentConfig& config);

/// Raw dense-mask wire format used by the baseline transport.
std::vector<std::uint8_t> serialize_dense_mask(const BinaryMask& mask, std::uint32_t round);
std::size_t dense_mask_byte_size(std::uint64_t dimension);

}  // namespace deltamask
