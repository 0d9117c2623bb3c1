#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltamask/mask.hpp"

namespace deltamask {

/// Per-coordinate Beta posterior parameters.
struct BetaPrior {
    std::vector<double> alpha;
    std::vector<double> beta;
    double lambda0 = 1.0;
};

/// Server-side aggregation state. `round` is 1-based and advanced by
/// bayes_agg itself; `theta` always holds the latest posterior-mode
/// probabilities (0.5 before any aggregation).
struct GlobalState {
    std::uint64_t dimension = 0;
    std::uint32_t round = 0;
    double participation = 1.0;
    BetaPrior prior;
    std::vector<double> theta;
};

GlobalState init_global_state(std::uint64_t dimension, double participation, double lambda0);

/// Reset the prior to lambda0 whenever t is a multiple of the reset period
/// round(1/participation); the period uses round-half-even.
void maybe_reset(BetaPrior& prior, std::uint32_t t, double participation);

/// Advance one round: maybe_reset, add the received masks as Bernoulli
/// evidence (alpha += ones, beta += zeros), and recompute theta as the
/// posterior mode (alpha-1)/(alpha+beta-2), falling back to 0.5 when the
/// denominator is not positive. With a fresh prior this equals the
/// element-wise mean of the masks exactly.
void bayes_agg(const std::vector<BinaryMask>& masks, GlobalState& state);

/// Plain element-wise average of binary masks.
std::vector<double> estimate_mean(const std::vector<BinaryMask>& masks);

struct BoundCheck {
    double empirical = 0.0;  // Monte Carlo mean of ||theta_bar - mask_mean||^2
    double bound = 0.0;      // d / (4K)
    double tolerance = 0.0;  // bound * (1 + 3/sqrt(trials))
    bool pass = false;
};

/// Monte Carlo check of the aggregation error bound: masks are sampled
/// from the given per-client probabilities, optionally pushed through an
/// independent bit-flip channel, and the squared distance between the true
/// mean probability and the mask average is compared against d/(4K).
BoundCheck verify_error_bound(const std::vector<std::vector<double>>& thetas,
                              std::size_t trials, std::uint64_t rng_seed,
                              double flip_prob = 0.0);

std::vector<std::uint8_t> serialize_state(const GlobalState& state);
GlobalState deserialize_state(std::span<const std::uint8_t> bytes);

}  // namespace deltamask
