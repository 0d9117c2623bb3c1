#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltamask/filter.hpp"
#include "deltamask/mask.hpp"

namespace deltamask {

/// Positions where a client's sampled mask differs from the server's,
/// ranked and pruned. `indices` is strictly increasing; `kl_weights[i]`
/// is the divergence weight that kept `indices[i]` in the set.
struct DeltaSet {
    std::vector<std::uint64_t> indices;
    std::vector<double> kl_weights;
};

/// One client-to-server payload: a fingerprint filter over the kept delta
/// positions, DEFLATE-compressed.
struct EncodedUpdate {
    std::uint32_t round = 0;
    std::uint64_t dimension = 0;
    FilterParams filter;
    std::vector<std::uint8_t> compressed;
    bool export_png = false;  // ask artifact dumpers to also write a PNG view
};

/// Positions where the two masks differ, ascending. Throws LengthMismatch.
std::vector<std::uint64_t> delta_indices(const BinaryMask& server, const BinaryMask& client);

/// KL divergence between Bernoulli(p) and Bernoulli(q); both arguments are
/// clamped into [1e-6, 1 - 1e-6] so the value stays finite.
double kl_bernoulli(double p, double q);

/// Keep the ceil(kappa * |delta|) positions with the largest
/// KL(client theta_i || server theta_i); ties broken by ascending index.
DeltaSet rank_topk(const std::vector<std::uint64_t>& delta,
                   const std::vector<double>& client_probs,
                   const std::vector<double>& server_probs, double kappa);

/// Build the fused fingerprint filter over the kept positions and compress.
EncodedUpdate encode_update(const DeltaSet& delta, std::uint64_t dimension, std::uint32_t round,
                            std::uint32_t bits_per_entry, std::uint32_t arity, HashSeed seed);

/// Membership sweep over [0, dimension): every encoded position is
/// recovered; extra positions appear at the filter's false-positive rate.
std::vector<std::uint64_t> decode_update(const EncodedUpdate& update);

/// Apply decoded flips to the shared server mask.
BinaryMask reconstruct_mask(const BinaryMask& server, const std::vector<std::uint64_t>& flips);

std::vector<std::uint8_t> serialize_update(const EncodedUpdate& update);
EncodedUpdate deserialize_update(std::span<const std::uint8_t> bytes);

/// Serialized size in bytes (header + compressed payload).
std::size_t update_byte_size(const EncodedUpdate& update);

/// Transmitted bits per model parameter.
double bits_per_parameter(const EncodedUpdate& update);

}  // namespace deltamask
