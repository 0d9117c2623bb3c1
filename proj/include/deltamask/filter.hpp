#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltamask/errors.hpp"
#include "deltamask/hash.hpp"

namespace deltamask {

enum class FilterKind : std::uint8_t {
    BinaryFuse = 0,
    Xor = 1,
};

/// Geometry and hashing parameters of a built filter.
///
/// For the fused layout, `segment_count` counts all segments, so
/// `array_length == segment_count * segment_length` and a key's start
/// segment is drawn from the first `segment_count - arity + 1` segments.
/// For the classic XOR layout, `segment_length` is the block length and
/// `segment_count` is always 3.
struct FilterParams {
    FilterKind kind = FilterKind::BinaryFuse;
    std::uint32_t arity = 3;
    std::uint32_t bits_per_entry = 8;
    std::uint32_t segment_length = 0;
    std::uint32_t segment_count = 0;
    std::uint32_t array_length = 0;
    std::uint32_t key_count = 0;
    HashSeed seed;
};

/// Static membership structure: a key is reported present iff the XOR of
/// its `arity` slots equals its fingerprint. Zero false negatives by
/// construction; false positives at rate ~2^-bits_per_entry.
struct Filter {
    FilterParams params;
    std::vector<std::uint32_t> entries;
};

inline constexpr std::uint32_t kFilterRetryLimit = 100;
inline constexpr std::uint8_t kFilterFormatVersion = 1;

/// Fingerprint in [1, 2^bits_per_entry): the raw truncated hash, with 0
/// remapped to 1 so empty slots can never match.
std::uint32_t fingerprint_of(std::uint64_t key, const FilterParams& params);

/// The `arity` slot indices probed for a key, one per consecutive segment
/// (fused layout) or one per block (XOR layout). Writes `params.arity`
/// entries into `out`.
void locations(std::uint64_t key, const FilterParams& params, std::uint32_t out[4]);

/// Sizing policies. Tiny key sets fall back to a single-start-window
/// degenerate layout; everything else follows size-dependent overhead
/// factors that approach 1.125 (arity 3) and 1.075 (arity 4) as n grows.
FilterParams size_binary_fuse(std::uint32_t key_count, std::uint32_t arity,
                              std::uint32_t bits_per_entry, HashSeed seed);
FilterParams size_xor(std::uint32_t key_count, std::uint32_t bits_per_entry, HashSeed seed);

/// Build a fused-layout filter over deduplicated keys. Retries with
/// re-derived seeds up to kFilterRetryLimit times.
/// Throws DuplicateKeys or ConstructionFailed.
Filter build_filter(std::span<const std::uint64_t> keys, std::uint32_t bits_per_entry,
                    std::uint32_t arity, HashSeed seed);

/// Classic 3-wise XOR-filter variant (independent blocks, 1.23x + 32 slots).
Filter build_xor_filter(std::span<const std::uint64_t> keys, std::uint32_t bits_per_entry,
                        HashSeed seed);

bool contains(const Filter& filter, std::uint64_t key);

/// Occupied storage in bits per inserted key.
double space_bits_per_key(const Filter& filter);

std::vector<std::uint8_t> serialize_filter(const Filter& filter);
Filter deserialize_filter(std::span<const std::uint8_t> bytes);

/// Header fields without the leading magic, as embedded in update blobs.
std::vector<std::uint8_t> serialize_filter_header_fields(const FilterParams& params);
FilterParams parse_filter_header_fields(std::span<const std::uint8_t> bytes, std::size_t& offset);
std::size_t filter_entry_bytes(const FilterParams& params);

std::vector<std::uint8_t> pack_entries(const Filter& filter);
std::vector<std::uint32_t> unpack_entries(std::span<const std::uint8_t> bytes,
                                          const FilterParams& params);

}  // namespace deltamask
