#include "deltamask/filter.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace deltamask {

namespace {

std::uint32_t fp_mask(std::uint32_t bits_per_entry) {
    return bits_per_entry == 32 ? 0xffffffffu : ((1u << bits_per_entry) - 1u);
}

std::uint64_t rotl64(std::uint64_t x, unsigned r) {
    return (x << r) | (x >> (64 - r));
}

void check_build_args(std::uint32_t bits_per_entry, std::uint32_t arity) {
    if (bits_per_entry != 8 && bits_per_entry != 16 && bits_per_entry != 32)
        throw InvalidSpec("bits_per_entry must be 8, 16 or 32");
    if (arity != 3 && arity != 4) throw InvalidSpec("arity must be 3 or 4");
}

void check_duplicates(std::span<const std::uint64_t> keys) {
    std::vector<std::uint64_t> sorted(keys.begin(), keys.end());
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw DuplicateKeys("key set contains duplicates");
}

HashSeed attempt_seed(HashSeed base, std::uint32_t attempt) {
    if (attempt == 0) return base;
    return HashSeed{hash64(attempt, derive_seed(base, kRoleRetry))};
}

/// Hypergraph peeling shared by both layouts. Returns true and fills
/// `filter.entries` on success.
bool try_build(std::span<const std::uint64_t> keys, Filter& filter) {
    const FilterParams& p = filter.params;
    const std::size_t n = keys.size();
    const std::uint32_t arity = p.arity;

    std::vector<std::uint32_t> slots(n * arity);
    for (std::size_t i = 0; i < n; ++i) locations(keys[i], p, &slots[i * arity]);

    std::vector<std::uint32_t> degree(p.array_length, 0);
    std::vector<std::uint32_t> xor_idx(p.array_length, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::uint32_t j = 0; j < arity; ++j) {
            std::uint32_t s = slots[i * arity + j];
            degree[s]++;
            xor_idx[s] ^= static_cast<std::uint32_t>(i);
        }
    }

    std::vector<std::uint32_t> ready;
    ready.reserve(p.array_length / 4 + 16);
    for (std::uint32_t s = 0; s < p.array_length; ++s)
        if (degree[s] == 1) ready.push_back(s);

    // peel order: (key index, slot the key was peeled at)
    std::vector<std::pair<std::uint32_t, std::uint32_t>> peeled;
    peeled.reserve(n);
    while (!ready.empty()) {
        std::uint32_t s = ready.back();
        ready.pop_back();
        if (degree[s] != 1) continue;
        std::uint32_t i = xor_idx[s];
        peeled.emplace_back(i, s);
        for (std::uint32_t j = 0; j < arity; ++j) {
            std::uint32_t t = slots[std::size_t(i) * arity + j];
            degree[t]--;
            xor_idx[t] ^= i;
            if (degree[t] == 1) ready.push_back(t);
        }
    }
    if (peeled.size() != n) return false;

    filter.entries.assign(p.array_length, 0);
    for (auto it = peeled.rbegin(); it != peeled.rend(); ++it) {
        auto [i, s] = *it;
        std::uint32_t fold = fingerprint_of(keys[i], p);
        for (std::uint32_t j = 0; j < arity; ++j) {
            std::uint32_t t = slots[std::size_t(i) * arity + j];
            if (t != s) fold ^= filter.entries[t];
        }
        filter.entries[s] = fold;
    }
    return true;
}

Filter build_any(std::span<const std::uint64_t> keys, FilterParams params, HashSeed base_seed) {
    check_duplicates(keys);
    Filter filter;
    filter.params = params;
    if (keys.empty()) {
        filter.entries.assign(params.array_length, 0);
        return filter;
    }
    for (std::uint32_t attempt = 0; attempt < kFilterRetryLimit; ++attempt) {
        filter.params.seed = attempt_seed(base_seed, attempt);
        if (try_build(keys, filter)) return filter;
    }
    throw ConstructionFailed("filter construction failed after " +
                             std::to_string(kFilterRetryLimit) + " attempts over " +
                             std::to_string(keys.size()) + " keys");
}

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void write_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[off + i]) << (8 * i);
    return v;
}

std::uint64_t read_u64(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[off + i]) << (8 * i);
    return v;
}

constexpr char kFilterMagic[4] = {'D', 'M', 'F', '1'};
constexpr std::size_t kHeaderFieldBytes = 28;  // everything after the magic

}  // namespace

std::uint32_t fingerprint_of(std::uint64_t key, const FilterParams& params) {
    std::uint64_t h = hash64(key, derive_seed(params.seed, kRoleFingerprint));
    std::uint32_t fp = static_cast<std::uint32_t>(h) & fp_mask(params.bits_per_entry);
    return fp == 0 ? 1u : fp;
}

void locations(std::uint64_t key, const FilterParams& params, std::uint32_t out[4]) {
    std::uint64_t h = hash64(key, derive_seed(params.seed, kRoleLocation));
    if (params.kind == FilterKind::BinaryFuse) {
        std::uint64_t start_window =
            std::uint64_t(params.segment_count - params.arity + 1) * params.segment_length;
        std::uint64_t hi = mulhi(h, start_window);
        std::uint32_t window = params.arity == 3 ? 18 : 16;
        std::uint32_t total = (params.arity - 1) * window;
        std::uint64_t hh = h & ((1ull << total) - 1);
        std::uint32_t mask = params.segment_length - 1;
        for (std::uint32_t j = 0; j < params.arity; ++j) {
            std::uint64_t slot = hi + std::uint64_t(j) * params.segment_length;
            slot ^= (hh >> (total - window * j)) & mask;
            out[j] = static_cast<std::uint32_t>(slot);
        }
    } else {
        for (std::uint32_t j = 0; j < 3; ++j) {
            out[j] = static_cast<std::uint32_t>(mulhi(rotl64(h, 21 * j), params.segment_length)) +
                     j * params.segment_length;
        }
    }
}

FilterParams size_binary_fuse(std::uint32_t key_count, std::uint32_t arity,
                              std::uint32_t bits_per_entry, HashSeed seed) {
    FilterParams p;
    p.kind = FilterKind::BinaryFuse;
    p.arity = arity;
    p.bits_per_entry = bits_per_entry;
    p.key_count = key_count;
    p.seed = seed;
    if (key_count < 2 * arity) {
        p.segment_length = 4;
        p.segment_count = arity;
    } else {
        double ln_n = std::log(static_cast<double>(key_count));
        int exponent = arity == 3
                           ? static_cast<int>(std::floor(ln_n / std::log(3.33) + 2.25))
                           : static_cast<int>(std::floor(ln_n / std::log(2.91) - 0.5));
        exponent = std::clamp(exponent, 2, 18);
        p.segment_length = 1u << exponent;
        double factor = arity == 3
                            ? std::max(1.125, 0.875 + 0.25 * std::log(1e6) / ln_n)
                            : std::max(1.075, 0.77 + 0.305 * std::log(6e5) / ln_n);
        auto capacity = static_cast<std::uint64_t>(std::llround(key_count * factor));
        auto segments = static_cast<std::uint32_t>((capacity + p.segment_length - 1) /
                                                   p.segment_length);
        p.segment_count = std::max(segments, arity);
    }
    p.array_length = p.segment_count * p.segment_length;
    return p;
}

FilterParams size_xor(std::uint32_t key_count, std::uint32_t bits_per_entry, HashSeed seed) {
    FilterParams p;
    p.kind = FilterKind::Xor;
    p.arity = 3;
    p.bits_per_entry = bits_per_entry;
    p.key_count = key_count;
    p.seed = seed;
    auto capacity = static_cast<std::uint64_t>(std::ceil(32.0 + 1.23 * key_count));
    p.segment_length = static_cast<std::uint32_t>((capacity + 2) / 3);
    p.segment_count = 3;
    p.array_length = p.segment_count * p.segment_length;
    return p;
}

Filter build_filter(std::span<const std::uint64_t> keys, std::uint32_t bits_per_entry,
                    std::uint32_t arity, HashSeed seed) {
    check_build_args(bits_per_entry, arity);
    FilterParams p = size_binary_fuse(static_cast<std::uint32_t>(keys.size()), arity,
                                      bits_per_entry, seed);
    return build_any(keys, p, seed);
}

Filter build_xor_filter(std::span<const std::uint64_t> keys, std::uint32_t bits_per_entry,
                        HashSeed seed) {
    check_build_args(bits_per_entry, 3);
    FilterParams p = size_xor(static_cast<std::uint32_t>(keys.size()), bits_per_entry, seed);
    return build_any(keys, p, seed);
}

bool contains(const Filter& filter, std::uint64_t key) {
    std::uint32_t loc[4];
    locations(key, filter.params, loc);
    std::uint32_t fold = 0;
    for (std::uint32_t j = 0; j < filter.params.arity; ++j) fold ^= filter.entries[loc[j]];
    return fold == fingerprint_of(key, filter.params);
}

double space_bits_per_key(const Filter& filter) {
    if (filter.params.key_count == 0) return 0.0;
    return static_cast<double>(filter.params.array_length) * filter.params.bits_per_entry /
           filter.params.key_count;
}

std::vector<std::uint8_t> serialize_filter_header_fields(const FilterParams& params) {
    std::vector<std::uint8_t> out;
    out.reserve(kHeaderFieldBytes);
    out.push_back(kFilterFormatVersion);
    out.push_back(static_cast<std::uint8_t>(params.arity));
    out.push_back(static_cast<std::uint8_t>(params.bits_per_entry));
    out.push_back(static_cast<std::uint8_t>(params.kind));
    write_u64(out, params.seed.value);
    write_u32(out, params.key_count);
    write_u32(out, params.array_length);
    write_u32(out, params.segment_length);
    write_u32(out, params.segment_count);
    return out;
}

FilterParams parse_filter_header_fields(std::span<const std::uint8_t> bytes, std::size_t& offset) {
    if (bytes.size() < offset + kHeaderFieldBytes)
        throw TruncatedPayload("filter header truncated");
    std::uint8_t version = bytes[offset];
    if (version != kFilterFormatVersion)
        throw VersionMismatch("unsupported filter format version " + std::to_string(version));
    FilterParams p;
    p.arity = bytes[offset + 1];
    p.bits_per_entry = bytes[offset + 2];
    std::uint8_t kind = bytes[offset + 3];
    p.seed = HashSeed{read_u64(bytes, offset + 4)};
    p.key_count = read_u32(bytes, offset + 12);
    p.array_length = read_u32(bytes, offset + 16);
    p.segment_length = read_u32(bytes, offset + 20);
    p.segment_count = read_u32(bytes, offset + 24);
    offset += kHeaderFieldBytes;

    if (kind > 1) throw MalformedHeader("unknown filter kind " + std::to_string(kind));
    p.kind = static_cast<FilterKind>(kind);
    if (p.arity != 3 && p.arity != 4) throw MalformedHeader("invalid arity in filter header");
    if (p.bits_per_entry != 8 && p.bits_per_entry != 16 && p.bits_per_entry != 32)
        throw MalformedHeader("invalid bits_per_entry in filter header");
    if (p.segment_length == 0 || p.segment_count < p.arity ||
        std::uint64_t(p.segment_length) * p.segment_count != p.array_length)
        throw MalformedHeader("inconsistent filter geometry");
    if (p.kind == FilterKind::BinaryFuse && (p.segment_length & (p.segment_length - 1)) != 0)
        throw MalformedHeader("segment length must be a power of two");
    return p;
}

std::size_t filter_entry_bytes(const FilterParams& params) {
    return std::size_t(params.array_length) * (params.bits_per_entry / 8);
}

std::vector<std::uint8_t> pack_entries(const Filter& filter) {
    const std::uint32_t width = filter.params.bits_per_entry / 8;
    std::vector<std::uint8_t> out;
    out.reserve(filter.entries.size() * width);
    for (std::uint32_t e : filter.entries)
        for (std::uint32_t i = 0; i < width; ++i)
            out.push_back(static_cast<std::uint8_t>(e >> (8 * i)));
    return out;
}

std::vector<std::uint32_t> unpack_entries(std::span<const std::uint8_t> bytes,
                                          const FilterParams& params) {
    const std::uint32_t width = params.bits_per_entry / 8;
    if (bytes.size() != filter_entry_bytes(params))
        throw TruncatedPayload("filter payload size mismatch");
    std::vector<std::uint32_t> entries(params.array_length, 0);
    for (std::size_t s = 0; s < entries.size(); ++s) {
        std::uint32_t v = 0;
        for (std::uint32_t i = 0; i < width; ++i)
            v |= std::uint32_t(bytes[s * width + i]) << (8 * i);
        entries[s] = v;
    }
    return entries;
}

std::vector<std::uint8_t> serialize_filter(const Filter& filter) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + kHeaderFieldBytes + filter_entry_bytes(filter.params));
    out.insert(out.end(), kFilterMagic, kFilterMagic + 4);
    auto header = serialize_filter_header_fields(filter.params);
    out.insert(out.end(), header.begin(), header.end());
    auto payload = pack_entries(filter);
    out.insert(out.end(), payload.begin(), payload.end());
    return out;
}

Filter deserialize_filter(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw TruncatedPayload("filter blob shorter than magic");
    if (std::memcmp(bytes.data(), kFilterMagic, 4) != 0)
        throw MalformedHeader("bad filter magic");
    std::size_t offset = 4;
    Filter f;
    f.params = parse_filter_header_fields(bytes, offset);
    if (bytes.size() - offset != filter_entry_bytes(f.params))
        throw TruncatedPayload("filter payload size mismatch");
    f.entries = unpack_entries(bytes.subspan(offset), f.params);
    return f;
}

}  // namespace deltamask
