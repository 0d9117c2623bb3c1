#include "deltamask/codec.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>
#include <string>

#include "deltamask/deflate.hpp"

namespace deltamask {

namespace {

constexpr char kUpdateMagic[4] = {'D', 'M', 'U', '1'};
constexpr std::uint8_t kUpdateFormatVersion = 1;
constexpr std::size_t kUpdateHeaderBytes = 4 + 1 + 4 + 8 + 28 + 4;

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

}  // namespace

std::vector<std::uint64_t> delta_indices(const BinaryMask& server, const BinaryMask& client) {
    if (server.size() != client.size())
        throw LengthMismatch("mask sizes differ: " + std::to_string(server.size()) + " vs " +
                             std::to_string(client.size()));
    std::vector<std::uint64_t> out;
    const auto& a = server.words();
    const auto& b = client.words();
    for (std::size_t w = 0; w < a.size(); ++w) {
        std::uint64_t diff = a[w] ^ b[w];
        while (diff) {
            unsigned bit = static_cast<unsigned>(std::countr_zero(diff));
            out.push_back(std::uint64_t(w) * 64 + bit);
            diff &= diff - 1;
        }
    }
    return out;
}

double kl_bernoulli(double p, double q) {
    p = clamp_probability(p);
    q = clamp_probability(q);
    return p * std::log(p / q) + (1.0 - p) * std::log((1.0 - p) / (1.0 - q));
}

DeltaSet rank_topk(const std::vector<std::uint64_t>& delta,
                   const std::vector<double>& client_probs,
                   const std::vector<double>& server_probs, double kappa) {
    if (client_probs.size() != server_probs.size())
        throw LengthMismatch("probability vector sizes differ");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw InvalidSpec("kappa must lie in (0, 1]");
    DeltaSet out;
    if (delta.empty()) return out;

    struct Ranked {
        std::uint64_t index;
        double kl;
    };
    std::vector<Ranked> ranked;
    ranked.reserve(delta.size());
    for (std::uint64_t i : delta) {
        if (i >= client_probs.size())
            throw IndexOutOfRange("delta index " + std::to_string(i) + " out of range");
        ranked.push_back({i, kl_bernoulli(client_probs[i], server_probs[i])});
    }
    auto keep = static_cast<std::size_t>(
        std::ceil(kappa * static_cast<double>(delta.size())));
    keep = std::min(keep, ranked.size());
    std::partial_sort(ranked.begin(), ranked.begin() + keep, ranked.end(),
                      [](const Ranked& a, const Ranked& b) {
                          if (a.kl != b.kl) return a.kl > b.kl;
                          return a.index < b.index;
                      });
    ranked.resize(keep);
    std::sort(ranked.begin(), ranked.end(),
              [](const Ranked& a, const Ranked& b) { return a.index < b.index; });
    out.indices.reserve(keep);
    out.kl_weights.reserve(keep);
    for (const auto& r : ranked) {
        out.indices.push_back(r.index);
        out.kl_weights.push_back(r.kl);
    }
    return out;
}

EncodedUpdate encode_update(const DeltaSet& delta, std::uint64_t dimension, std::uint32_t round,
                            std::uint32_t bits_per_entry, std::uint32_t arity, HashSeed seed) {
    for (std::uint64_t i : delta.indices)
        if (i >= dimension)
            throw IndexOutOfRange("delta index " + std::to_string(i) +
                                  " exceeds dimension " + std::to_string(dimension));
    Filter filter = build_filter(delta.indices, bits_per_entry, arity, seed);
    EncodedUpdate u;
    u.round = round;
    u.dimension = dimension;
    u.filter = filter.params;
    u.compressed = deflate_bytes(pack_entries(filter));
    return u;
}

std::vector<std::uint64_t> decode_update(const EncodedUpdate& update) {
    Filter filter;
    filter.params = update.filter;
    auto raw = inflate_bytes(update.compressed, filter_entry_bytes(update.filter));
    filter.entries = unpack_entries(raw, update.filter);
    std::vector<std::uint64_t> out;
    out.reserve(update.filter.key_count + update.filter.key_count / 8 + 16);
    for (std::uint64_t i = 0; i < update.dimension; ++i)
        if (contains(filter, i)) out.push_back(i);
    return out;
}

BinaryMask reconstruct_mask(const BinaryMask& server, const std::vector<std::uint64_t>& flips) {
    BinaryMask out = server;
    for (std::uint64_t i : flips) {
        if (i >= out.size())
            throw IndexOutOfRange("flip index " + std::to_string(i) + " out of range");
        out.flip(i);
    }
    return out;
}

std::vector<std::uint8_t> serialize_update(const EncodedUpdate& update) {
    std::vector<std::uint8_t> out;
    out.reserve(kUpdateHeaderBytes + update.compressed.size());
    out.insert(out.end(), kUpdateMagic, kUpdateMagic + 4);
    out.push_back(kUpdateFormatVersion);
    write_u32(out, update.round);
    write_u64(out, update.dimension);
    auto header = serialize_filter_header_fields(update.filter);
    out.insert(out.end(), header.begin(), header.end());
    write_u32(out, static_cast<std::uint32_t>(update.compressed.size()));
    out.insert(out.end(), update.compressed.begin(), update.compressed.end());
    return out;
}

EncodedUpdate deserialize_update(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 4) throw TruncatedPayload("update blob shorter than magic");
    if (std::memcmp(bytes.data(), kUpdateMagic, 4) != 0)
        throw MalformedHeader("bad update magic");
    if (bytes.size() < kUpdateHeaderBytes) throw TruncatedPayload("update header truncated");
    if (bytes[4] != kUpdateFormatVersion)
        throw VersionMismatch("unsupported update format version " + std::to_string(bytes[4]));
    EncodedUpdate u;
    u.round = read_u32(bytes, 5);
    u.dimension = read_u64(bytes, 9);
    std::size_t offset = 17;
    u.filter = parse_filter_header_fields(bytes, offset);
    std::uint32_t len = read_u32(bytes, offset);
    offset += 4;
    if (bytes.size() - offset != len) throw TruncatedPayload("update payload size mismatch");
    u.compressed.assign(bytes.begin() + static_cast<std::ptrdiff_t>(offset), bytes.end());
    return u;
}

std::size_t update_byte_size(const EncodedUpdate& update) {
    return kUpdateHeaderBytes + update.compressed.size();
}

double bits_per_parameter(const EncodedUpdate& update) {
    return 8.0 * static_cast<double>(update_byte_size(update)) /
           static_cast<double>(update.dimension);
}

}  // namespace deltamask
