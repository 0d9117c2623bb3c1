#pragma once

#include <cstdint>

namespace deltamask {

/// Strong typedef so a seed is never confused with a key.
struct HashSeed {
    std::uint64_t value = 0;

    friend bool operator==(HashSeed a, HashSeed b) { return a.value == b.value; }
};

// Role constants for deriving independent hash streams from one seed.
// Arbitrary odd 64-bit constants; only their distinctness matters.
inline constexpr std::uint64_t kRoleFingerprint = 0x9e3779b97f4a7c15ull;
inline constexpr std::uint64_t kRoleLocation = 0xc2b2ae3d27d4eb4full;
inline constexpr std::uint64_t kRoleRetry = 0x165667b19e3779f9ull;
inline constexpr std::uint64_t kRoleServerMask = 0x27d4eb2f165667c5ull;
inline constexpr std::uint64_t kRoleClientTrain = 0xbf58476d1ce4e5b9ull;
inline constexpr std::uint64_t kRoleParticipants = 0xd6e8feb86659fd93ull;
inline constexpr std::uint64_t kRoleEvalMask = 0xa0761d6478bd642full;
inline constexpr std::uint64_t kRoleFilterBuild = 0xe7037ed1a0b428dbull;
inline constexpr std::uint64_t kRoleBatchOrder = 0x8ebc6af09c88c6e3ull;
inline constexpr std::uint64_t kRoleBatchMask = 0x589965cc75374cc3ull;
inline constexpr std::uint64_t kRoleDataset = 0x1d8e4e27c47d124full;
inline constexpr std::uint64_t kRoleModelInit = 0x2545f4914f6cdd1dull;
inline constexpr std::uint64_t kRoleProbe = 0x6c62272e07bb0142ull;
inline constexpr std::uint64_t kRolePartition = 0x9ae16a3b2f90404full;

/// 64-bit finalizer-style avalanche mixer (bijective on uint64).
inline std::uint64_t mix64(std::uint64_t h) {
    h ^= h >> 33;
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    h *= 0xc4ceb9fe1a85ec53ull;
    h ^= h >> 33;
    return h;
}

/// Seeded 64-bit hash. Deterministic; for a fixed seed it is a bijection
/// of the key, so two distinct seeds never map the same key to the same
/// output unless the seeds collide themselves.
inline std::uint64_t hash64(std::uint64_t key, HashSeed seed) {
    return mix64(key + seed.value);
}

/// Derive an independent stream for a given role.
inline HashSeed derive_seed(HashSeed seed, std::uint64_t role) {
    return HashSeed{seed.value ^ role};
}

/// Counter-based uniform in [0,1) with 53-bit resolution.
inline double uniform01(std::uint64_t counter, HashSeed seed) {
    return static_cast<double>(hash64(counter, seed) >> 11) * 0x1.0p-53;
}

/// Bounded integer from a counter-based draw; bias is O(bound / 2^64).
inline std::uint64_t bounded_rand(std::uint64_t counter, HashSeed seed, std::uint64_t bound) {
    return hash64(counter, seed) % bound;
}

/// 128-bit multiply-high fold of a 64-bit hash onto [0, n).
inline std::uint64_t mulhi(std::uint64_t a, std::uint64_t b) {
    return static_cast<std::uint64_t>((static_cast<unsigned __int128>(a) * b) >> 64);
}

}  // namespace deltamask
