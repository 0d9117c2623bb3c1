#include <doctest.h>

#include <bit>
#include <cmath>
#include <cstdint>
#include <unordered_set>

#include "deltamask/hash.hpp"

using namespace deltamask;

TEST_CASE("hash64 is deterministic and seed-sensitive") {
    HashSeed a{12345}, b{12346};
    CHECK(hash64(42, a) == hash64(42, a));
    CHECK(hash64(42, a) != hash64(42, b));
    CHECK(hash64(42, a) != hash64(43, a));
}

TEST_CASE("hash64 has no collisions over 1e5 distinct keys at a fixed seed") {
    // mix64 is a bijection, so for one seed distinct keys can never collide
    HashSeed seed{0x5eedbeef};
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(200000);
    for (std::uint64_t k = 0; k < 100000; ++k) seen.insert(hash64(k, seed));
    CHECK(seen.size() == 100000);
}

TEST_CASE("single-bit input changes flip about half the output bits") {
    HashSeed seed{991};
    double total = 0.0;
    const int pairs = 10000;
    for (int i = 0; i < pairs; ++i) {
        std::uint64_t key = hash64(static_cast<std::uint64_t>(i), HashSeed{7});
        int bit = i % 64;
        std::uint64_t h1 = hash64(key, seed);
        std::uint64_t h2 = hash64(key ^ (1ull << bit), seed);
        total += std::popcount(h1 ^ h2);
    }
    double mean_flips = total / pairs;
    CHECK(mean_flips > 28.0);
    CHECK(mean_flips < 36.0);
}

TEST_CASE("uniform01 stays in [0,1) with the right mean") {
    HashSeed seed{31337};
    const int n = 100000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        double u = uniform01(static_cast<std::uint64_t>(i), seed);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
        sum += u;
    }
    // mean of n uniforms has sd 1/sqrt(12 n); allow 4 sigma
    double sd = 1.0 / std::sqrt(12.0 * n);
    CHECK(std::abs(sum / n - 0.5) < 4.0 * sd);
}

TEST_CASE("bounded_rand respects the bound") {
    HashSeed seed{5};
    for (std::uint64_t i = 0; i < 1000; ++i) {
        CHECK(bounded_rand(i, seed, 7) < 7);
        CHECK(bounded_rand(i, seed, 1) == 0);
    }
}

TEST_CASE("derive_seed gives distinct streams per role") {
    HashSeed base{77};
    HashSeed f = derive_seed(base, kRoleFingerprint);
    HashSeed l = derive_seed(base, kRoleLocation);
    CHECK(!(f == l));
    CHECK(hash64(0, f) != hash64(0, l));
}

TEST_CASE("mulhi folds onto [0, n)") {
    const std::uint64_t n = 1000;
    for (std::uint64_t i = 0; i < 5000; ++i) {
        std::uint64_t h = hash64(i, HashSeed{3});
        CHECK(mulhi(h, n) < n);
    }
    CHECK(mulhi(~0ull, 1000) == 999);
    CHECK(mulhi(0, 1000) == 0);
}
