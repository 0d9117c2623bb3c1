#pragma once

#include <bit>
#include <cstdint>
#include <vector>

#include "deltamask/errors.hpp"
#include "deltamask/hash.hpp"

namespace deltamask {

/// Dense bit vector over model coordinates, packed 64 per word.
class BinaryMask {
  public:
    BinaryMask() = default;
    explicit BinaryMask(std::size_t size)
        : size_(size), words_((size + 63) / 64, 0) {}

    static BinaryMask all_ones(std::size_t size) {
        BinaryMask m(size);
        for (auto& w : m.words_) w = ~0ull;
        if (size % 64 != 0 && !m.words_.empty())
            m.words_.back() &= (1ull << (size % 64)) - 1;
        return m;
    }

    std::size_t size() const { return size_; }

    bool get(std::size_t i) const {
        check_index(i);
        return (words_[i >> 6] >> (i & 63)) & 1u;
    }

    void set(std::size_t i, bool v) {
        check_index(i);
        std::uint64_t bit = 1ull << (i & 63);
        if (v)
            words_[i >> 6] |= bit;
        else
            words_[i >> 6] &= ~bit;
    }

    void flip(std::size_t i) {
        check_index(i);
        words_[i >> 6] ^= 1ull << (i & 63);
    }

    std::size_t popcount() const {
        std::size_t n = 0;
        for (auto w : words_) n += static_cast<std::size_t>(std::popcount(w));
        return n;
    }

    const std::vector<std::uint64_t>& words() const { return words_; }

    friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
        return a.size_ == b.size_ && a.words_ == b.words_;
    }

  private:
    void check_index(std::size_t i) const {
        if (i >= size_) throw IndexOutOfRange("mask index " + std::to_string(i) + " out of range");
    }

    std::size_t size_ = 0;
    std::vector<std::uint64_t> words_;
};

// Probabilities are kept strictly inside (0,1): conversions clamp to
// [kProbFloor, 1 - kProbFloor] and scores to [-kScoreClamp, kScoreClamp].
inline constexpr double kProbFloor = 1e-6;
inline constexpr double kScoreClamp = 30.0;

double sigmoid(double s);
double logit(double p);
double clamp_probability(double p);
double clamp_score(double s);

/// Per-coordinate Bernoulli success probabilities represented through
/// unconstrained scores, theta_i = sigmoid(s_i).
class ProbabilityMask {
  public:
    ProbabilityMask() = default;
    explicit ProbabilityMask(std::vector<double> scores);

    /// Build from probabilities; values are clamped into (0,1) first so the
    /// resulting scores stay finite.
    static ProbabilityMask from_probabilities(const std::vector<double>& probs);

    std::size_t size() const { return scores_.size(); }
    const std::vector<double>& scores() const { return scores_; }
    std::vector<double>& scores() { return scores_; }

    double probability(std::size_t i) const { return sigmoid(scores_[i]); }
    std::vector<double> probabilities() const;

  private:
    std::vector<double> scores_;
};

/// Deterministic Bernoulli sampling: coordinate i uses a counter-based
/// uniform keyed by (seed, i), so any party with the same inputs draws the
/// bit-identical mask. Exact 0 and 1 probabilities are honored exactly.
BinaryMask sample_mask(const std::vector<double>& probs, HashSeed seed);
BinaryMask sample_mask(const ProbabilityMask& theta, HashSeed seed);

}  // namespace deltamask
