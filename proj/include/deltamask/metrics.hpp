#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace deltamask {

struct RoundMetrics {
    std::uint32_t round = 0;  // 1-based
    double accuracy = 0.0;
    double mean_bpp = 0.0;
    std::uint64_t cum_bytes = 0;
    double mean_delta = 0.0;        // average |delta| over participants
    double mean_delta_prime = 0.0;  // average kept positions after ranking
    std::uint64_t spurious_flips = 0;
    std::uint64_t dense_fallbacks = 0;  // construction failures this round
};

/// One row per round:
/// t,accuracy,mean_bpp,cum_bytes,mean_delta,mean_delta_prime,spurious_flips
std::string metrics_csv(const std::vector<RoundMetrics>& rounds);

}  // namespace deltamask
