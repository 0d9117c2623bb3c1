#include "deltamask/metrics.hpp"

#include <cstdio>

namespace deltamask {

namespace {

void append_double(std::string& out, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    out += buf;
}

}  // namespace

std::string metrics_csv(const std::vector<RoundMetrics>& rounds) {
    std::string out = "t,accuracy,mean_bpp,cum_bytes,mean_delta,mean_delta_prime,spurious_flips\n";
    for (const auto& r : rounds) {
        out += std::to_string(r.round);
        out += ',';
        append_double(out, r.accuracy);
        out += ',';
        append_double(out, r.mean_bpp);
        out += ',';
        out += std::to_string(r.cum_bytes);
        out += ',';
        append_double(out, r.mean_delta);
        out += ',';
        append_double(out, r.mean_delta_prime);
        out += ',';
        out += std::to_string(r.spurious_flips);
        out += '\n';
    }
    return out;
}

}  // namespace deltamask
