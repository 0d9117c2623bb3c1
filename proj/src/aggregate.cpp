#include "deltamask/aggregate.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "deltamask/errors.hpp"

namespace deltamask {

namespace {

void write_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void write_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void write_f64(std::vector<std::uint8_t>& out, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    write_u64(out, bits);
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

double read_f64(std::span<const std::uint8_t> b, std::size_t off) {
    std::uint64_t bits = read_u64(b, off);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

constexpr char kStateMagic[4] = {'D', 'M', 'G', '1'};
constexpr std::uint8_t kStateFormatVersion = 1;

void check_participation(double rho) {
    if (!(rho > 0.0 && rho <= 1.0)) throw InvalidSpec("participation must lie in (0, 1]");
}

double fast_uniform(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace

GlobalState init_global_state(std::uint64_t dimension, double participation, double lambda0) {
    check_participation(participation);
    if (dimension == 0) throw InvalidSpec("dimension must be positive");
    if (!(lambda0 > 0.0)) throw InvalidSpec("lambda0 must be positive");
    GlobalState s;
    s.dimension = dimension;
    s.participation = participation;
    s.prior.lambda0 = lambda0;
    s.prior.alpha.assign(dimension, lambda0);
    s.prior.beta.assign(dimension, lambda0);
    s.theta.assign(dimension, 0.5);
    return s;
}

void maybe_reset(BetaPrior& prior, std::uint32_t t, double participation) {
    check_participation(participation);
    auto period = static_cast<std::uint32_t>(std::nearbyint(1.0 / participation));
    if (period == 0) period = 1;
    if (t % period == 0) {
        std::fill(prior.alpha.begin(), prior.alpha.end(), prior.lambda0);
        std::fill(prior.beta.begin(), prior.beta.end(), prior.lambda0);
    }
}

void bayes_agg(const std::vector<BinaryMask>& masks, GlobalState& state) {
    if (masks.empty()) throw EmptyClientSet("no masks to aggregate");
    for (const auto& m : masks)
        if (m.size() != state.dimension)
            throw LengthMismatch("mask size " + std::to_string(m.size()) +
                                 " does not match state dimension " +
                                 std::to_string(state.dimension));

    state.round += 1;
    maybe_reset(state.prior, state.round, state.participation);
    for (const auto& m : masks) {
        for (std::size_t i = 0; i < state.dimension; ++i) {
            if (m.get(i))
                state.prior.alpha[i] += 1.0;
            else
                state.prior.beta[i] += 1.0;
        }
    }
    for (std::size_t i = 0; i < state.dimension; ++i) {
        double denom = state.prior.alpha[i] + state.prior.beta[i] - 2.0;
        state.theta[i] = denom > 0.0 ? (state.prior.alpha[i] - 1.0) / denom : 0.5;
    }
}

std::vector<double> estimate_mean(const std::vector<BinaryMask>& masks) {
    if (masks.empty()) throw EmptyClientSet("no masks to average");
    std::size_t d = masks.front().size();
    for (const auto& m : masks)
        if (m.size() != d) throw LengthMismatch("mask sizes differ");
    std::vector<double> mean(d, 0.0);
    for (const auto& m : masks)
        for (std::size_t i = 0; i < d; ++i) mean[i] += m.get(i) ? 1.0 : 0.0;
    double k = static_cast<double>(masks.size());
    for (auto& v : mean) v /= k;
    return mean;
}

BoundCheck verify_error_bound(const std::vector<std::vector<double>>& thetas,
                              std::size_t trials, std::uint64_t rng_seed, double flip_prob) {
    if (thetas.empty()) throw EmptyClientSet("no client probabilities given");
    if (trials == 0) throw InvalidSpec("trials must be positive");
    const std::size_t clients = thetas.size();
    const std::size_t d = thetas.front().size();
    for (const auto& t : thetas)
        if (t.size() != d) throw LengthMismatch("probability vector sizes differ");

    std::vector<double> mean_theta(d, 0.0);
    for (const auto& t : thetas)
        for (std::size_t i = 0; i < d; ++i) mean_theta[i] += t[i];
    for (auto& v : mean_theta) v /= static_cast<double>(clients);

    std::mt19937_64 rng(rng_seed);
    std::vector<double> est(d);
    double total = 0.0;
    for (std::size_t trial = 0; trial < trials; ++trial) {
        std::fill(est.begin(), est.end(), 0.0);
        for (std::size_t k = 0; k < clients; ++k) {
            const auto& theta = thetas[k];
            for (std::size_t i = 0; i < d; ++i) {
                bool bit = fast_uniform(rng) < theta[i];
                if (flip_prob > 0.0 && fast_uniform(rng) < flip_prob) bit = !bit;
                if (bit) est[i] += 1.0;
            }
        }
        double err = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            double diff = mean_theta[i] - est[i] / static_cast<double>(clients);
            err += diff * diff;
        }
        total += err;
    }

    BoundCheck out;
    out.empirical = total / static_cast<double>(trials);
    out.bound = static_cast<double>(d) / (4.0 * static_cast<double>(clients));
    out.tolerance = out.bound * (1.0 + 3.0 / std::sqrt(static_cast<double>(trials)));
    out.pass = out.empirical <= out.tolerance;
    return out;
}

std::vector<std::uint8_t> serialize_state(const GlobalState& state) {
    std::vector<std::uint8_t> out;
    out.reserve(4 + 1 + 8 + 4 + 16 + state.dimension * 24);
    out.insert(out.end(), kStateMagic, kStateMagic + 4);
    out.push_back(kStateFormatVersion);
    write_u64(out, state.dimension);
    write_u32(out, state.round);
    write_f64(out, state.participation);
    write_f64(out, state.prior.lambda0);
    for (double v : state.prior.alpha) write_f64(out, v);
    for (double v : state.prior.beta) write_f64(out, v);
    for (double v : state.theta) write_f64(out, v);
    return out;
}

GlobalState deserialize_state(std::span<const std::uint8_t> bytes) {
    constexpr std::size_t kFixed = 4 + 1 + 8 + 4 + 8 + 8;
    if (bytes.size() < 4) throw TruncatedPayload("state blob shorter than magic");
    if (std::memcmp(bytes.data(), kStateMagic, 4) != 0)
        throw MalformedHeader("bad state magic");
    if (bytes.size() < kFixed) throw TruncatedPayload("state header truncated");
    if (bytes[4] != kStateFormatVersion)
        throw VersionMismatch("unsupported state format version " + std::to_string(bytes[4]));

    GlobalState s;
    s.dimension = read_u64(bytes, 5);
    s.round = read_u32(bytes, 13);
    s.participation = read_f64(bytes, 17);
    s.prior.lambda0 = read_f64(bytes, 25);
    if (bytes.size() != kFixed + s.dimension * 24)
        throw TruncatedPayload("state payload size mismatch");
    s.prior.alpha.resize(s.dimension);
    s.prior.beta.resize(s.dimension);
    s.theta.resize(s.dimension);
    std::size_t off = kFixed;
    for (auto& v : s.prior.alpha) {
        v = read_f64(bytes, off);
        off += 8;
    }
    for (auto& v : s.prior.beta) {
        v = read_f64(bytes, off);
        off += 8;
    }
    for (auto& v : s.theta) {
        v = read_f64(bytes, off);
        off += 8;
    }
    return s;
}

}  // namespace deltamask
