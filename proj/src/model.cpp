#include "deltamask/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "deltamask/errors.hpp"

namespace deltamask {

namespace {

std::vector<std::size_t> maskable_offsets(const FrozenModel& model) {
    std::vector<std::size_t> offsets(model.layers.size(), 0);
    std::size_t off = 0;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        offsets[l] = off;
        if (model.layers[l].maskable) off += model.layers[l].w.size();
    }
    return offsets;
}

/// Activations after every layer; a[0] is the input row, a.back() the logits.
void forward(const FrozenModel& model, const BinaryMask& mask,
             const std::vector<std::size_t>& offsets, const double* x,
             std::vector<std::vector<double>>& a) {
    a.resize(model.layers.size() + 1);
    a[0].assign(x, x + model.feature_dim());
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        const DenseLayer& layer = model.layers[l];
        const bool head = l + 1 == model.layers.size();
        a[l + 1].assign(layer.out, 0.0);
        for (std::size_t i = 0; i < layer.out; ++i) {
            double z = layer.b[i];
            const double* wrow = layer.w.data() + i * layer.in;
            if (layer.maskable) {
                std::size_t moff = offsets[l] + i * layer.in;
                for (std::size_t j = 0; j < layer.in; ++j)
                    if (mask.get(moff + j)) z += wrow[j] * a[l][j];
            } else {
                for (std::size_t j = 0; j < layer.in; ++j) z += wrow[j] * a[l][j];
            }
            a[l + 1][i] = head ? z : std::tanh(z);
        }
    }
}

double softmax_ce(const std::vector<double>& logits, int label, std::vector<double>& probs) {
    double mx = *std::max_element(logits.begin(), logits.end());
    probs.resize(logits.size());
    double sum = 0.0;
    for (std::size_t c = 0; c < logits.size(); ++c) {
        probs[c] = std::exp(logits[c] - mx);
        sum += probs[c];
    }
    for (auto& p : probs) p /= sum;
    return -std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300));
}

void check_inputs(const FrozenModel& model, const Dataset& data) {
    if (data.size() == 0) throw EmptyDataset("dataset is empty");
    if (data.feature_dim != model.feature_dim())
        throw ShapeMismatch("dataset feature dim " + std::to_string(data.feature_dim) +
                            " does not match model input " +
                            std::to_string(model.feature_dim()));
}

void check_mask(const FrozenModel& model, const BinaryMask& mask) {
    if (mask.size() != model.mask_dimension())
        throw ShapeMismatch("mask size " + std::to_string(mask.size()) +
                             " does not match maskable dimension " +
                             std::to_string(model.mask_dimension()));
}

/// Shared backward pass. Accumulates whichever gradient buffers are given;
/// all are gradients of the mean cross-entropy over idx.
void backward(const FrozenModel& model, const BinaryMask& mask,
              const std::vector<std::size_t>& offsets, const Dataset& data,
              std::span<const std::size_t> idx, std::vector<double>* g_mask,
              std::vector<double>* g_head_w, std::vector<double>* g_head_b) {
    const double inv = 1.0 / static_cast<double>(idx.size());
    std::vector<std::vector<double>> a;
    std::vector<double> probs;
    std::vector<double> dz, da;
    for (std::size_t n : idx) {
        forward(model, mask, offsets, data.row(n), a);
        softmax_ce(a.back(), data.labels[n], probs);
        dz = probs;
        dz[static_cast<std::size_t>(data.labels[n])] -= 1.0;

        for (std::size_t l = model.layers.size(); l-- > 0;) {
            const DenseLayer& layer = model.layers[l];
            const bool head = l + 1 == model.layers.size();
            if (!head) {
                // dz arriving here is d(loss)/d(a_out); fold in tanh'
                for (std::size_t i = 0; i < layer.out; ++i)
                    dz[i] *= 1.0 - a[l + 1][i] * a[l + 1][i];
            } else if (g_head_w != nullptr) {
                for (std::size_t i = 0; i < layer.out; ++i) {
                    double g = inv * dz[i];
                    for (std::size_t j = 0; j < layer.in; ++j)
                        (*g_head_w)[i * layer.in + j] += g * a[l][j];
                    (*g_head_b)[i] += g;
                }
            }
            if (layer.maskable && g_mask != nullptr) {
                for (std::size_t i = 0; i < layer.out; ++i) {
                    double gi = inv * dz[i];
                    const double* wrow = layer.w.data() + i * layer.in;
                    std::size_t moff = offsets[l] + i * layer.in;
                    for (std::size_t j = 0; j < layer.in; ++j)
                        (*g_mask)[moff + j] += gi * wrow[j] * a[l][j];
                }
            }
            if (l == 0) break;
            da.assign(layer.in, 0.0);
            for (std::size_t i = 0; i < layer.out; ++i) {
                const double* wrow = layer.w.data() + i * layer.in;
                if (layer.maskable) {
                    std::size_t moff = offsets[l] + i * layer.in;
                    for (std::size_t j = 0; j < layer.in; ++j)
                        if (mask.get(moff + j)) da[j] += dz[i] * wrow[j];
                } else {
                    for (std::size_t j = 0; j < layer.in; ++j) da[j] += dz[i] * wrow[j];
                }
            }
            dz = da;
        }
    }
}

std::vector<std::size_t> epoch_order(std::size_t n, HashSeed seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    HashSeed s{hash64(epoch, derive_seed(seed, kRoleBatchOrder))};
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = bounded_rand(i, s, i);
        std::swap(order[i - 1], order[j]);
    }
    return order;
}

}  // namespace

std::size_t FrozenModel::mask_dimension() const {
    std::size_t d = 0;
    for (const auto& l : layers)
        if (l.maskable) d += l.w.size();
    return d;
}

FrozenModel init_model(const ModelSpec& spec, HashSeed seed) {
    if (spec.feature_dim == 0) throw InvalidSpec("feature_dim must be positive");
    if (spec.classes < 2) throw InvalidSpec("classes must be at least 2");
    for (auto h : spec.hidden)
        if (h == 0) throw InvalidSpec("hidden layer width must be positive");

    FrozenModel model;
    std::size_t in = spec.feature_dim;
    for (auto h : spec.hidden) {
        DenseLayer l;
        l.in = in;
        l.out = h;
        l.maskable = true;
        model.layers.push_back(std::move(l));
        in = h;
    }
    DenseLayer head;
    head.in = in;
    head.out = spec.classes;
    head.maskable = false;
    model.layers.push_back(std::move(head));

    for (std::size_t li = 0; li < model.layers.size(); ++li) {
        DenseLayer& l = model.layers[li];
        l.w.resize(l.in * l.out);
        l.b.assign(l.out, 0.0);
        std::mt19937_64 rng(hash64(li, derive_seed(seed, kRoleModelInit)));
        double bound = std::sqrt(6.0 / static_cast<double>(l.in));
        std::uniform_real_distribution<double> dist(-bound, bound);
        for (auto& w : l.w) w = dist(rng);
        if (l.maskable) {
            // random frozen biases keep hidden layers from being odd
            // functions of the input, which would make centrally symmetric
            // class layouts unlearnable by any linear readout
            std::uniform_real_distribution<double> bdist(-1.0 / std::sqrt(double(l.in)),
                                                         1.0 / std::sqrt(double(l.in)));
            for (auto& b : l.b) b = bdist(rng);
        }
    }
    return model;
}

double masked_loss(const FrozenModel& model, const BinaryMask& mask, const Dataset& data,
                   std::span<const std::size_t> idx) {
    check_inputs(model, data);
    check_mask(model, mask);
    if (idx.empty()) throw EmptyDataset("no samples selected");
    auto offsets = maskable_offsets(model);
    std::vector<std::vector<double>> a;
    std::vector<double> probs;
    double total = 0.0;
    for (std::size_t n : idx) {
        forward(model, mask, offsets, data.row(n), a);
        total += softmax_ce(a.back(), data.labels[n], probs);
    }
    return total / static_cast<double>(idx.size());
}

std::vector<double> mask_gradient(const FrozenModel& model, const BinaryMask& mask,
                                  const Dataset& data, std::span<const std::size_t> idx) {
    check_inputs(model, data);
    check_mask(model, mask);
    if (idx.empty()) throw EmptyDataset("no samples selected");
    auto offsets = maskable_offsets(model);
    std::vector<double> g(model.mask_dimension(), 0.0);
    backward(model, mask, offsets, data, idx, &g, nullptr, nullptr);
    return g;
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
        v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grad[i] * grad[i];
        params[i] -= lr_ * (m_[i] / bc1) / (std::sqrt(v_[i] / bc2) + eps_);
    }
}

void linear_probe(FrozenModel& model, const Dataset& data, std::size_t epochs, double lr,
                  std::size_t batch_size, HashSeed seed) {
    if (epochs == 0) return;
    check_inputs(model, data);
    if (batch_size == 0) throw InvalidSpec("batch size must be positive");
    auto offsets = maskable_offsets(model);
    BinaryMask ones = BinaryMask::all_ones(model.mask_dimension());
    DenseLayer& head = model.layers.back();
    Adam adam_w(head.w.size(), lr);
    Adam adam_b(head.b.size(), lr);
    HashSeed probe_seed = derive_seed(seed, kRoleProbe);
    std::vector<double> gw(head.w.size()), gb(head.b.size());
    for (std::size_t e = 0; e < epochs; ++e) {
        auto order = epoch_order(data.size(), probe_seed, e);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t len = std::min(batch_size, order.size() - start);
            std::span<const std::size_t> batch(order.data() + start, len);
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            backward(model, ones, offsets, data, batch, nullptr, &gw, &gb);
            adam_w.step(head.w, gw);
            adam_b.step(head.b, gb);
        }
    }
}

ProbabilityMask client_update(const FrozenModel& model, const ProbabilityMask& theta,
                              const Dataset& data, std::size_t epochs, double lr,
                              std::size_t batch_size, HashSeed seed) {
    check_inputs(model, data);
    if (batch_size == 0) throw InvalidSpec("batch size must be positive");
    if (theta.size() != model.mask_dimension())
        throw ShapeMismatch("score vector does not match maskable dimension");

    std::vector<double> scores = theta.scores();
    auto offsets = maskable_offsets(model);
    Adam adam(scores.size(), lr);
    std::vector<double> g_s(scores.size());
    HashSeed mask_seed = derive_seed(seed, kRoleBatchMask);
    std::uint64_t batch_counter = 0;
    for (std::size_t e = 0; e < epochs; ++e) {
        auto order = epoch_order(data.size(), seed, e);
        for (std::size_t start = 0; start < order.size(); start += batch_size) {
            std::size_t len = std::min(batch_size, order.size() - start);
            std::span<const std::size_t> batch(order.data() + start, len);

            std::vector<double> probs(scores.size());
            for (std::size_t i = 0; i < scores.size(); ++i) probs[i] = sigmoid(scores[i]);
            BinaryMask m = sample_mask(probs, HashSeed{hash64(batch_counter++, mask_seed)});

            std::vector<double> g_m(scores.size(), 0.0);
            backward(model, m, offsets, data, batch, &g_m, nullptr, nullptr);
            // straight-through: pass the mask gradient to the scores through
            // d(theta)/d(score) = theta * (1 - theta)
            for (std::size_t i = 0; i < scores.size(); ++i)
                g_s[i] = g_m[i] * probs[i] * (1.0 - probs[i]);
            adam.step(scores, g_s);
            for (auto& s : scores) s = clamp_score(s);
        }
    }
    return ProbabilityMask(std::move(scores));
}

double evaluate(const FrozenModel& model, const BinaryMask& mask, const Dataset& test) {
    check_inputs(model, test);
    check_mask(model, mask);
    auto offsets = maskable_offsets(model);
    std::vector<std::vector<double>> a;
    std::size_t correct = 0;
    for (std::size_t n = 0; n < test.size(); ++n) {
        forward(model, mask, offsets, test.row(n), a);
        const auto& logits = a.back();
        std::size_t best = 0;
        for (std::size_t c = 1; c < logits.size(); ++c)
            if (logits[c] > logits[best]) best = c;
        if (static_cast<int>(best) == test.labels[n]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(test.size());
}

}  // namespace deltamask
