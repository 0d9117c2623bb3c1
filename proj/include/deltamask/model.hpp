#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "deltamask/hash.hpp"
#include "deltamask/mask.hpp"

namespace deltamask {

/// Row-major sample matrix with integer class labels.
struct Dataset {
    std::size_t feature_dim = 0;
    std::vector<double> features;  // size() * feature_dim
    std::vector<int> labels;

    std::size_t size() const { return labels.size(); }
    const double* row(std::size_t i) const { return features.data() + i * feature_dim; }
};

struct ModelSpec {
    std::size_t feature_dim = 2;
    std::size_t classes = 2;
    std::vector<std::size_t> hidden = {64, 64};  // tanh layers, all maskable
};

struct DenseLayer {
    std::size_t in = 0;
    std::size_t out = 0;
    bool maskable = false;
    std::vector<double> w;  // row-major [out][in]
    std::vector<double> b;
};

/// Backbone with frozen weights; only binary masks over the maskable
/// layers (and the probe-trained head) ever change.
struct FrozenModel {
    std::vector<DenseLayer> layers;  // hidden layers then the linear head

    std::size_t feature_dim() const { return layers.front().in; }
    std::size_t classes() const { return layers.back().out; }
    /// Total maskable coordinate count (weights of maskable layers).
    std::size_t mask_dimension() const;
};

/// Fan-in scaled uniform initialization: U(-sqrt(6/in), sqrt(6/in)), which
/// has standard deviation sqrt(2/in). Maskable layers also get small random
/// frozen biases, U(-1/sqrt(in), 1/sqrt(in)); without them every tanh layer
/// is an odd function of its input and centrally symmetric class layouts
/// become unlearnable for any readout. The head bias starts at zero.
FrozenModel init_model(const ModelSpec& spec, HashSeed seed);

/// Mean cross-entropy of the masked network over the given sample indices.
double masked_loss(const FrozenModel& model, const BinaryMask& mask, const Dataset& data,
                   std::span<const std::size_t> idx);

/// Gradient of the mean cross-entropy w.r.t. each mask coordinate, treating
/// the mask as a continuous variable at its sampled binary value.
std::vector<double> mask_gradient(const FrozenModel& model, const BinaryMask& mask,
                                  const Dataset& data, std::span<const std::size_t> idx);

/// Train the head on frozen backbone features (identity mask), then freeze
/// it. epochs == 0 leaves the model untouched.
void linear_probe(FrozenModel& model, const Dataset& data, std::size_t epochs, double lr,
                  std::size_t batch_size, HashSeed seed);

/// Local mask training: straight-through gradients through freshly sampled
/// Bernoulli masks, Adam on the scores. Returns the updated probabilities;
/// the model itself never changes.
ProbabilityMask client_update(const FrozenModel& model, const ProbabilityMask& theta,
                              const Dataset& data, std::size_t epochs, double lr,
                              std::size_t batch_size, HashSeed seed);

/// Accuracy of the masked network; argmax ties resolve to the lowest class.
double evaluate(const FrozenModel& model, const BinaryMask& mask, const Dataset& test);

/// Adam with the usual bias correction; step() performs descent.
class Adam {
  public:
    Adam(std::size_t size, double lr) : lr_(lr), m_(size, 0.0), v_(size, 0.0) {}
    void step(std::vector<double>& params, const std::vector<double>& grad);

  private:
    double lr_;
    double beta1_ = 0.9;
    double beta2_ = 0.999;
    double eps_ = 1e-8;
    std::uint64_t t_ = 0;
    std::vector<double> m_;
    std::vector<double> v_;
};

}  // namespace deltamask
