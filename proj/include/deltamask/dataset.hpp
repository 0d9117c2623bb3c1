#pragma once

#include <string>

#include "deltamask/hash.hpp"
#include "deltamask/model.hpp"

namespace deltamask {

/// Gaussian blob mixture. Cluster centers sit evenly on a circle of the
/// given radius (in the first two feature dimensions) and are assigned to
/// classes round-robin, so clusters_per_class > 1 interleaves the classes
/// and makes the task non linearly separable.
struct BlobSpec {
    std::size_t samples = 1000;
    std::size_t classes = 2;
    std::size_t clusters_per_class = 1;
    std::size_t feature_dim = 2;
    double radius = 2.0;
    double noise = 0.5;
};

Dataset make_blobs(const BlobSpec& spec, HashSeed seed);

/// Two concentric noisy rings, one class each.
struct RingSpec {
    std::size_t samples = 1000;
    double inner_radius = 1.0;
    double outer_radius = 2.0;
    double noise = 0.1;
};

Dataset make_rings(const RingSpec& spec, HashSeed seed);

/// label,f0,f1,... with one row per sample.
void write_dataset_csv(const std::string& path, const Dataset& data);

}  // namespace deltamask
