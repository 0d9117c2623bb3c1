#include "deltamask/dataset.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>

#include "deltamask/errors.hpp"

namespace deltamask {

Dataset make_blobs(const BlobSpec& spec, HashSeed seed) {
    if (spec.samples == 0) throw InvalidSpec("samples must be positive");
    if (spec.classes < 2) throw InvalidSpec("classes must be at least 2");
    if (spec.clusters_per_class == 0) throw InvalidSpec("clusters_per_class must be positive");
    if (spec.feature_dim < 2) throw InvalidSpec("feature_dim must be at least 2");

    std::size_t cluster_count = spec.classes * spec.clusters_per_class;
    std::vector<double> cx(cluster_count), cy(cluster_count);
    for (std::size_t k = 0; k < cluster_count; ++k) {
        double angle = 2.0 * std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(cluster_count);
        cx[k] = spec.radius * std::cos(angle);
        cy[k] = spec.radius * std::sin(angle);
    }

    Dataset ds;
    ds.feature_dim = spec.feature_dim;
    ds.features.resize(spec.samples * spec.feature_dim);
    ds.labels.resize(spec.samples);
    std::mt19937_64 rng(derive_seed(seed, kRoleDataset).value);
    std::normal_distribution<double> gauss(0.0, spec.noise);
    std::uniform_int_distribution<std::size_t> pick_cluster(0, spec.clusters_per_class - 1);
    for (std::size_t n = 0; n < spec.samples; ++n) {
        auto label = n % spec.classes;  // balanced classes
        std::size_t k = label + spec.classes * pick_cluster(rng);
        double* row = ds.features.data() + n * spec.feature_dim;
        row[0] = cx[k] + gauss(rng);
        row[1] = cy[k] + gauss(rng);
        for (std::size_t f = 2; f < spec.feature_dim; ++f) row[f] = gauss(rng);
        ds.labels[n] = static_cast<int>(label);
    }
    return ds;
}

Dataset make_rings(const RingSpec& spec, HashSeed seed) {
    if (spec.samples == 0) throw InvalidSpec("samples must be positive");
    Dataset ds;
    ds.feature_dim = 2;
    ds.features.resize(spec.samples * 2);
    ds.labels.resize(spec.samples);
    std::mt19937_64 rng(derive_seed(seed, kRoleDataset).value);
    std::normal_distribution<double> gauss(0.0, spec.noise);
    std::uniform_real_distribution<double> uniform_angle(0.0, 2.0 * std::numbers::pi);
    for (std::size_t n = 0; n < spec.samples; ++n) {
        int label = static_cast<int>(n % 2);
        double r = (label == 0 ? spec.inner_radius : spec.outer_radius) + gauss(rng);
        double angle = uniform_angle(rng);
        ds.features[n * 2] = r * std::cos(angle);
        ds.features[n * 2 + 1] = r * std::sin(angle);
        ds.labels[n] = label;
    }
    return ds;
}

void write_dataset_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path + " for writing");
    out << "label";
    for (std::size_t f = 0; f < data.feature_dim; ++f) out << ",f" << f;
    out << "\n";
    char buf[64];
    for (std::size_t n = 0; n < data.size(); ++n) {
        out << data.labels[n];
        for (std::size_t f = 0; f < data.feature_dim; ++f) {
            std::snprintf(buf, sizeof buf, "%.10g", data.features[n * data.feature_dim + f]);
            out << ',' << buf;
        }
        out << "\n";
    }
    if (!out) throw Error("write to " + path + " failed");
}

}  // namespace deltamask
