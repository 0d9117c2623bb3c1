#include "deltamask/mask.hpp"

#include <algorithm>
#include <cmath>

namespace deltamask {

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

double logit(double p) { return std::log(p / (1.0 - p)); }

double clamp_probability(double p) {
    return std::clamp(p, kProbFloor, 1.0 - kProbFloor);
}

double clamp_score(double s) {
    return std::clamp(s, -kScoreClamp, kScoreClamp);
}

ProbabilityMask::ProbabilityMask(std::vector<double> scores) : scores_(std::move(scores)) {
    for (auto& s : scores_) s = clamp_score(s);
}

ProbabilityMask ProbabilityMask::from_probabilities(const std::vector<double>& probs) {
    std::vector<double> scores(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) scores[i] = logit(clamp_probability(probs[i]));
    return ProbabilityMask(std::move(scores));
}

std::vector<double> ProbabilityMask::probabilities() const {
    std::vector<double> p(scores_.size());
    for (std::size_t i = 0; i < scores_.size(); ++i) p[i] = sigmoid(scores_[i]);
    return p;
}

BinaryMask sample_mask(const std::vector<double>& probs, HashSeed seed) {
    BinaryMask m(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (uniform01(i, seed) < probs[i]) m.set(i, true);
    }
    return m;
}

BinaryMask sample_mask(const ProbabilityMask& theta, HashSeed seed) {
    return sample_mask(theta.probabilities(), seed);
}

}  // namespace deltamask
