#include "miaudit/labels.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace miaudit {

LabelDistribution::LabelDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
    if (probs_.empty()) throw ConfigError("label distribution must be non-empty");
    double s = 0.0;
    for (double p : probs_) {
        if (!(p >= 0.0)) throw ConfigError("label distribution entries must be >= 0");
        s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9) {
        throw ConfigError("label distribution must sum to 1, got " + std::to_string(s));
    }
}

int LabelDistribution::argmax_class() const {
    auto it = std::max_element(probs_.begin(), probs_.end());
    return static_cast<int>(it - probs_.begin()) + 1;
}

LabelDistribution one_hot(int k, int n) {
    if (n < 1) throw ConfigError("one_hot: class count must be >= 1");
    if (k < 1 || k > n) {
        throw ConfigError("one_hot: class index " + std::to_string(k) + " out of range [1," +
                          std::to_string(n) + "]");
    }
    std::vector<double> p(static_cast<std::size_t>(n), 0.0);
    p[static_cast<std::size_t>(k - 1)] = 1.0;
    return LabelDistribution(std::move(p));
}

LabelDistribution smooth_label(int k, int n, double lambda) {
    if (n < 2) throw ConfigError("smooth_label: class count must be >= 2");
    if (k < 1 || k > n) {
        throw ConfigError("smooth_label: class index " + std::to_string(k) + " out of range [1," +
                          std::to_string(n) + "]");
    }
    if (!(lambda > 1.0 / n && lambda <= 1.0)) {
        throw ConfigError("smooth_label: lambda must lie in (1/n, 1], got " +
                          std::to_string(lambda));
    }
    const double off = (1.0 - lambda) / (n - 1);
    std::vector<double> p(static_cast<std::size_t>(n), off);
    double rest = 0.0;
    for (int i = 0; i < n; ++i) {
        if (i != k - 1) rest += p[static_cast<std::size_t>(i)];
    }
    p[static_cast<std::size_t>(k - 1)] = 1.0 - rest;  // sums to 1 exactly
    return LabelDistribution(std::move(p));
}

}  // namespace miaudit
