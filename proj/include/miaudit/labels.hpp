#pragma once

#include <vector>

#include "miaudit/errors.hpp"

namespace miaudit {

// Probability vector over n classes. Class indices are 1-based at this
// interface; the position inside probs() is index-1.
class LabelDistribution {
public:
    LabelDistribution() = default;
    explicit LabelDistribution(std::vector<double> probs);

    const std::vector<double>& probs() const { return probs_; }
    int num_classes() const { return static_cast<int>(probs_.size()); }
    int argmax_class() const;  // 1-based, first occurrence on ties

private:
    std::vector<double> probs_;
};

// One-hot encoding of class k of n.
LabelDistribution one_hot(int k, int n);

// Smoothed label: confidence lambda on class k, (1-lambda)/(n-1) elsewhere.
// Requires 1/n < lambda <= 1. The k-th entry is built as the residual
// 1 - sum(others) so that the vector sums to 1 exactly.
LabelDistribution smooth_label(int k, int n, double lambda);

}  // namespace miaudit
