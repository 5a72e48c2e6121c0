#pragma once

#include <string>
#include <vector>

#include "miaudit/labels.hpp"
#include "miaudit/rng.hpp"
#include "miaudit/tensor.hpp"

namespace miaudit {

// Floor applied inside every log() of a probability.
inline constexpr double kLogEps = 1e-12;

struct Layer {
    enum class Kind { Dense, Conv, MaxPool, Relu, Flatten };
    Kind kind = Kind::Dense;
    // dense: W (out,in), b (out); conv: W (out_ch,in_ch,k,k), b (out_ch)
    Tensor W, b;
    std::size_t in = 0, out = 0;      // dense dims
    std::size_t in_ch = 0, out_ch = 0, ksize = 0;  // conv dims
    bool same_pad = false;
    std::size_t window = 0;  // pool
};

// Feed-forward classifier: a layer list over the tensor ops. Parameters are
// mutated only by the trainer; a model with trainable() == false is immutable
// and safe for concurrent prediction/attack use.
class Classifier {
public:
    Classifier() = default;

    static Classifier mlp(Shape input_shape, const std::vector<int>& hidden, int n_classes,
                          Rng& rng);
    // conv(16,3x3)-relu-pool / conv(32,3x3)-relu-pool / dense(128)-relu / dense(n)
    static Classifier cnn5(Shape input_shape, int n_classes, Rng& rng);
    // custom architecture with explicit parameters
    static Classifier from_layers(Shape input_shape, int n_classes, std::vector<Layer> layers);

    // Differentiable w.r.t. x and (when trainable) parameters.
    Tensor logits(const Tensor& x) const;

    // softmax(Z(x)/T); plain values, no graph. T = 1 is the model output.
    LabelDistribution predict_probs(const Tensor& x, double temperature) const;
    int predicted_class(const Tensor& x) const;  // 1-based argmax at T = 1

    int num_classes() const { return n_classes_; }
    const Shape& input_shape() const { return input_shape_; }
    const std::vector<Layer>& layers() const { return layers_; }

    std::vector<Tensor> parameters() const;
    void set_trainable(bool flag);
    bool trainable() const { return trainable_; }

    // Deep copy (fresh parameter storage).
    Classifier clone() const;

    // Versioned JSON checkpoint: architecture descriptor + flat parameters.
    std::string to_json() const;
    static Classifier from_json(const std::string& text);
    void save(const std::string& path) const;
    static Classifier load(const std::string& path);

private:
    Shape input_shape_;
    int n_classes_ = 0;
    std::vector<Layer> layers_;
    bool trainable_ = false;
};

// Stable softmax(z / T) on plain values; the same arithmetic the graph op uses.
std::vector<double> softmax_with_temperature(const std::vector<double>& logits, double temperature);

// -sum_i target[i] * log(pred[i]), with pred clamped into [kLogEps, 1].
double cross_entropy(const LabelDistribution& pred, const LabelDistribution& target);

// Graph version used by attack objectives and training losses; differentiable
// through pred_probs.
Tensor cross_entropy_graph(const Tensor& pred_probs, const LabelDistribution& target);

}  // namespace miaudit
