#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "miaudit/errors.hpp"

namespace miaudit {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> values;
    std::vector<double> grad;  // allocated lazily by backward
    bool requires_grad = false;
    bool backward_done = false;
    std::vector<std::shared_ptr<TensorNode>> parents;
    // Distributes this node's grad into its parents' grads.
    std::function<void(TensorNode&)> backprop;
};

}  // namespace detail

// Dense double-precision tensor with reverse-mode autodiff. A Tensor is a
// cheap handle onto a shared node; ops record the compute graph whenever
// gradients are enabled and some input requires them.
class Tensor {
public:
    Tensor() = default;

    static Tensor from_values(Shape shape, std::vector<double> values, bool requires_grad = false);
    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);

    bool defined() const { return node_ != nullptr; }
    const Shape& shape() const;
    std::size_t size() const;
    const std::vector<double>& values() const;
    double at(std::size_t i) const { return values()[i]; }
    double item() const;  // scalar tensors only

    bool requires_grad() const;
    void set_requires_grad(bool flag);
    bool has_grad() const;
    const std::vector<double>& grad() const;  // throws if backward has not populated it
    void zero_grad();

    // Deep copy of the values with no graph attached.
    Tensor detached() const;

    // Index of the largest entry (first occurrence on ties).
    std::size_t argmax() const;

    detail::TensorNode* node() const { return node_.get(); }
    const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
    std::shared_ptr<detail::TensorNode> node_;

    friend Tensor make_op_result(Shape shape, std::vector<double> values, const char* op_name,
                                 std::vector<Tensor> inputs,
                                 std::function<void(detail::TensorNode&)> backprop);
};

// RAII guard that disables graph recording on the current thread. Forward
// passes made under the guard produce plain value tensors.
class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

// Elementwise and linear-algebra ops. All of them validate shapes and reject
// non-finite outputs.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k)x(k,n)->(m,n) or (m,k)x(k)->(m)
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sum(const Tensor& a);      // scalar
Tensor l2_norm(const Tensor& a);  // scalar; subgradient 0 at the origin
Tensor clamp(const Tensor& a, double lo, double hi);
Tensor reshape(const Tensor& a, Shape shape);

// input (C,H,W), kernel (F,C,KH,KW), bias (F). Valid padding by default,
// stride 1; same padding keeps H,W (odd kernels).
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, bool same_padding = false);
Tensor max_pool2d(const Tensor& input, std::size_t window = 2);

// Numerically stable softmax(x / temperature) as one fused op.
Tensor softmax_temp(const Tensor& logits, double temperature);

// Populates grads of every requires-grad leaf reachable from root.
// root must be scalar; a graph can only be consumed once.
void backward(const Tensor& root);

// Central-difference gradient (f(x+h e_i) - f(x-h e_i)) / 2h. Test oracle,
// independent of the autodiff path.
Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h);

}  // namespace miaudit
