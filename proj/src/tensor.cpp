#include "miaudit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace miaudit {

namespace {

thread_local int g_no_grad_depth = 0;

void check_finite(const std::vector<double>& values, const char* op_name) {
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string("non-finite value produced by op '") + op_name + "'");
        }
    }
}

std::vector<double>& ensure_grad(detail::TensorNode& node) {
    if (node.grad.empty()) {
        node.grad.assign(node.values.size(), 0.0);
    }
    return node.grad;
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape()) {
        throw ConfigError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                          shape_str(b.shape()));
    }
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t d : shape) n *= d;
    return n;
}

std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << "(";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ",";
        os << shape[i];
    }
    os << ")";
    return os.str();
}

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }
bool grad_enabled() { return g_no_grad_depth == 0; }

Tensor Tensor::from_values(Shape shape, std::vector<double> values, bool requires_grad) {
    if (shape.empty()) {
        throw ConfigError("tensor shape must have at least one dimension");
    }
    for (std::size_t d : shape) {
        if (d == 0) throw ConfigError("tensor dimensions must be positive");
    }
    if (values.size() != shape_size(shape)) {
        throw ConfigError("tensor value count " + std::to_string(values.size()) +
                          " does not match shape " + shape_str(shape));
    }
    check_finite(values, "from_values");
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    std::vector<double> v(shape_size(shape), 0.0);
    return from_values(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
    std::vector<double> v(shape_size(shape), value);
    return from_values(std::move(shape), std::move(v), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return from_values({1}, {value}, requires_grad);
}

const Shape& Tensor::shape() const {
    if (!node_) throw ConfigError("use of undefined tensor");
    return node_->shape;
}

std::size_t Tensor::size() const { return values().size(); }

const std::vector<double>& Tensor::values() const {
    if (!node_) throw ConfigError("use of undefined tensor");
    return node_->values;
}

double Tensor::item() const {
    const auto& v = values();
    if (v.size() != 1) {
        throw ConfigError("item() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return v[0];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

void Tensor::set_requires_grad(bool flag) {
    if (!node_) throw ConfigError("use of undefined tensor");
    if (node_->backprop && !flag) {
        throw ConfigError("cannot clear requires_grad on a non-leaf tensor");
    }
    node_->requires_grad = flag;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
    if (!node_) throw ConfigError("use of undefined tensor");
    if (node_->grad.empty()) throw ConfigError("tensor grad not populated; run backward first");
    return node_->grad;
}

void Tensor::zero_grad() {
    if (!node_) throw ConfigError("use of undefined tensor");
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detached() const { return from_values(shape(), values(), false); }

std::size_t Tensor::argmax() const {
    const auto& v = values();
    return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Shared op plumbing: packages op output into a node and wires the graph when
// gradient recording is active and some input requires it.
Tensor make_op_result(Shape shape, std::vector<double> values, const char* op_name,
                      std::vector<Tensor> inputs,
                      std::function<void(detail::TensorNode&)> backprop) {
    check_finite(values, op_name);
    auto node = std::make_shared<detail::TensorNode>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    if (grad_enabled()) {
        bool any = false;
        for (const auto& t : inputs) {
            if (t.requires_grad()) {
                any = true;
                break;
            }
        }
        if (any) {
            node->requires_grad = true;
            node->parents.reserve(inputs.size());
            for (auto& t : inputs) node->parents.push_back(t.node_ptr());
            node->backprop = std::move(backprop);
        }
    }
    return Tensor(std::move(node));
}

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "add");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] + bv[i];
    return make_op_result(a.shape(), std::move(out), "add", {a, b}, [](detail::TensorNode& n) {
        for (int p = 0; p < 2; ++p) {
            auto& parent = *n.parents[p];
            if (!parent.requires_grad) continue;
            auto& g = ensure_grad(parent);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
    });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "sub");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] - bv[i];
    return make_op_result(a.shape(), std::move(out), "sub", {a, b}, [](detail::TensorNode& n) {
        if (n.parents[0]->requires_grad) {
            auto& g = ensure_grad(*n.parents[0]);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& g = ensure_grad(*n.parents[1]);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] -= n.grad[i];
        }
    });
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape(a, b, "mul");
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * bv[i];
    return make_op_result(a.shape(), std::move(out), "mul", {a, b}, [](detail::TensorNode& n) {
        const auto& av = n.parents[0]->values;
        const auto& bv = n.parents[1]->values;
        if (n.parents[0]->requires_grad) {
            auto& g = ensure_grad(*n.parents[0]);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * bv[i];
        }
        if (n.parents[1]->requires_grad) {
            auto& g = ensure_grad(*n.parents[1]);
            for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * av[i];
        }
    });
}

Tensor scalar_mul(const Tensor& a, double c) {
    if (!std::isfinite(c)) throw NumericError("scalar_mul: non-finite scalar");
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] * c;
    return make_op_result(a.shape(), std::move(out), "scalar_mul", {a}, [c](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = ensure_grad(*n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * c;
    });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    if (sa.size() != 2 || (sb.size() != 2 && sb.size() != 1)) {
        throw ConfigError("matmul: expected (m,k)x(k,n) or (m,k)x(k), got " + shape_str(sa) +
                          " x " + shape_str(sb));
    }
    const std::size_t m = sa[0], k = sa[1];
    const std::size_t n = sb.size() == 2 ? sb[1] : 1;
    const std::size_t bk = sb[0];
    if (bk != k) {
        throw ConfigError("matmul: inner dimensions differ, " + shape_str(sa) + " x " +
                          shape_str(sb));
    }
    const bool vec = sb.size() == 1;
    const auto& av = a.values();
    const auto& bv = b.values();
    std::vector<double> out(m * n, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t kk = 0; kk < k; ++kk) {
            const double aik = av[i * k + kk];
            const double* brow = &bv[kk * n];
            double* orow = &out[i * n];
            for (std::size_t j = 0; j < n; ++j) orow[j] += aik * brow[j];
        }
    }
    Shape out_shape = vec ? Shape{m} : Shape{m, n};
    return make_op_result(std::move(out_shape), std::move(out), "matmul", {a, b},
                          [m, k, n](detail::TensorNode& node) {
                              const auto& av = node.parents[0]->values;
                              const auto& bv = node.parents[1]->values;
                              const auto& og = node.grad;
                              if (node.parents[0]->requires_grad) {
                                  auto& ga = ensure_grad(*node.parents[0]);
                                  // dA = G * B^T
                                  for (std::size_t i = 0; i < m; ++i) {
                                      for (std::size_t j = 0; j < n; ++j) {
                                          const double gij = og[i * n + j];
                                          for (std::size_t kk = 0; kk < k; ++kk) {
                                              ga[i * k + kk] += gij * bv[kk * n + j];
                                          }
                                      }
                                  }
                              }
                              if (node.parents[1]->requires_grad) {
                                  auto& gb = ensure_grad(*node.parents[1]);
                                  // dB = A^T * G
                                  for (std::size_t i = 0; i < m; ++i) {
                                      for (std::size_t kk = 0; kk < k; ++kk) {
                                          const double aik = av[i * k + kk];
                                          for (std::size_t j = 0; j < n; ++j) {
                                              gb[kk * n + j] += aik * og[i * n + j];
                                          }
                                      }
                                  }
                              }
                          });
}

Tensor relu(const Tensor& a) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
    // subgradient at 0 is 0
    return make_op_result(a.shape(), std::move(out), "relu", {a}, [](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        const auto& x = n.parents[0]->values;
        auto& g = ensure_grad(*n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] > 0.0) g[i] += n.grad[i];
        }
    });
}

Tensor exp(const Tensor& a) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::exp(av[i]);
    return make_op_result(a.shape(), std::move(out), "exp", {a}, [](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = ensure_grad(*n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] * n.values[i];
    });
}

Tensor log(const Tensor& a) {
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::log(av[i]);
    return make_op_result(a.shape(), std::move(out), "log", {a}, [](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        const auto& x = n.parents[0]->values;
        auto& g = ensure_grad(*n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i] / x[i];
    });
}

Tensor sum(const Tensor& a) {
    const auto& av = a.values();
    double s = 0.0;
    for (double v : av) s += v;
    return make_op_result({1}, {s}, "sum", {a}, [](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        auto& g = ensure_grad(*n.parents[0]);
        const double gs = n.grad[0];
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs;
    });
}

Tensor l2_norm(const Tensor& a) {
    const auto& av = a.values();
    double ss = 0.0;
    for (double v : av) ss += v * v;
    const double norm = std::sqrt(ss);
    return make_op_result({1}, {norm}, "l2_norm", {a}, [](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        const double norm = n.values[0];
        if (norm == 0.0) return;  // subgradient 0 at the origin
        const auto& x = n.parents[0]->values;
        auto& g = ensure_grad(*n.parents[0]);
        const double gs = n.grad[0] / norm;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs * x[i];
    });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
    if (!(lo <= hi)) throw ConfigError("clamp: lo must not exceed hi");
    const auto& av = a.values();
    std::vector<double> out(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) out[i] = std::min(hi, std::max(lo, av[i]));
    return make_op_result(a.shape(), std::move(out), "clamp", {a}, [lo, hi](detail::TensorNode& n) {
        if (!n.parents[0]->requires_grad) return;
        const auto& x = n.parents[0]->values;
        auto& g = ensure_grad(*n.parents[0]);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (x[i] >= lo && x[i] <= hi) g[i] += n.grad[i];
        }
    });
}

Tensor reshape(const Tensor& a, Shape shape) {
    if (shape_size(shape) != a.size()) {
        throw ConfigError("reshape: size mismatch " + shape_str(a.shape()) + " -> " +
                          shape_str(shape));
    }
    std::vector<double> out = a.values();
    return make_op_result(std::move(shape), std::move(out), "reshape", {a},
                          [](detail::TensorNode& n) {
                              if (!n.parents[0]->requires_grad) return;
                              auto& g = ensure_grad(*n.parents[0]);
                              for (std::size_t i = 0; i < g.size(); ++i) g[i] += n.grad[i];
                          });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, bool same_padding) {
    const Shape& is = input.shape();
    const Shape& ks = kernel.shape();
    if (is.size() != 3 || ks.size() != 4) {
        throw ConfigError("conv2d: expected input (C,H,W) and kernel (F,C,KH,KW), got " +
                          shape_str(is) + " and " + shape_str(ks));
    }
    const std::size_t C = is[0], H = is[1], W = is[2];
    const std::size_t F = ks[0], KC = ks[1], KH = ks[2], KW = ks[3];
    if (KC != C) throw ConfigError("conv2d: kernel channels do not match input channels");
    if (bias.shape() != Shape{F}) throw ConfigError("conv2d: bias shape must be (F)");
    std::size_t ph = 0, pw = 0;
    if (same_padding) {
        if (KH % 2 == 0 || KW % 2 == 0) {
            throw ConfigError("conv2d: same padding requires odd kernel size");
        }
        ph = (KH - 1) / 2;
        pw = (KW - 1) / 2;
    } else if (KH > H || KW > W) {
        throw ConfigError("conv2d: kernel larger than input under valid padding");
    }
    const std::size_t OH = H + 2 * ph - KH + 1;
    const std::size_t OW = W + 2 * pw - KW + 1;

    const auto& iv = input.values();
    const auto& kv = kernel.values();
    const auto& bv = bias.values();
    std::vector<double> out(F * OH * OW);
    for (std::size_t f = 0; f < F; ++f) {
        double* oplane = &out[f * OH * OW];
        for (std::size_t i = 0; i < OH * OW; ++i) oplane[i] = bv[f];
        for (std::size_t c = 0; c < C; ++c) {
            const double* iplane = &iv[c * H * W];
            const double* kbase = &kv[((f * C) + c) * KH * KW];
            for (std::size_t kh = 0; kh < KH; ++kh) {
                for (std::size_t kw = 0; kw < KW; ++kw) {
                    const double kval = kbase[kh * KW + kw];
                    if (kval == 0.0) continue;
                    for (std::size_t oh = 0; oh < OH; ++oh) {
                        const std::ptrdiff_t ih = static_cast<std::ptrdiff_t>(oh + kh) -
                                                  static_cast<std::ptrdiff_t>(ph);
                        if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                        const double* irow = &iplane[static_cast<std::size_t>(ih) * W];
                        double* orow = &oplane[oh * OW];
                        const std::ptrdiff_t shift = static_cast<std::ptrdiff_t>(kw) -
                                                     static_cast<std::ptrdiff_t>(pw);
                        std::size_t ow_lo = shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                        std::size_t ow_hi = OW;
                        if (shift > 0 && static_cast<std::size_t>(shift) + OW > W) {
                            ow_hi = W - static_cast<std::size_t>(shift);
                        }
                        for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                            orow[ow] += kval * irow[ow + static_cast<std::size_t>(shift)];
                        }
                    }
                }
            }
        }
    }

    return make_op_result(
        {F, OH, OW}, std::move(out), "conv2d", {input, kernel, bias},
        [C, H, W, F, KH, KW, OH, OW, ph, pw](detail::TensorNode& n) {
            const auto& iv = n.parents[0]->values;
            const auto& kv = n.parents[1]->values;
            const auto& og = n.grad;
            if (n.parents[0]->requires_grad) {
                auto& gi = ensure_grad(*n.parents[0]);
                for (std::size_t f = 0; f < F; ++f) {
                    const double* gplane = &og[f * OH * OW];
                    for (std::size_t c = 0; c < C; ++c) {
                        double* giplane = &gi[c * H * W];
                        const double* kbase = &kv[((f * C) + c) * KH * KW];
                        for (std::size_t kh = 0; kh < KH; ++kh) {
                            for (std::size_t kw = 0; kw < KW; ++kw) {
                                const double kval = kbase[kh * KW + kw];
                                if (kval == 0.0) continue;
                                for (std::size_t oh = 0; oh < OH; ++oh) {
                                    const std::ptrdiff_t ih =
                                        static_cast<std::ptrdiff_t>(oh + kh) -
                                        static_cast<std::ptrdiff_t>(ph);
                                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                                    double* girow = &giplane[static_cast<std::size_t>(ih) * W];
                                    const double* grow = &gplane[oh * OW];
                                    const std::ptrdiff_t shift =
                                        static_cast<std::ptrdiff_t>(kw) -
                                        static_cast<std::ptrdiff_t>(pw);
                                    std::size_t ow_lo =
                                        shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                                    std::size_t ow_hi = OW;
                                    if (shift > 0 && static_cast<std::size_t>(shift) + OW > W) {
                                        ow_hi = W - static_cast<std::size_t>(shift);
                                    }
                                    for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                        girow[ow + static_cast<std::size_t>(shift)] +=
                                            kval * grow[ow];
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if (n.parents[1]->requires_grad) {
                auto& gk = ensure_grad(*n.parents[1]);
                for (std::size_t f = 0; f < F; ++f) {
                    const double* gplane = &og[f * OH * OW];
                    for (std::size_t c = 0; c < C; ++c) {
                        const double* iplane = &iv[c * H * W];
                        double* gkbase = &gk[((f * C) + c) * KH * KW];
                        for (std::size_t kh = 0; kh < KH; ++kh) {
                            for (std::size_t kw = 0; kw < KW; ++kw) {
                                double acc = 0.0;
                                for (std::size_t oh = 0; oh < OH; ++oh) {
                                    const std::ptrdiff_t ih =
                                        static_cast<std::ptrdiff_t>(oh + kh) -
                                        static_cast<std::ptrdiff_t>(ph);
                                    if (ih < 0 || ih >= static_cast<std::ptrdiff_t>(H)) continue;
                                    const double* irow = &iplane[static_cast<std::size_t>(ih) * W];
                                    const double* grow = &gplane[oh * OW];
                                    const std::ptrdiff_t shift =
                                        static_cast<std::ptrdiff_t>(kw) -
                                        static_cast<std::ptrdiff_t>(pw);
                                    std::size_t ow_lo =
                                        shift < 0 ? static_cast<std::size_t>(-shift) : 0;
                                    std::size_t ow_hi = OW;
                                    if (shift > 0 && static_cast<std::size_t>(shift) + OW > W) {
                                        ow_hi = W - static_cast<std::size_t>(shift);
                                    }
                                    for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                        acc += grow[ow] * irow[ow + static_cast<std::size_t>(shift)];
                                    }
                                }
                                gkbase[kh * KW + kw] += acc;
                            }
                        }
                    }
                }
            }
            if (n.parents[2]->requires_grad) {
                auto& gb = ensure_grad(*n.parents[2]);
                for (std::size_t f = 0; f < F; ++f) {
                    double acc = 0.0;
                    const double* gplane = &og[f * OH * OW];
                    for (std::size_t i = 0; i < OH * OW; ++i) acc += gplane[i];
                    gb[f] += acc;
                }
            }
        });
}

Tensor max_pool2d(const Tensor& input, std::size_t window) {
    const Shape& is = input.shape();
    if (is.size() != 3) throw ConfigError("max_pool2d: expected input (C,H,W)");
    if (window < 1) throw ConfigError("max_pool2d: window must be >= 1");
    const std::size_t C = is[0], H = is[1], W = is[2];
    if (H < window || W < window) throw ConfigError("max_pool2d: window larger than input");
    const std::size_t OH = H / window, OW = W / window;
    const auto& iv = input.values();
    std::vector<double> out(C * OH * OW);
    auto arg = std::make_shared<std::vector<std::size_t>>(C * OH * OW);
    for (std::size_t c = 0; c < C; ++c) {
        const double* iplane = &iv[c * H * W];
        for (std::size_t oh = 0; oh < OH; ++oh) {
            for (std::size_t ow = 0; ow < OW; ++ow) {
                double best = iplane[(oh * window) * W + ow * window];
                std::size_t best_idx = (oh * window) * W + ow * window;
                for (std::size_t dh = 0; dh < window; ++dh) {
                    for (std::size_t dw = 0; dw < window; ++dw) {
                        const std::size_t idx = (oh * window + dh) * W + (ow * window + dw);
                        if (iplane[idx] > best) {
                            best = iplane[idx];
                            best_idx = idx;
                        }
                    }
                }
                out[c * OH * OW + oh * OW + ow] = best;
                (*arg)[c * OH * OW + oh * OW + ow] = c * H * W + best_idx;
            }
        }
    }
    return make_op_result({C, OH, OW}, std::move(out), "max_pool2d", {input},
                          [arg](detail::TensorNode& n) {
                              if (!n.parents[0]->requires_grad) return;
                              auto& g = ensure_grad(*n.parents[0]);
                              for (std::size_t i = 0; i < n.grad.size(); ++i) {
                                  g[(*arg)[i]] += n.grad[i];
                              }
                          });
}

Tensor softmax_temp(const Tensor& logits, double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("softmax_temp: temperature must be > 0");
    if (logits.shape().size() != 1) throw ConfigError("softmax_temp: expected 1-D logits");
    const auto& z = logits.values();
    const double m = *std::max_element(z.begin(), z.end());
    std::vector<double> out(z.size());
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp((z[i] - m) / temperature);
        s += out[i];
    }
    for (auto& v : out) v /= s;
    return make_op_result(logits.shape(), std::move(out), "softmax_temp", {logits},
                          [temperature](detail::TensorNode& n) {
                              if (!n.parents[0]->requires_grad) return;
                              const auto& y = n.values;
                              auto& g = ensure_grad(*n.parents[0]);
                              double dot = 0.0;
                              for (std::size_t i = 0; i < y.size(); ++i) dot += n.grad[i] * y[i];
                              for (std::size_t i = 0; i < y.size(); ++i) {
                                  g[i] += y[i] * (n.grad[i] - dot) / temperature;
                              }
                          });
}

void backward(const Tensor& root) {
    if (!root.defined()) throw ConfigError("backward: undefined tensor");
    if (root.size() != 1) throw ConfigError("backward: root must be scalar");
    detail::TensorNode* root_node = root.node();
    if (!root_node->requires_grad) {
        throw ConfigError("backward: root does not depend on any requires-grad tensor");
    }
    if (root_node->backward_done) throw ConfigError("backward: graph already consumed");
    root_node->backward_done = true;

    // iterative post-order topological sort
    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> visited;
    std::vector<std::pair<detail::TensorNode*, std::size_t>> stack;
    stack.emplace_back(root_node, 0);
    visited.insert(root_node);
    while (!stack.empty()) {
        auto& [node, idx] = stack.back();
        if (idx < node->parents.size()) {
            detail::TensorNode* parent = node->parents[idx].get();
            ++idx;
            if (parent->requires_grad && !visited.count(parent)) {
                visited.insert(parent);
                stack.emplace_back(parent, 0);
            }
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }

    ensure_grad(*root_node);
    root_node->grad[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        detail::TensorNode* node = *it;
        if (node->backprop && !node->grad.empty()) {
            node->backprop(*node);
        }
    }
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double h) {
    if (!(h > 0.0)) throw ConfigError("finite_diff_gradient: h must be > 0");
    std::vector<double> base = x.values();
    std::vector<double> grad(base.size());
    for (std::size_t i = 0; i < base.size(); ++i) {
        std::vector<double> plus = base, minus = base;
        plus[i] += h;
        minus[i] -= h;
        const double fp = f(Tensor::from_values(x.shape(), std::move(plus)));
        const double fm = f(Tensor::from_values(x.shape(), std::move(minus)));
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw NumericError("finite_diff_gradient: function returned non-finite value");
        }
        grad[i] = (fp - fm) / (2.0 * h);
    }
    return Tensor::from_values(x.shape(), std::move(grad));
}

}  // namespace miaudit
