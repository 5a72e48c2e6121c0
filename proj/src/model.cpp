#include "miaudit/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace miaudit {

namespace {

Tensor he_uniform(Shape shape, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::vector<double> v(shape_size(shape));
    for (auto& x : v) x = rng.uniform(-limit, limit);
    return Tensor::from_values(std::move(shape), std::move(v));
}

std::size_t flat_size(const Shape& s) { return shape_size(s); }

const char* kind_name(Layer::Kind k) {
    switch (k) {
        case Layer::Kind::Dense: return "dense";
        case Layer::Kind::Conv: return "conv";
        case Layer::Kind::MaxPool: return "maxpool";
        case Layer::Kind::Relu: return "relu";
        case Layer::Kind::Flatten: return "flatten";
    }
    return "?";
}

Layer::Kind kind_from_name(const std::string& s) {
    if (s == "dense") return Layer::Kind::Dense;
    if (s == "conv") return Layer::Kind::Conv;
    if (s == "maxpool") return Layer::Kind::MaxPool;
    if (s == "relu") return Layer::Kind::Relu;
    if (s == "flatten") return Layer::Kind::Flatten;
    throw DataError("checkpoint: unknown layer kind '" + s + "'");
}

}  // namespace

Classifier Classifier::mlp(Shape input_shape, const std::vector<int>& hidden, int n_classes,
                           Rng& rng) {
    if (n_classes < 1) throw ConfigError("mlp: need at least one class");
    Classifier m;
    m.input_shape_ = std::move(input_shape);
    m.n_classes_ = n_classes;
    std::size_t in_dim = flat_size(m.input_shape_);
    if (m.input_shape_.size() > 1) {
        Layer fl;
        fl.kind = Layer::Kind::Flatten;
        m.layers_.push_back(fl);
    }
    for (int h : hidden) {
        if (h < 1) throw ConfigError("mlp: hidden sizes must be positive");
        Layer d;
        d.kind = Layer::Kind::Dense;
        d.in = in_dim;
        d.out = static_cast<std::size_t>(h);
        d.W = he_uniform({d.out, d.in}, d.in, rng);
        d.b = Tensor::zeros({d.out});
        m.layers_.push_back(d);
        Layer r;
        r.kind = Layer::Kind::Relu;
        m.layers_.push_back(r);
        in_dim = static_cast<std::size_t>(h);
    }
    Layer head;
    head.kind = Layer::Kind::Dense;
    head.in = in_dim;
    head.out = static_cast<std::size_t>(n_classes);
    head.W = he_uniform({head.out, head.in}, head.in, rng);
    head.b = Tensor::zeros({head.out});
    m.layers_.push_back(head);
    return m;
}

Classifier Classifier::cnn5(Shape input_shape, int n_classes, Rng& rng) {
    if (input_shape.size() != 3) throw ConfigError("cnn5: input shape must be (C,H,W)");
    if (n_classes < 1) throw ConfigError("cnn5: need at least one class");
    Classifier m;
    m.input_shape_ = input_shape;
    m.n_classes_ = n_classes;
    const std::size_t C = input_shape[0];
    std::size_t H = input_shape[1], W = input_shape[2];

    auto add_conv = [&](std::size_t in_ch, std::size_t out_ch) {
        Layer c;
        c.kind = Layer::Kind::Conv;
        c.in_ch = in_ch;
        c.out_ch = out_ch;
        c.ksize = 3;
        c.W = he_uniform({out_ch, in_ch, 3, 3}, in_ch * 9, rng);
        c.b = Tensor::zeros({out_ch});
        m.layers_.push_back(c);
        Layer r;
        r.kind = Layer::Kind::Relu;
        m.layers_.push_back(r);
        Layer p;
        p.kind = Layer::Kind::MaxPool;
        p.window = 2;
        m.layers_.push_back(p);
        H = (H - 2) / 2;
        W = (W - 2) / 2;
    };
    add_conv(C, 16);
    add_conv(16, 32);
    if (H == 0 || W == 0) throw ConfigError("cnn5: input too small for the architecture");

    Layer fl;
    fl.kind = Layer::Kind::Flatten;
    m.layers_.push_back(fl);

    Layer d1;
    d1.kind = Layer::Kind::Dense;
    d1.in = 32 * H * W;
    d1.out = 128;
    d1.W = he_uniform({d1.out, d1.in}, d1.in, rng);
    d1.b = Tensor::zeros({d1.out});
    m.layers_.push_back(d1);
    Layer r;
    r.kind = Layer::Kind::Relu;
    m.layers_.push_back(r);

    Layer head;
    head.kind = Layer::Kind::Dense;
    head.in = 128;
    head.out = static_cast<std::size_t>(n_classes);
    head.W = he_uniform({head.out, head.in}, head.in, rng);
    head.b = Tensor::zeros({head.out});
    m.layers_.push_back(head);
    return m;
}

Classifier Classifier::from_layers(Shape input_shape, int n_classes, std::vector<Layer> layers) {
    if (n_classes < 1) throw ConfigError("from_layers: need at least one class");
    if (layers.empty()) throw ConfigError("from_layers: need at least one layer");
    Classifier m;
    m.input_shape_ = std::move(input_shape);
    m.n_classes_ = n_classes;
    m.layers_ = std::move(layers);
    return m;
}

Tensor Classifier::logits(const Tensor& x) const {
    if (layers_.empty()) throw ConfigError("classifier has no layers");
    if (x.shape() != input_shape_) {
        throw ConfigError("input shape " + shape_str(x.shape()) + " does not match model input " +
                          shape_str(input_shape_));
    }
    Tensor h = x;
    for (const auto& layer : layers_) {
        switch (layer.kind) {
            case Layer::Kind::Dense:
                if (h.shape().size() != 1) h = reshape(h, {h.size()});
                h = add(matmul(layer.W, h), layer.b);
                break;
            case Layer::Kind::Conv:
                h = conv2d(h, layer.W, layer.b, layer.same_pad);
                break;
            case Layer::Kind::MaxPool:
                h = max_pool2d(h, layer.window);
                break;
            case Layer::Kind::Relu:
                h = relu(h);
                break;
            case Layer::Kind::Flatten:
                h = reshape(h, {h.size()});
                break;
        }
    }
    if (h.size() != static_cast<std::size_t>(n_classes_)) {
        throw ConfigError("classifier produced " + std::to_string(h.size()) + " logits for " +
                          std::to_string(n_classes_) + " classes");
    }
    return h;
}

LabelDistribution Classifier::predict_probs(const Tensor& x, double temperature) const {
    if (!(temperature > 0.0)) throw ConfigError("predict_probs: temperature must be > 0");
    NoGradGuard ng;
    Tensor z = logits(x);
    return LabelDistribution(softmax_with_temperature(z.values(), temperature));
}

int Classifier::predicted_class(const Tensor& x) const {
    NoGradGuard ng;
    Tensor z = logits(x);
    return static_cast<int>(z.argmax()) + 1;
}

std::vector<Tensor> Classifier::parameters() const {
    std::vector<Tensor> ps;
    for (const auto& layer : layers_) {
        if (layer.W.defined()) ps.push_back(layer.W);
        if (layer.b.defined()) ps.push_back(layer.b);
    }
    return ps;
}

void Classifier::set_trainable(bool flag) {
    for (auto& layer : layers_) {
        if (layer.W.defined()) layer.W.set_requires_grad(flag);
        if (layer.b.defined()) layer.b.set_requires_grad(flag);
    }
    trainable_ = flag;
}

Classifier Classifier::clone() const {
    Classifier m = *this;
    for (auto& layer : m.layers_) {
        if (layer.W.defined()) layer.W = layer.W.detached();
        if (layer.b.defined()) layer.b = layer.b.detached();
    }
    m.trainable_ = false;
    return m;
}

std::string Classifier::to_json() const {
    nlohmann::json j;
    j["format"] = "miaudit-checkpoint";
    j["version"] = 1;
    j["input_shape"] = input_shape_;
    j["num_classes"] = n_classes_;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& layer : layers_) {
        nlohmann::json lj;
        lj["kind"] = kind_name(layer.kind);
        switch (layer.kind) {
            case Layer::Kind::Dense:
                lj["in"] = layer.in;
                lj["out"] = layer.out;
                lj["W"] = layer.W.values();
                lj["b"] = layer.b.values();
                break;
            case Layer::Kind::Conv:
                lj["in_ch"] = layer.in_ch;
                lj["out_ch"] = layer.out_ch;
                lj["ksize"] = layer.ksize;
                lj["same_pad"] = layer.same_pad;
                lj["W"] = layer.W.values();
                lj["b"] = layer.b.values();
                break;
            case Layer::Kind::MaxPool:
                lj["window"] = layer.window;
                break;
            default:
                break;
        }
        layers.push_back(std::move(lj));
    }
    j["layers"] = std::move(layers);
    return j.dump();
}

Classifier Classifier::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: invalid JSON: ") + e.what());
    }
    try {
        if (j.at("format") != "miaudit-checkpoint") {
            throw DataError("checkpoint: unexpected format tag");
        }
        if (j.at("version") != 1) throw DataError("checkpoint: unsupported version");
        Classifier m;
        m.input_shape_ = j.at("input_shape").get<Shape>();
        m.n_classes_ = j.at("num_classes").get<int>();
        for (const auto& lj : j.at("layers")) {
            Layer layer;
            layer.kind = kind_from_name(lj.at("kind").get<std::string>());
            switch (layer.kind) {
                case Layer::Kind::Dense: {
                    layer.in = lj.at("in").get<std::size_t>();
                    layer.out = lj.at("out").get<std::size_t>();
                    layer.W = Tensor::from_values({layer.out, layer.in},
                                                  lj.at("W").get<std::vector<double>>());
                    layer.b = Tensor::from_values({layer.out},
                                                  lj.at("b").get<std::vector<double>>());
                    break;
                }
                case Layer::Kind::Conv: {
                    layer.in_ch = lj.at("in_ch").get<std::size_t>();
                    layer.out_ch = lj.at("out_ch").get<std::size_t>();
                    layer.ksize = lj.at("ksize").get<std::size_t>();
                    layer.same_pad = lj.at("same_pad").get<bool>();
                    layer.W = Tensor::from_values(
                        {layer.out_ch, layer.in_ch, layer.ksize, layer.ksize},
                        lj.at("W").get<std::vector<double>>());
                    layer.b = Tensor::from_values({layer.out_ch},
                                                  lj.at("b").get<std::vector<double>>());
                    break;
                }
                case Layer::Kind::MaxPool:
                    layer.window = lj.at("window").get<std::size_t>();
                    break;
                default:
                    break;
            }
            m.layers_.push_back(std::move(layer));
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("checkpoint: missing or malformed field: ") + e.what());
    }
}

void Classifier::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out << to_json() << "\n";
    if (!out) throw DataError("failed writing checkpoint: " + path);
}

Classifier Classifier::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::vector<double> softmax_with_temperature(const std::vector<double>& logits,
                                             double temperature) {
    if (!(temperature > 0.0)) throw ConfigError("softmax: temperature must be > 0");
    if (logits.empty()) throw ConfigError("softmax: empty logits");
    const double m = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double s = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp((logits[i] - m) / temperature);
        s += out[i];
    }
    for (auto& v : out) v /= s;
    return out;
}

double cross_entropy(const LabelDistribution& pred, const LabelDistribution& target) {
    if (pred.num_classes() != target.num_classes()) {
        throw ConfigError("cross_entropy: class counts differ");
    }
    const auto& p = pred.probs();
    const auto& t = target.probs();
    double ce = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double pi = std::min(1.0, std::max(kLogEps, p[i]));
        ce -= t[i] * std::log(pi);
    }
    return ce;
}

Tensor cross_entropy_graph(const Tensor& pred_probs, const LabelDistribution& target) {
    if (pred_probs.size() != static_cast<std::size_t>(target.num_classes())) {
        throw ConfigError("cross_entropy: class counts differ");
    }
    Tensor t = Tensor::from_values(pred_probs.shape(), target.probs());
    Tensor logp = log(clamp(pred_probs, kLogEps, 1.0));
    return scalar_mul(sum(mul(t, logp)), -1.0);
}

}  // namespace miaudit
