#include "miaudit/train.hpp"

#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "miaudit/parallel.hpp"
#include "miaudit/rng.hpp"

namespace miaudit {

namespace {

struct Sgd {
    double lr;
    bool momentum;
    std::vector<std::vector<double>> velocity;

    void step(std::vector<Tensor>& params) {
        if (momentum && velocity.empty()) {
            velocity.resize(params.size());
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i].assign(params[i].size(), 0.0);
            }
        }
        for (std::size_t i = 0; i < params.size(); ++i) {
            auto* node = params[i].node();
            if (node->grad.empty()) continue;
            auto& w = node->values;
            const auto& g = node->grad;
            if (momentum) {
                auto& v = velocity[i];
                for (std::size_t j = 0; j < w.size(); ++j) {
                    v[j] = 0.9 * v[j] + g[j];
                    w[j] -= lr * v[j];
                }
            } else {
                for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
            }
            for (double x : w) {
                if (!std::isfinite(x)) throw NumericError("training diverged: non-finite weight");
            }
        }
    }
};

void zero_grads(std::vector<Tensor>& params) {
    for (auto& p : params) p.zero_grad();
}

Classifier& train_impl(Classifier& model, const Dataset& data, const TrainConfig& cfg,
                       bool adversarial) {
    cfg.validate();
    if (data.size() == 0) throw DataError("training dataset is empty");
    for (int l : data.labels) {
        if (l < 1 || l > data.num_classes) {
            throw DataError("training label " + std::to_string(l) + " outside [1," +
                            std::to_string(data.num_classes) + "]");
        }
    }

    std::ofstream log;
    if (!cfg.log_path.empty()) {
        log.open(cfg.log_path, std::ios::binary);
        if (!log) throw DataError("cannot open training log: " + cfg.log_path);
    }

    AttackConfig inner;
    if (adversarial) {
        inner.family = AttackFamily::Pgd;
        inner.norm = cfg.adv_norm;
        inner.epsilon = cfg.adv_epsilon;
        inner.steps = cfg.adv_steps;
        inner.step_size = cfg.adv_step_size;
    }

    model.set_trainable(true);
    std::vector<Tensor> params = model.parameters();
    Sgd opt{cfg.learning_rate, cfg.optimizer == TrainConfig::Optimizer::SgdMomentum, {}};

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    const int threads = resolve_threads(cfg.threads);
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::size_t seen = 0, correct = 0;
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            const std::size_t bs = end - start;

            // materialize the batch; under PGD-AT craft adversarial
            // counterparts first (inner max), in parallel per example
            std::vector<std::vector<double>> batch(bs);
            if (adversarial && cfg.adv_epsilon > 0.0) {
                // attacks only need input gradients; freezing the parameters
                // keeps the parallel inner loop off the shared grad buffers
                model.set_trainable(false);
                parallel_for(bs, threads, [&](std::size_t bi) {
                    const std::size_t idx = order[start + bi];
                    const Tensor x = data.example(idx);
                    const LabelDistribution y = one_hot(data.label(idx), data.num_classes);
                    AttackOutcome adv = pgd_ascend(model, x, y, inner);
                    if (cfg.check_ball) {
                        const auto& d = adv.perturbation.values();
                        double viol = 0.0;
                        if (inner.norm == NormKind::Linf) {
                            for (double v : d) viol = std::max(viol, std::fabs(v));
                        } else {
                            for (double v : d) viol += v * v;
                            viol = std::sqrt(viol);
                        }
                        if (viol > inner.epsilon + 1e-9) {
                            throw NumericError("PGD-AT iterate outside the epsilon ball");
                        }
                    }
                    batch[bi] = adv.adversarial.values();
                });
                model.set_trainable(true);
            } else {
                for (std::size_t bi = 0; bi < bs; ++bi) {
                    batch[bi] = data.examples[order[start + bi]];
                }
            }

            // forward/backward sequentially for a deterministic accumulation
            zero_grads(params);
            const double inv_bs = 1.0 / static_cast<double>(bs);
            for (std::size_t bi = 0; bi < bs; ++bi) {
                const std::size_t idx = order[start + bi];
                Tensor x = Tensor::from_values(data.input_shape, batch[bi]);
                Tensor probs = softmax_temp(model.logits(x), 1.0);
                const LabelDistribution y = one_hot(data.label(idx), data.num_classes);
                Tensor loss = scalar_mul(cross_entropy_graph(probs, y), inv_bs);
                const double loss_v = loss.item() * static_cast<double>(bs);
                if (!std::isfinite(loss_v)) throw NumericError("training diverged: loss not finite");
                epoch_loss += loss_v;
                if (static_cast<int>(probs.argmax()) + 1 == data.label(idx)) ++correct;
                ++seen;
                backward(loss);
            }
            opt.step(params);
        }
        if (log) {
            nlohmann::json line;
            line["epoch"] = epoch;
            line["loss"] = epoch_loss / static_cast<double>(seen);
            line["accuracy"] = static_cast<double>(correct) / static_cast<double>(seen);
            log << line.dump() << "\n";
        }
    }
    model.set_trainable(false);
    return model;
}

}  // namespace

void TrainConfig::validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train: batch size must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("train: learning rate must be > 0");
    if (adversarial) {
        if (!(adv_epsilon >= 0.0)) throw ConfigError("train: adversarial epsilon must be >= 0");
        if (adv_epsilon > 0.0 && (adv_steps < 1 || !(adv_step_size > 0.0))) {
            throw ConfigError("train: adversarial settings require steps >= 1 and step size > 0");
        }
    } else if (adv_epsilon != 0.0 || adv_steps != 0 || adv_step_size != 0.0) {
        throw ConfigError("train: inner-PGD settings are only valid with the adversarial flag");
    }
}

Classifier& train_normal(Classifier& model, const Dataset& data, const TrainConfig& cfg) {
    if (cfg.adversarial) throw ConfigError("train_normal: adversarial flag is set");
    return train_impl(model, data, cfg, false);
}

Classifier& train_pgd_at(Classifier& model, const Dataset& data, const TrainConfig& cfg) {
    if (!cfg.adversarial) throw ConfigError("train_pgd_at: adversarial flag not set");
    return train_impl(model, data, cfg, true);
}

double evaluate_accuracy(const Classifier& model, const Dataset& data,
                         const std::optional<AttackConfig>& attack, int threads) {
    if (data.size() == 0) throw DataError("evaluate_accuracy: dataset is empty");
    std::vector<char> correct(data.size(), 0);
    parallel_for(data.size(), threads, [&](std::size_t i) {
        const Tensor x = data.example(i);
        int pred;
        if (attack) {
            AttackOutcome out = untargeted_attack(model, x, *attack);
            pred = model.predicted_class(out.adversarial);
        } else {
            pred = model.predicted_class(x);
        }
        correct[i] = pred == data.label(i) ? 1 : 0;
    });
    std::size_t n_correct = 0;
    for (char c : correct) n_correct += c;
    return static_cast<double>(n_correct) / static_cast<double>(data.size());
}

}  // namespace miaudit
