#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "miaudit/attack.hpp"
#include "miaudit/dataset.hpp"
#include "miaudit/model.hpp"

namespace miaudit {

struct TrainConfig {
    int epochs = 10;
    int batch_size = 32;
    double learning_rate = 0.05;
    enum class Optimizer { Sgd, SgdMomentum };
    Optimizer optimizer = Optimizer::Sgd;
    std::uint64_t seed = 1;

    bool adversarial = false;
    double adv_epsilon = 0.0;
    int adv_steps = 0;
    double adv_step_size = 0.0;
    NormKind adv_norm = NormKind::Linf;

    // Verify that every inner PGD iterate stays inside the epsilon ball.
    bool check_ball = true;
    int threads = 0;  // 0 = hardware concurrency
    std::string log_path;  // optional JSONL per-epoch log

    void validate() const;
};

// Standard supervised training; mutates the model parameters in place and
// returns a reference to it. Deterministic under (seed, data order).
Classifier& train_normal(Classifier& model, const Dataset& data, const TrainConfig& cfg);

// PGD adversarial training: every batch is replaced by untargeted-PGD
// counterparts labeled with the original class before the parameter step.
Classifier& train_pgd_at(Classifier& model, const Dataset& data, const TrainConfig& cfg);

// Fraction of examples classified correctly; when attack is given, the
// fraction still classified correctly after attacking each example.
double evaluate_accuracy(const Classifier& model, const Dataset& data,
                         const std::optional<AttackConfig>& attack = std::nullopt,
                         int threads = 1);

}  // namespace miaudit
