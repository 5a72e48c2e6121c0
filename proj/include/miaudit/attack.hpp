#pragma once

#include <functional>
#include <optional>
#include <string>

#include "miaudit/labels.hpp"
#include "miaudit/model.hpp"
#include "miaudit/tensor.hpp"

namespace miaudit {

enum class AttackFamily { Fgsm, Pgd, Cw };
enum class NormKind { L2, Linf };

AttackFamily attack_family_from_string(const std::string& s);
NormKind norm_from_string(const std::string& s);

struct AttackConfig {
    AttackFamily family = AttackFamily::Pgd;
    NormKind norm = NormKind::Linf;
    double epsilon = 0.1;   // ball radius for fgsm/pgd
    int steps = 10;         // pgd iterations
    double step_size = 0.025;
    double alpha = 0.01;    // cw trade-off weight
    int max_iters = 200;    // cw iterations
    double cw_step_size = 0.01;
    double lambda = 1.0;    // target-label confidence
    double temperature = 1.0;
    double box_lo = 0.0, box_hi = 1.0;

    void validate(int n_classes) const;
};

struct AttackOutcome {
    Tensor adversarial;    // x_hat, inside the clamp box
    Tensor perturbation;   // x_hat - x
    double l2_distance = 0.0;
    bool success = false;  // targeted: argmax == t; untargeted: argmax changed
    int iterations = 0;
};

// Per-iteration trace hook (iteration, ce term, distance term, objective).
using AttackTrace = std::function<void(int, double, double, double)>;

// Single sign step against the cross-entropy toward `target` (targeted
// descent: x - eps * sign(grad)), then box clamp.
AttackOutcome fgsm(const Classifier& model, const Tensor& x, const LabelDistribution& target,
                   double epsilon, double box_lo = 0.0, double box_hi = 1.0);

// Iterated sign/normalized steps toward `target` with projection back into
// the epsilon ball after every step. Every intermediate iterate satisfies the
// ball constraint.
AttackOutcome pgd(const Classifier& model, const Tensor& x, const LabelDistribution& target,
                  const AttackConfig& cfg);

// Untargeted PGD: ascends the cross-entropy of the model's current
// prediction. Success means the argmax changed.
AttackOutcome untargeted_attack(const Classifier& model, const Tensor& x,
                                const AttackConfig& cfg);

// Inner maximization for adversarial training: ascend CE against the given
// (true) label inside the epsilon ball.
AttackOutcome pgd_ascend(const Classifier& model, const Tensor& x,
                         const LabelDistribution& label, const AttackConfig& cfg);

struct DirectionalResult {
    bool reached = false;
    double distance = 0.0;  // smallest successful L2 distance when reached
    AttackOutcome outcome;  // best successful iterate, or final iterate if unreached
};

// Gradient descent on alpha * CE(F(x_hat, T), smooth_label(t, n, lambda)) +
// ||x_hat - x||_2 from x_hat = x, clamped into the box after every step;
// tracks the smallest L2 distance among iterates whose argmax equals t.
// lambda = T = 1 is the plain targeted C&W distance.
DirectionalResult directional_distance(const Classifier& model, const Tensor& x, int target_class,
                                       double lambda, double temperature, double alpha, int iters,
                                       double step_size = 0.01, double box_lo = 0.0,
                                       double box_hi = 1.0, const AttackTrace& trace = nullptr);

// Minimum over the target classes (the model's current prediction is
// filtered out); unreached directions are skipped. nullopt when every
// direction is unreached.
std::optional<double> min_directional_distance(const Classifier& model, const Tensor& x,
                                               const std::vector<int>& targets, double lambda,
                                               double temperature, double alpha, int iters,
                                               double step_size = 0.01, double box_lo = 0.0,
                                               double box_hi = 1.0);

}  // namespace miaudit
