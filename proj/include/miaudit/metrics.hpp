#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "miaudit/attack.hpp"
#include "miaudit/model.hpp"

namespace miaudit {

// Membership scores. Direction conventions (fixed per metric): member-if-above
// for confidence and the distance metrics, member-if-below for cross-entropy,
// entropy and m_entropy.

// 1 iff argmax F(x) equals the true class k.
int score_correctness(const Classifier& model, const Tensor& x, int k);

// max F(x) at T = 1.
double score_confidence(const Classifier& model, const Tensor& x);

// CE(F(x), one_hot(k)).
double score_cross_entropy(const Classifier& model, const Tensor& x, int k);

// -sum_i F(x)_i log F(x)_i.
double score_entropy(const Classifier& model, const Tensor& x);

// -(1 - F(x)_k) log(F(x)_k) - sum_{i != k} F(x)_i log(1 - F(x)_i).
double score_m_entropy(const Classifier& model, const Tensor& x, int k);

// 1 iff the untargeted attack failed to change the prediction.
int score_sm_adv(const Classifier& model, const Tensor& x, const AttackConfig& cfg);

// Minimum targeted C&W distance at lambda = T = 1 over the target set;
// nullopt when every direction is unreached.
std::optional<double> score_adv_distance(const Classifier& model, const Tensor& x,
                                         const std::vector<int>& targets, double alpha, int iters,
                                         double step_size = 0.01, double box_lo = 0.0,
                                         double box_hi = 1.0);

// Minimum directional distance at (lambda, T) over the target set; the
// adv-distance score is exactly score_dd at lambda = T = 1.
std::optional<double> score_dd(const Classifier& model, const Tensor& x, double lambda,
                               double temperature, const std::vector<int>& targets, double alpha,
                               int iters, double step_size = 0.01, double box_lo = 0.0,
                               double box_hi = 1.0);

enum class Direction { MemberIfAbove, MemberIfBelow };

struct ThresholdDecision {
    std::string metric;
    Direction direction = Direction::MemberIfAbove;
    double tau = 0.0;  // an observed score or +/-infinity
    double acc_inf = 0.0;
};

// Sweeps tau over the observed scores plus +/-infinity sentinels and returns
// the threshold maximizing the balanced inference accuracy; ties break toward
// the smallest tau. Unreached scores must be mapped to +infinity beforehand.
ThresholdDecision best_threshold(const std::vector<double>& member_scores,
                                 const std::vector<double>& nonmember_scores, Direction direction,
                                 const std::string& metric_name = "");

// Acc_Inf = 1/2 (sum members flagged / |members| + 1 - sum non-members
// flagged / |non-members|), computed from exact integer counts.
double inference_accuracy(const std::vector<int>& member_flags,
                          const std::vector<int>& nonmember_flags);

// Per-example audit row: ground truth membership plus every metric value.
struct AuditRecord {
    int id = 0;
    bool member = false;
    int true_class = 0;
    int correctness = 0;
    double confidence = 0.0;
    double cross_entropy = 0.0;
    double entropy = 0.0;
    double m_entropy = 0.0;
    int sm_adv = 0;
    std::optional<double> adv_distance;                    // nullopt = unreached
    std::vector<std::optional<double>> dd;                 // per grid cell, row-major (T, lambda)
};

// CSV with one row per example; dd columns are named dd_L{lambda}_T{T}.
std::string audit_records_csv(const std::vector<AuditRecord>& records,
                              const std::vector<double>& lambdas,
                              const std::vector<double>& temperatures);

}  // namespace miaudit
