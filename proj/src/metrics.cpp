#include "miaudit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "miaudit/format.hpp"

namespace miaudit {

namespace {

double clamped_log(double p) { return std::log(std::min(1.0, std::max(kLogEps, p))); }

void check_class(int k, int n, const char* op) {
    if (k < 1 || k > n) {
        throw ConfigError(std::string(op) + ": class index " + std::to_string(k) +
                          " out of range [1," + std::to_string(n) + "]");
    }
}

}  // namespace

int score_correctness(const Classifier& model, const Tensor& x, int k) {
    check_class(k, model.num_classes(), "score_correctness");
    return model.predicted_class(x) == k ? 1 : 0;
}

double score_confidence(const Classifier& model, const Tensor& x) {
    const auto& p = model.predict_probs(x, 1.0).probs();
    return *std::max_element(p.begin(), p.end());
}

double score_cross_entropy(const Classifier& model, const Tensor& x, int k) {
    check_class(k, model.num_classes(), "score_cross_entropy");
    return cross_entropy(model.predict_probs(x, 1.0), one_hot(k, model.num_classes()));
}

double score_entropy(const Classifier& model, const Tensor& x) {
    const auto& p = model.predict_probs(x, 1.0).probs();
    double h = 0.0;
    for (double pi : p) h -= pi * clamped_log(pi);
    return h;
}

double score_m_entropy(const Classifier& model, const Tensor& x, int k) {
    check_class(k, model.num_classes(), "score_m_entropy");
    const auto& p = model.predict_probs(x, 1.0).probs();
    const std::size_t ki = static_cast<std::size_t>(k - 1);
    double s = -(1.0 - p[ki]) * clamped_log(p[ki]);
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (i == ki) continue;
        s -= p[i] * clamped_log(1.0 - p[i]);
    }
    return s;
}

int score_sm_adv(const Classifier& model, const Tensor& x, const AttackConfig& cfg) {
    AttackOutcome out = untargeted_attack(model, x, cfg);
    return out.success ? 0 : 1;  // failed attack => member
}

std::optional<double> score_adv_distance(const Classifier& model, const Tensor& x,
                                         const std::vector<int>& targets, double alpha, int iters,
                                         double step_size, double box_lo, double box_hi) {
    return score_dd(model, x, 1.0, 1.0, targets, alpha, iters, step_size, box_lo, box_hi);
}

std::optional<double> score_dd(const Classifier& model, const Tensor& x, double lambda,
                               double temperature, const std::vector<int>& targets, double alpha,
                               int iters, double step_size, double box_lo, double box_hi) {
    return min_directional_distance(model, x, targets, lambda, temperature, alpha, iters,
                                    step_size, box_lo, box_hi);
}

ThresholdDecision best_threshold(const std::vector<double>& member_scores,
                                 const std::vector<double>& nonmember_scores, Direction direction,
                                 const std::string& metric_name) {
    if (member_scores.empty() || nonmember_scores.empty()) {
        throw DataError("best_threshold: score lists must be non-empty");
    }
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> candidates;
    candidates.reserve(member_scores.size() + nonmember_scores.size() + 2);
    candidates.push_back(-inf);
    candidates.insert(candidates.end(), member_scores.begin(), member_scores.end());
    candidates.insert(candidates.end(), nonmember_scores.begin(), nonmember_scores.end());
    candidates.push_back(inf);
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    // sorted copies let each candidate's flag counts come from binary search
    std::vector<double> ms = member_scores, ns = nonmember_scores;
    std::sort(ms.begin(), ms.end());
    std::sort(ns.begin(), ns.end());
    const double m = static_cast<double>(ms.size());
    const double n = static_cast<double>(ns.size());

    ThresholdDecision best;
    best.metric = metric_name;
    best.direction = direction;
    best.tau = -inf;
    best.acc_inf = -1.0;
    for (double tau : candidates) {
        double flagged_m, flagged_n;
        if (direction == Direction::MemberIfAbove) {
            flagged_m = static_cast<double>(ms.end() - std::upper_bound(ms.begin(), ms.end(), tau));
            flagged_n = static_cast<double>(ns.end() - std::upper_bound(ns.begin(), ns.end(), tau));
        } else {
            flagged_m = static_cast<double>(std::lower_bound(ms.begin(), ms.end(), tau) - ms.begin());
            flagged_n = static_cast<double>(std::lower_bound(ns.begin(), ns.end(), tau) - ns.begin());
        }
        const double acc = (flagged_m * n + (n - flagged_n) * m) / (2.0 * m * n);
        if (acc > best.acc_inf) {
            best.acc_inf = acc;
            best.tau = tau;
        }
    }
    return best;
}

double inference_accuracy(const std::vector<int>& member_flags,
                          const std::vector<int>& nonmember_flags) {
    if (member_flags.empty() || nonmember_flags.empty()) {
        throw DataError("inference_accuracy: flag lists must be non-empty");
    }
    long long a = 0, b = 0;
    for (int f : member_flags) a += f != 0 ? 1 : 0;
    for (int f : nonmember_flags) b += f != 0 ? 1 : 0;
    const double m = static_cast<double>(member_flags.size());
    const double n = static_cast<double>(nonmember_flags.size());
    // 1/2 (a/m + 1 - b/n) computed as one exact-integer ratio
    return (static_cast<double>(a) * n + (n - static_cast<double>(b)) * m) / (2.0 * m * n);
}

std::string audit_records_csv(const std::vector<AuditRecord>& records,
                              const std::vector<double>& lambdas,
                              const std::vector<double>& temperatures) {
    std::ostringstream os;
    os << "id,member,true_class,correct,confidence,cross_entropy,entropy,m_entropy,sm_adv,"
          "adv_distance";
    for (double t : temperatures) {
        for (double l : lambdas) {
            os << ",dd_L" << format_label(l) << "_T" << format_label(t);
        }
    }
    os << "\n";
    for (const auto& r : records) {
        os << r.id << "," << (r.member ? 1 : 0) << "," << r.true_class << "," << r.correctness
           << "," << format_full(r.confidence) << "," << format_full(r.cross_entropy) << ","
           << format_full(r.entropy) << "," << format_full(r.m_entropy) << "," << r.sm_adv << ",";
        os << (r.adv_distance ? format_full(*r.adv_distance) : std::string("unreached"));
        for (const auto& cell : r.dd) {
            os << "," << (cell ? format_full(*cell) : std::string("unreached"));
        }
        os << "\n";
    }
    return os.str();
}

}  // namespace miaudit
