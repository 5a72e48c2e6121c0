#include "miaudit/attack.hpp"

#include <algorithm>
#include <cmath>

namespace miaudit {

namespace {

std::vector<double> input_gradient(const Classifier& model, const Tensor& x_values,
                                   const LabelDistribution& target, double temperature) {
    Tensor x = Tensor::from_values(x_values.shape(), x_values.values(), /*requires_grad=*/true);
    Tensor probs = softmax_temp(model.logits(x), temperature);
    Tensor ce = cross_entropy_graph(probs, target);
    backward(ce);
    return x.grad();
}

void clamp_box(std::vector<double>& v, double lo, double hi) {
    for (auto& x : v) x = std::min(hi, std::max(lo, x));
}

double l2_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double ss = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        ss += d * d;
    }
    return std::sqrt(ss);
}

double linf_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::fabs(a[i] - b[i]));
    }
    return m;
}

AttackOutcome make_outcome(const Tensor& x, std::vector<double> adv, bool success,
                           int iterations) {
    AttackOutcome out;
    out.adversarial = Tensor::from_values(x.shape(), adv);
    std::vector<double> delta(adv.size());
    const auto& xv = x.values();
    for (std::size_t i = 0; i < adv.size(); ++i) delta[i] = adv[i] - xv[i];
    out.perturbation = Tensor::from_values(x.shape(), std::move(delta));
    out.l2_distance = l2_dist(adv, xv);
    out.success = success;
    out.iterations = iterations;
    return out;
}

// Project adv into the epsilon ball around x under the given norm, then into
// the box. Box clamping moves every coordinate toward x, so it cannot grow
// either norm.
void project(std::vector<double>& adv, const std::vector<double>& x, NormKind norm, double eps,
             double box_lo, double box_hi) {
    if (norm == NormKind::Linf) {
        for (std::size_t i = 0; i < adv.size(); ++i) {
            adv[i] = std::min(x[i] + eps, std::max(x[i] - eps, adv[i]));
        }
    } else {
        const double d = l2_dist(adv, x);
        if (d > eps) {
            const double scale = eps / d;
            for (std::size_t i = 0; i < adv.size(); ++i) {
                adv[i] = x[i] + (adv[i] - x[i]) * scale;
            }
        }
    }
    clamp_box(adv, box_lo, box_hi);
}

void check_ball(const std::vector<double>& adv, const std::vector<double>& x, NormKind norm,
                double eps) {
    const double d = norm == NormKind::Linf ? linf_dist(adv, x) : l2_dist(adv, x);
    if (d > eps + 1e-9) {
        throw NumericError("attack iterate left the epsilon ball: " + std::to_string(d) + " > " +
                           std::to_string(eps));
    }
}

// Shared PGD core. direction = -1 descends CE (targeted), +1 ascends
// (untargeted / adversarial training).
AttackOutcome pgd_core(const Classifier& model, const Tensor& x, const LabelDistribution& label,
                       const AttackConfig& cfg, double direction, bool success_is_argmax_change) {
    cfg.validate(model.num_classes());
    const auto& xv = x.values();
    const int original = model.predicted_class(x);
    std::vector<double> adv = xv;
    for (int step = 0; step < cfg.steps; ++step) {
        Tensor cur = Tensor::from_values(x.shape(), adv);
        std::vector<double> g = input_gradient(model, cur, label, 1.0);
        if (cfg.norm == NormKind::Linf) {
            for (std::size_t i = 0; i < adv.size(); ++i) {
                const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
                adv[i] += direction * cfg.step_size * s;
            }
        } else {
            double gn = 0.0;
            for (double v : g) gn += v * v;
            gn = std::sqrt(gn);
            if (gn > 0.0) {
                for (std::size_t i = 0; i < adv.size(); ++i) {
                    adv[i] += direction * cfg.step_size * g[i] / gn;
                }
            }
        }
        project(adv, xv, cfg.norm, cfg.epsilon, cfg.box_lo, cfg.box_hi);
        check_ball(adv, xv, cfg.norm, cfg.epsilon);
    }
    Tensor adv_t = Tensor::from_values(x.shape(), adv);
    const int now = model.predicted_class(adv_t);
    const bool success = success_is_argmax_change ? (now != original)
                                                  : (now == label.argmax_class());
    return make_outcome(x, std::move(adv), success, cfg.steps);
}

}  // namespace

AttackFamily attack_family_from_string(const std::string& s) {
    if (s == "fgsm") return AttackFamily::Fgsm;
    if (s == "pgd") return AttackFamily::Pgd;
    if (s == "cw") return AttackFamily::Cw;
    throw ConfigError("unknown attack family '" + s + "' (expected fgsm|pgd|cw)");
}

NormKind norm_from_string(const std::string& s) {
    if (s == "l2" || s == "L2") return NormKind::L2;
    if (s == "linf" || s == "Linf") return NormKind::Linf;
    throw ConfigError("unknown norm '" + s + "' (expected l2|linf)");
}

void AttackConfig::validate(int n_classes) const {
    if (!(epsilon >= 0.0)) throw ConfigError("attack: epsilon must be >= 0");
    if (steps < 1) throw ConfigError("attack: steps must be >= 1");
    if (!(step_size >= 0.0)) throw ConfigError("attack: step size must be >= 0");
    if (!(alpha > 0.0)) throw ConfigError("attack: alpha must be > 0");
    if (max_iters < 1) throw ConfigError("attack: max iterations must be >= 1");
    if (!(cw_step_size > 0.0)) throw ConfigError("attack: cw step size must be > 0");
    if (!(temperature > 0.0)) throw ConfigError("attack: temperature must be > 0");
    if (n_classes >= 2 && !(lambda > 1.0 / n_classes && lambda <= 1.0)) {
        throw ConfigError("attack: lambda must lie in (1/n, 1]");
    }
    if (!(box_lo < box_hi)) throw ConfigError("attack: clamp box is empty");
}

AttackOutcome fgsm(const Classifier& model, const Tensor& x, const LabelDistribution& target,
                   double epsilon, double box_lo, double box_hi) {
    if (!(epsilon >= 0.0)) throw ConfigError("fgsm: epsilon must be >= 0");
    std::vector<double> g = input_gradient(model, x, target, 1.0);
    const auto& xv = x.values();
    std::vector<double> adv(xv.size());
    // targeted: step against the gradient to decrease CE toward the target
    for (std::size_t i = 0; i < xv.size(); ++i) {
        const double s = g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0);
        adv[i] = xv[i] - epsilon * s;
    }
    clamp_box(adv, box_lo, box_hi);
    Tensor adv_t = Tensor::from_values(x.shape(), adv);
    const bool success = model.predicted_class(adv_t) == target.argmax_class();
    return make_outcome(x, std::move(adv), success, 1);
}

AttackOutcome pgd(const Classifier& model, const Tensor& x, const LabelDistribution& target,
                  const AttackConfig& cfg) {
    return pgd_core(model, x, target, cfg, -1.0, /*success_is_argmax_change=*/false);
}

AttackOutcome untargeted_attack(const Classifier& model, const Tensor& x,
                                const AttackConfig& cfg) {
    const int current = model.predicted_class(x);
    const LabelDistribution label = one_hot(current, model.num_classes());
    return pgd_core(model, x, label, cfg, +1.0, /*success_is_argmax_change=*/true);
}

AttackOutcome pgd_ascend(const Classifier& model, const Tensor& x, const LabelDistribution& label,
                         const AttackConfig& cfg) {
    return pgd_core(model, x, label, cfg, +1.0, /*success_is_argmax_change=*/true);
}

DirectionalResult directional_distance(const Classifier& model, const Tensor& x, int target_class,
                                       double lambda, double temperature, double alpha, int iters,
                                       double step_size, double box_lo, double box_hi,
                                       const AttackTrace& trace) {
    const int n = model.num_classes();
    if (target_class < 1 || target_class > n) {
        throw ConfigError("directional_distance: target class out of range");
    }
    if (!(temperature > 0.0)) throw ConfigError("directional_distance: temperature must be > 0");
    if (!(alpha > 0.0)) throw ConfigError("directional_distance: alpha must be > 0");
    if (iters < 1) throw ConfigError("directional_distance: iters must be >= 1");
    const int predicted = model.predicted_class(x);
    if (predicted == target_class) {
        throw ConfigError("directional_distance: target equals the current prediction");
    }
    const LabelDistribution target =
        lambda == 1.0 ? one_hot(target_class, n) : smooth_label(target_class, n, lambda);

    const auto& xv = x.values();
    std::vector<double> adv = xv;
    bool reached = false;
    double best_distance = 0.0;
    std::vector<double> best_adv;

    for (int iter = 1; iter <= iters; ++iter) {
        // objective: alpha * CE(F(adv, T), target) + ||adv - x||_2
        Tensor adv_in = Tensor::from_values(x.shape(), adv, /*requires_grad=*/true);
        Tensor logits_t = model.logits(adv_in);
        Tensor probs = softmax_temp(logits_t, temperature);
        Tensor ce = cross_entropy_graph(probs, target);
        Tensor dist = l2_norm(sub(adv_in, Tensor::from_values(x.shape(), xv)));
        Tensor objective = add(scalar_mul(ce, alpha), dist);
        backward(objective);
        const auto& g = adv_in.grad();
        for (std::size_t i = 0; i < adv.size(); ++i) adv[i] -= step_size * g[i];
        clamp_box(adv, box_lo, box_hi);

        // success is checked at T = 1 (argmax is temperature invariant)
        Tensor adv_t = Tensor::from_values(x.shape(), adv);
        const double d = l2_dist(adv, xv);
        {
            NoGradGuard ng;
            const int now = static_cast<int>(model.logits(adv_t).argmax()) + 1;
            if (now == target_class && (!reached || d < best_distance)) {
                reached = true;
                best_distance = d;
                best_adv = adv;
            }
        }
        if (trace) trace(iter, ce.item(), dist.item(), objective.item());
    }

    DirectionalResult res;
    res.reached = reached;
    if (reached) {
        res.distance = best_distance;
        res.outcome = make_outcome(x, best_adv, true, iters);
    } else {
        res.outcome = make_outcome(x, adv, false, iters);
    }
    return res;
}

std::optional<double> min_directional_distance(const Classifier& model, const Tensor& x,
                                               const std::vector<int>& targets, double lambda,
                                               double temperature, double alpha, int iters,
                                               double step_size, double box_lo, double box_hi) {
    if (targets.empty()) throw ConfigError("min_directional_distance: empty target set");
    const int predicted = model.predicted_class(x);
    std::optional<double> best;
    bool any_valid = false;
    for (int t : targets) {
        if (t == predicted) continue;  // filtered by precondition
        any_valid = true;
        DirectionalResult r = directional_distance(model, x, t, lambda, temperature, alpha, iters,
                                                   step_size, box_lo, box_hi);
        if (r.reached && (!best || r.distance < *best)) best = r.distance;
    }
    if (!any_valid) {
        throw ConfigError("min_directional_distance: every target equals the current prediction");
    }
    return best;
}

}  // namespace miaudit
