#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "miaudit/rng.hpp"
#include "miaudit/tensor.hpp"

namespace testutil {

// Relative error with a floor that keeps central-difference noise (absolute
// ~1e-9 at h = 1e-5) well below the 1e-4 acceptance bound.
inline double rel_err(double a, double b) {
    const double denom = std::max({std::fabs(a), std::fabs(b), 1e-4});
    return std::fabs(a - b) / denom;
}

inline double max_rel_err(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, rel_err(a[i], b[i]));
    return m;
}

inline miaudit::Tensor random_tensor(miaudit::Shape shape, miaudit::Rng& rng, double lo = -2.0,
                                     double hi = 2.0, bool requires_grad = false) {
    std::vector<double> v(miaudit::shape_size(shape));
    for (auto& x : v) x = rng.uniform(lo, hi);
    return miaudit::Tensor::from_values(std::move(shape), std::move(v), requires_grad);
}

// Checks autodiff of scalar_fn under perturbation of x against central
// differences; returns the max relative error over coordinates.
inline double gradcheck(const std::function<miaudit::Tensor(const miaudit::Tensor&)>& scalar_fn,
                        const miaudit::Tensor& x, double h = 1e-5) {
    miaudit::Tensor xg =
        miaudit::Tensor::from_values(x.shape(), x.values(), /*requires_grad=*/true);
    miaudit::Tensor out = scalar_fn(xg);
    miaudit::backward(out);
    const std::vector<double> autodiff = xg.grad();
    miaudit::Tensor fd = miaudit::finite_diff_gradient(
        [&](const miaudit::Tensor& xt) {
            miaudit::NoGradGuard ng;
            return scalar_fn(xt).item();
        },
        x, h);
    return max_rel_err(autodiff, fd.values());
}

}  // namespace testutil
