#include "doctest.h"

#include <cmath>

#include "miaudit/tensor.hpp"
#include "support/testutil.hpp"

using namespace miaudit;
using testutil::gradcheck;
using testutil::max_rel_err;
using testutil::random_tensor;

TEST_SUITE_BEGIN("tensor");

TEST_CASE("relu forward") {
    Tensor x = Tensor::from_values({3}, {-1.0, 0.0, 2.0});
    Tensor y = relu(x);
    CHECK(y.values() == std::vector<double>{0.0, 0.0, 2.0});
}

TEST_CASE("matmul identity leaves matrix unchanged") {
    Tensor id = Tensor::from_values({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Rng rng(7);
    Tensor a = random_tensor({3, 3}, rng);
    Tensor out = matmul(id, a);
    CHECK(out.values() == a.values());
}

TEST_CASE("l2 norm of a 3-4-5 triangle") {
    Tensor x = Tensor::from_values({2}, {3.0, 4.0});
    CHECK(l2_norm(x).item() == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("shape errors are rejected") {
    Tensor a = Tensor::from_values({2}, {1.0, 2.0});
    Tensor b = Tensor::from_values({3}, {1.0, 2.0, 3.0});
    CHECK_THROWS_AS(add(a, b), ConfigError);
    CHECK_THROWS_AS(matmul(a, b), ConfigError);
    CHECK_THROWS_AS(Tensor::from_values({2}, {1.0}), ConfigError);
    CHECK_THROWS_AS(reshape(a, {3}), ConfigError);
}

TEST_CASE("non-finite outputs raise numeric errors") {
    Tensor big = Tensor::from_values({1}, {1e308});
    CHECK_THROWS_AS(exp(big), NumericError);
    Tensor zero = Tensor::from_values({1}, {0.0});
    CHECK_THROWS_AS(log(zero), NumericError);
    CHECK_THROWS_AS(Tensor::from_values({1}, {std::nan("")}), NumericError);
}

TEST_CASE("backward of x^2 at x=3 gives 6") {
    Tensor x = Tensor::from_values({1}, {3.0}, true);
    Tensor y = mul(x, x);
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("backward of sum(w*x) gives w") {
    Tensor w = Tensor::from_values({3}, {0.5, -1.5, 2.0});
    Tensor x = Tensor::from_values({3}, {1.0, 2.0, 3.0}, true);
    Tensor y = sum(mul(w, x));
    backward(y);
    CHECK(x.grad() == w.values());
}

TEST_CASE("cross-entropy-of-softmax gradient equals softmax minus target") {
    // frozen oracle: grad(z) of CE(softmax(z), onehot) is softmax(z) - y
    Tensor z = Tensor::from_values({4}, {0.2, -1.0, 0.7, 0.1}, true);
    Tensor probs = softmax_temp(z, 1.0);
    Tensor target = Tensor::from_values({4}, {0.0, 0.0, 1.0, 0.0});
    Tensor ce = scalar_mul(sum(mul(target, log(probs))), -1.0);
    backward(ce);

    const auto& p = probs.values();
    std::vector<double> expected = {p[0], p[1], p[2] - 1.0, p[3]};
    CHECK(max_rel_err(z.grad(), expected) < 1e-10);

    // and the same gradient against the independent finite-difference oracle
    Tensor z0 = z.detached();
    const double fd_err = gradcheck(
        [&target](const Tensor& zt) {
            return scalar_mul(sum(mul(target, log(softmax_temp(zt, 1.0)))), -1.0);
        },
        z0);
    CHECK(fd_err < 1e-4);
}

TEST_CASE("finite difference oracle sanity") {
    SUBCASE("x^2 at 3") {
        Tensor x = Tensor::scalar(3.0);
        Tensor g = finite_diff_gradient([](const Tensor& t) { return t.item() * t.item(); }, x,
                                        1e-5);
        CHECK(g.item() == doctest::Approx(6.0).epsilon(1e-6));
    }
    SUBCASE("cubic polynomial against its analytic derivative") {
        // f(x) = 2x^3 - x + 1, f'(x) = 6x^2 - 1
        auto f = [](const Tensor& t) {
            const double v = t.item();
            return 2.0 * v * v * v - v + 1.0;
        };
        for (double v : {-1.5, -0.2, 0.0, 0.9, 2.0}) {
            Tensor x = Tensor::scalar(v);
            Tensor g = finite_diff_gradient(f, x, 1e-5);
            CHECK(g.item() == doctest::Approx(6.0 * v * v - 1.0).epsilon(1e-6));
        }
    }
    SUBCASE("constant function has zero gradient") {
        Tensor x = Tensor::from_values({3}, {1.0, -2.0, 0.5});
        Tensor g = finite_diff_gradient([](const Tensor&) { return 4.2; }, x, 1e-5);
        for (double v : g.values()) CHECK(v == doctest::Approx(0.0));
    }
}

TEST_CASE("per-op gradients match finite differences on random tensors") {
    Rng rng(42);
    // weighted sum reduces any op output to a scalar touching every entry
    auto reduce = [](const Tensor& t) {
        Rng local(913);
        std::vector<double> w(t.size());
        for (auto& v : w) v = local.uniform(-1.0, 1.0);
        return sum(mul(Tensor::from_values(t.shape(), w), t));
    };

    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        Tensor x = random_tensor({6}, rng);
        worst = std::max(worst, gradcheck([&](const Tensor& t) { return reduce(relu(t)); }, x));
        worst = std::max(worst, gradcheck([&](const Tensor& t) { return reduce(exp(t)); }, x));
        worst = std::max(
            worst, gradcheck([&](const Tensor& t) { return reduce(clamp(t, -0.75, 0.75)); }, x));
        worst = std::max(worst, gradcheck([&](const Tensor& t) { return l2_norm(t); }, x));
        worst = std::max(
            worst,
            gradcheck([&](const Tensor& t) { return reduce(softmax_temp(t, 0.7)); }, x));

        Tensor pos = random_tensor({6}, rng, 0.1, 2.0);
        worst = std::max(worst, gradcheck([&](const Tensor& t) { return reduce(log(t)); }, pos));

        Tensor m = random_tensor({3, 4}, rng);
        Tensor v = random_tensor({4}, rng);
        worst = std::max(
            worst, gradcheck([&](const Tensor& t) { return reduce(matmul(t, v)); }, m));
        Tensor m2 = random_tensor({4, 2}, rng);
        worst = std::max(
            worst, gradcheck([&](const Tensor& t) { return reduce(matmul(t, m2)); }, m));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("conv2d forward matches a hand-computed example") {
    // 1x3x3 input, single 2x2 kernel, valid padding
    Tensor x = Tensor::from_values({1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor k = Tensor::from_values({1, 1, 2, 2}, {1, 0, 0, -1});
    Tensor b = Tensor::from_values({1}, {0.5});
    Tensor y = conv2d(x, k, b);
    REQUIRE(y.shape() == Shape{1, 2, 2});
    // out[i][j] = x[i][j] - x[i+1][j+1] + 0.5
    CHECK(y.values() == std::vector<double>{1 - 5 + 0.5, 2 - 6 + 0.5, 4 - 8 + 0.5, 5 - 9 + 0.5});
}

TEST_CASE("conv2d same padding keeps the spatial size") {
    Rng rng(3);
    Tensor x = random_tensor({2, 5, 5}, rng);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    Tensor y = conv2d(x, k, b, /*same_padding=*/true);
    CHECK(y.shape() == Shape{3, 5, 5});
}

TEST_CASE("conv2d and max_pool2d gradients match finite differences") {
    Rng rng(11);
    Tensor k = random_tensor({3, 2, 3, 3}, rng);
    Tensor b = random_tensor({3}, rng);
    auto reduce = [](const Tensor& t) {
        Rng local(77);
        std::vector<double> w(t.size());
        for (auto& v : w) v = local.uniform(-1.0, 1.0);
        return sum(mul(Tensor::from_values(t.shape(), w), t));
    };

    double worst = 0.0;
    for (int rep = 0; rep < 5; ++rep) {
        Tensor x = random_tensor({2, 6, 6}, rng);
        worst = std::max(worst, gradcheck([&](const Tensor& t) {
                             return reduce(conv2d(t, k, b));
                         }, x));
        worst = std::max(worst, gradcheck([&](const Tensor& t) {
                             return reduce(conv2d(t, k, b, true));
                         }, x));
        worst = std::max(worst, gradcheck([&](const Tensor& t) {
                             return reduce(max_pool2d(t, 2));
                         }, x));
        // kernel and bias gradients
        worst = std::max(worst, gradcheck([&](const Tensor& t) {
                             return reduce(conv2d(x, t, b));
                         }, k));
        worst = std::max(worst, gradcheck([&](const Tensor& t) {
                             return reduce(conv2d(x, k, t));
                         }, b));
    }
    CHECK(worst <= 1e-4);
}

TEST_CASE("gradient additivity across independent subgraphs") {
    Rng rng(5);
    Tensor a = random_tensor({4}, rng, -2.0, 2.0, true);
    Tensor b = random_tensor({4}, rng, -2.0, 2.0, true);
    Tensor joint = add(sum(mul(a, a)), l2_norm(b));
    backward(joint);
    const auto ga_joint = a.grad();
    const auto gb_joint = b.grad();

    Tensor a2 = Tensor::from_values(a.shape(), a.values(), true);
    Tensor b2 = Tensor::from_values(b.shape(), b.values(), true);
    backward(sum(mul(a2, a2)));
    backward(l2_norm(b2));
    CHECK(ga_joint == a2.grad());
    CHECK(gb_joint == b2.grad());
}

TEST_CASE("forward ops are deterministic") {
    Rng rng(17);
    Tensor x = random_tensor({2, 6, 6}, rng);
    Tensor k = random_tensor({4, 2, 3, 3}, rng);
    Tensor b = random_tensor({4}, rng);
    Tensor y1 = conv2d(x, k, b);
    Tensor y2 = conv2d(x, k, b);
    CHECK(y1.values() == y2.values());
    Tensor s1 = softmax_temp(reshape(max_pool2d(y1, 2), {16}), 3.0);
    Tensor s2 = softmax_temp(reshape(max_pool2d(y2, 2), {16}), 3.0);
    CHECK(s1.values() == s2.values());
}

TEST_CASE("backward preconditions") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    Tensor y = mul(x, x);
    CHECK_THROWS_AS(backward(y), ConfigError);  // not scalar

    Tensor s = sum(y);
    backward(s);
    CHECK_THROWS_AS(backward(s), ConfigError);  // graph already consumed

    Tensor plain = Tensor::from_values({1}, {1.0});
    CHECK_THROWS_AS(backward(plain), ConfigError);  // no graph
}

TEST_CASE("no-grad guard suppresses graph recording") {
    Tensor x = Tensor::from_values({2}, {1.0, 2.0}, true);
    NoGradGuard ng;
    Tensor y = sum(mul(x, x));
    CHECK_FALSE(y.requires_grad());
}

TEST_CASE("grad accumulates across two backward passes on separate graphs") {
    Tensor x = Tensor::from_values({1}, {2.0}, true);
    backward(mul(x, x));
    CHECK(x.grad()[0] == doctest::Approx(4.0));
    backward(scalar_mul(x, 3.0));
    CHECK(x.grad()[0] == doctest::Approx(7.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_SUITE_END();
