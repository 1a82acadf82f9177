#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "helpers.hpp"

using namespace mtnet;
using testutil::rand_tensor;

TEST_CASE("tensor construction and accessors") {
    auto t = Tensor<float>::from({2, 3}, {1, 2, 3, 4, 5, 6});
    CHECK(t.rank() == 2);
    CHECK(t.numel() == 6);
    CHECK(t.dim(1) == 3);
    CHECK(t.values()[4] == 5.0f);
    CHECK_THROWS(Tensor<float>::from({2, 2}, {1, 2, 3}));
    CHECK_THROWS(Tensor<float>::from({-1}, {}));

    auto s = Tensor<float>::scalar(4.0f);
    CHECK(s.item() == 4.0f);
    CHECK_THROWS(t.item());
}

TEST_CASE("backward on a diamond graph accumulates both paths") {
    // y = x*x + x, dy/dx = 2x + 1
    auto x = Tensor<double>::from({3}, {1.0, -2.0, 0.5});
    x.set_requires_grad(true);
    auto y = sum_all(add(mul(x, x), x));
    backward(y);
    CHECK(x.grad()[0] == doctest::Approx(3.0));
    CHECK(x.grad()[1] == doctest::Approx(-3.0));
    CHECK(x.grad()[2] == doctest::Approx(2.0));
}

TEST_CASE("backward requires a scalar loss and runs once per graph") {
    auto x = Tensor<double>::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    auto y = mul(x, x);
    CHECK_THROWS_WITH_AS(backward(y), doctest::Contains("scalar"), std::runtime_error);

    auto l = sum_all(y);
    backward(l);
    CHECK_THROWS_WITH_AS(backward(l), doctest::Contains("already run"), std::runtime_error);
}

TEST_CASE("grads accumulate across graphs until zeroed") {
    auto x = Tensor<double>::from({2}, {3.0, 4.0});
    x.set_requires_grad(true);
    auto l1 = sum_all(x);
    backward(l1);
    auto l2 = sum_all(x);
    backward(l2);
    CHECK(x.grad()[0] == doctest::Approx(2.0));
    x.zero_grad();
    CHECK(x.grad()[0] == 0.0);
}

TEST_CASE("detach cuts the graph") {
    auto x = Tensor<double>::from({2}, {1.0, 2.0});
    x.set_requires_grad(true);
    auto d = mul(x, x).detach();
    CHECK_FALSE(d.requires_grad());
    auto l = sum_all(d);
    CHECK_FALSE(l.requires_grad());
}

TEST_CASE("non-finite values are flagged when checking is on") {
    debug_finite_checks() = true;
    auto x = Tensor<double>::from({1}, {-1.0});
    CHECK_THROWS_WITH_AS(rsqrt(x), doctest::Contains("non-finite"), std::runtime_error);
    debug_finite_checks() = false;
    CHECK_NOTHROW(rsqrt(x));  // silently NaN with checks off
}

TEST_CASE("deep chain backward does not overflow the stack") {
    auto x = Tensor<double>::from({4}, {0.1, 0.2, 0.3, 0.4});
    x.set_requires_grad(true);
    Tensor<double> y = x;
    for (int i = 0; i < 20000; ++i) y = scale(y, 1.0);
    auto l = sum_all(y);
    backward(l);
    CHECK(x.grad()[0] == doctest::Approx(1.0));
}

TEST_CASE("finite differences on a composite expression in 64-bit mode") {
    Rng rng(42);
    auto a = rand_tensor<double>(rng, {3, 4});
    auto b = rand_tensor<double>(rng, {3, 4});
    auto fn = [&]() {
        return mean_all(mul(sigmoid(a), add(relu(b), mul(a, b))));
    };
    auto res = testutil::check_gradients(fn, {a, b}, rng, 6);
    CHECK(res.checked == 12);
    CHECK(res.max_rel_err < 1e-6);
}
