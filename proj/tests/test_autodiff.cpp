#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "phycine/ad/grad_check.hpp"
#include "phycine/ad/ops.hpp"
#include "phycine/ad/random_graph.hpp"
#include "phycine/common/error.hpp"
#include "phycine/common/rng.hpp"

using namespace phycine;
using namespace phycine::ad;

TEST_CASE("matmul forward matches hand computation") {
    Tensor a = Tensor::of({2, 2}, {1, 2, 3, 4});
    Tensor b = Tensor::of({2, 1}, {5, 6});
    Tensor c = matmul(a, b);
    CHECK(c.shape == std::vector<int>{2, 1});
    CHECK(c.data[0] == doctest::Approx(17.0));
    CHECK(c.data[1] == doctest::Approx(39.0));
}

TEST_CASE("elementwise forward values") {
    Tensor x = Tensor::of({4}, {-1.0, 0.0, 0.5, 2.0});
    CHECK(relu(x).data == std::vector<double>{0.0, 0.0, 0.5, 2.0});
    CHECK(sigmoid(Tensor::scalar(0.0)).value() == doctest::Approx(0.5));
    CHECK(softplus(Tensor::scalar(0.0)).value() == doctest::Approx(std::log(2.0)));
    CHECK(tanh(Tensor::scalar(0.0)).value() == doctest::Approx(0.0));
}

TEST_CASE("softmax slices sum to one and logsumexp matches direct evaluation") {
    Rng rng(7);
    Tensor x = Tensor::zeros({3, 4});
    for (double& v : x.data) v = rng.uniform(-40.0, 40.0);
    for (int axis = 0; axis < 2; ++axis) {
        Tensor y = softmax(x, axis);
        const int outer = axis == 0 ? 4 : 3;
        for (int i = 0; i < outer; ++i) {
            double s = 0.0;
            for (int k = 0; k < x.shape[axis]; ++k)
                s += axis == 0 ? y.at({k, i}) : y.at({i, k});
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    Tensor lse = logsumexp(x, 1);
    for (int i = 0; i < 3; ++i) {
        double direct = 0.0;
        for (int k = 0; k < 4; ++k) direct += std::exp(x.at({i, k}) - 40.0);
        CHECK(lse.data[i] == doctest::Approx(std::log(direct) + 40.0).epsilon(1e-12));
    }
}

TEST_CASE("l2_normalize yields unit slices and honors the safe floor") {
    Tensor x = Tensor::of({2, 2}, {3.0, 4.0, 1e-12, 0.0});
    Tensor y = l2_normalize(x, 1);
    CHECK(std::hypot(y.at({0, 0}), y.at({0, 1})) == doctest::Approx(1.0).epsilon(1e-12));
    // Second row is below the floor: divided by the floor, not blown up.
    CHECK(y.at({1, 0}) == doctest::Approx(1e-12 / 1e-8));
    CHECK(y.at({1, 1}) == 0.0);
}

TEST_CASE("shape mismatches raise structured errors") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({3, 3});
    CHECK_THROWS_AS(add(a, b), Error);
    CHECK_THROWS_AS(matmul(a, a), Error);
    CHECK_THROWS_AS(slice(a, 0, 1, 5), Error);
    CHECK_THROWS_AS(softmax(a, 2), Error);
    CHECK_THROWS_AS(reshape(a, {7}), Error);
    CHECK_THROWS_AS(broadcast(a, {2, 4}), Error);
}

TEST_CASE("log rejects non-positive input") {
    CHECK_THROWS_AS(log(Tensor::scalar(0.0)), Error);
    CHECK_THROWS_AS(log(Tensor::scalar(-1.0)), Error);
}

TEST_CASE("backward touches each node once and unreached leaves read zero") {
    Tape tape;
    Tensor x = tape.watch(Tensor::of({2}, {1.0, 2.0}));
    Tensor unused = tape.watch(Tensor::of({2}, {5.0, 5.0}));
    Tensor y = sum(square(x));
    tape.backward(y);
    Tensor gx = tape.grad(x);
    CHECK(gx.data[0] == doctest::Approx(2.0));
    CHECK(gx.data[1] == doctest::Approx(4.0));
    Tensor gu = tape.grad(unused);
    CHECK(gu.data[0] == 0.0);
    CHECK(gu.data[1] == 0.0);
}

TEST_CASE("reused subexpressions accumulate gradients") {
    // y = x*x + x  =>  dy/dx = 2x + 1
    Tape tape;
    Tensor x = tape.watch(Tensor::scalar(3.0));
    Tensor y = add(mul(x, x), x);
    tape.backward(y);
    CHECK(tape.grad(x).value() == doctest::Approx(7.0));
}

TEST_CASE("backward is bitwise deterministic") {
    auto run = [](std::vector<double>& out) {
        Tape tape;
        Tensor x = tape.watch(Tensor::of({3, 3}, {0.3, -1.2, 0.7, 2.1, -0.4, 0.9, 1.5, -2.0, 0.1}));
        Tensor h = tanh(matmul(x, x));
        Tensor loss = sum(mul(softmax(h, 1), exp(scale(h, 0.5))));
        tape.backward(loss);
        out = tape.grad(x).data;
    };
    std::vector<double> g1, g2;
    run(g1);
    run(g2);
    CHECK(g1 == g2);
}

TEST_CASE("mixing two tapes in one op is rejected") {
    Tape t1, t2;
    Tensor a = t1.watch(Tensor::scalar(1.0));
    Tensor b = t2.watch(Tensor::scalar(2.0));
    CHECK_THROWS_AS(add(a, b), Error);
}

TEST_CASE("five-op composite graph matches central finite differences") {
    Tensor w = Tensor::of({2, 3}, {0.3, -0.8, 0.5, 1.2, -0.1, 0.4});
    auto f = [](Tape&, const Tensor& x) {
        Tensor h = tanh(x);
        Tensor s = softmax(h, 1);
        Tensor m = mul(s, exp(scale(x, 0.3)));
        return sum(m);
    };
    CHECK(grad_check(f, w, 1e-5) < 1e-4);
}

TEST_CASE("random graphs over the full op family pass grad check") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const double err = random_graph_grad_error(seed);
        INFO("seed ", seed, " max rel err ", err);
        CHECK(err < 1e-4);
    }
}

TEST_CASE("grad_check rejects bad arguments") {
    auto vec = [](Tape&, const Tensor& x) { return x; };
    CHECK_THROWS_AS(grad_check(vec, Tensor::zeros({2}), 1e-5), Error);
    auto ok = [](Tape&, const Tensor& x) { return sum(x); };
    CHECK_THROWS_AS(grad_check(ok, Tensor::zeros({2}), 0.0), Error);
}
