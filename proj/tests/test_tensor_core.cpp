#include <doctest.h>

#include <array>
#include <cmath>

#include "fusiform/graph.hpp"
#include "fusiform/optim.hpp"
#include "gradient_suite.hpp"
#include "test_util.hpp"

using namespace fusiform;
using fusiform::testing::random_tensor;

TEST_CASE("conv2d: 1x1 identity kernel reproduces the input")
{
    Rng rng(1);
    Graph<float> g;
    auto x = g.input(random_tensor<float>({2, 3, 4, 5}, rng));
    Tensor k({3, 3, 1, 1});
    for (std::size_t c = 0; c < 3; ++c) k.at(c, c, 0, 0) = 1.0f;
    auto y = conv2d(x, g.input(k), 1, 0);
    CHECK(y.value() == x.value());
}

TEST_CASE("conv2d: all-ones 3x3 kernel on all-ones 3x3 input sums to 9")
{
    Graph<double> g;
    auto y = conv2d(g.input(TensorD({1, 1, 3, 3}, 1.0)), g.input(TensorD({1, 1, 3, 3}, 1.0)), 1, 0);
    REQUIRE(y.shape() == Shape{1, 1, 1, 1});
    CHECK(y.value()[0] == 9.0);
}

TEST_CASE("conv2d: output geometry and shape errors")
{
    Graph<float> g;
    auto x = g.input(Tensor({1, 3, 32, 32}));
    CHECK(conv2d(x, g.input(Tensor({8, 3, 3, 3})), 2, 1).shape() == Shape{1, 8, 16, 16});
    CHECK(conv2d(x, g.input(Tensor({8, 3, 5, 5})), 1, 0).shape() == Shape{1, 8, 28, 28});
    try {
        conv2d(x, g.input(Tensor({8, 4, 3, 3})), 1, 1);
        FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("[1,3,32,32]") != std::string::npos);
        CHECK(msg.find("[8,4,3,3]") != std::string::npos);
    }
    CHECK_THROWS_AS(conv2d(x, g.input(Tensor({8, 3, 3, 3})), 0, 1), UsageError);
}

TEST_CASE("conv_transpose2d: stride 1 unit kernel is the identity")
{
    Rng rng(2);
    Graph<float> g;
    auto x = g.input(random_tensor<float>({1, 2, 3, 3}, rng));
    Tensor k({2, 2, 1, 1});
    k.at(0, 0, 0, 0) = 1.0f;
    k.at(1, 1, 0, 0) = 1.0f;
    CHECK(conv_transpose2d(x, g.input(k), 1, 0).value() == x.value());
}

TEST_CASE("conv_transpose2d: geometry (H-1)*s - 2p + K")
{
    Graph<float> g;
    auto y = conv_transpose2d(g.input(Tensor({2, 4, 4, 4})), g.input(Tensor({4, 3, 4, 4})), 2, 1);
    CHECK(y.shape() == Shape{2, 3, 8, 8});
}

TEST_CASE("conv_transpose2d equals the conv2d input gradient")
{
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        Rng rng(seed);
        const TensorD w = random_tensor({3, 2, 4, 4}, rng);
        const TensorD upstream = random_tensor({2, 3, 4, 4}, rng);
        Graph<double> g;
        auto x = g.input(TensorD({2, 2, 8, 8}), true);
        auto y = conv2d(x, g.input(w), 2, 1);
        REQUIRE(y.shape() == upstream.shape());
        g.backward(sum(mul(y, g.input(upstream))));

        Graph<double> h;
        auto t = conv_transpose2d(h.input(upstream), h.input(w), 2, 1);
        CHECK(t.value() == g.grad(x));
    }
}

TEST_CASE("global_avg_pool values and gradient")
{
    Graph<double> g;
    auto c = global_avg_pool(g.input(TensorD({1, 2, 3, 3}, 0.7)));
    CHECK(c.value()[0] == doctest::Approx(0.7));
    CHECK(c.value()[1] == doctest::Approx(0.7));

    auto x = g.input(TensorD({1, 1, 2, 2}, {1.0, 2.0, 3.0, 4.0}), true);
    auto p = global_avg_pool(x);
    CHECK(p.value()[0] == 2.5);
    g.backward(mul(sum(p), g.input(TensorD::scalar(3.0))));
    for (double v : g.grad(x).data()) CHECK(v == 0.75);
}

TEST_CASE("dense: identity weights and zero weights")
{
    Rng rng(3);
    Graph<float> g;
    auto x = g.input(random_tensor<float>({3, 4}, rng));
    Tensor eye({4, 4});
    for (std::size_t i = 0; i < 4; ++i) eye[i * 4 + i] = 1.0f;
    CHECK(dense(x, g.input(eye), g.input(Tensor({4}))).value() == x.value());

    Tensor bias({2}, std::vector<float>{0.25f, -1.5f});
    auto y = dense(x, g.input(Tensor({4, 2})), g.input(bias));
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(y.value()[i * 2] == 0.25f);
        CHECK(y.value()[i * 2 + 1] == -1.5f);
    }
    CHECK_THROWS_AS(dense(x, g.input(Tensor({5, 2})), g.input(bias)), ShapeError);
}

TEST_CASE("activations")
{
    Graph<float> g;
    auto s = sigmoid(g.input(Tensor({3}, std::vector<float>{0.0f, 200.0f, -200.0f})));
    CHECK(s.value()[0] == 0.5f);
    CHECK(s.value()[1] < 1.0f);
    CHECK(s.value()[2] > 0.0f);
    auto r = relu(g.input(Tensor({2}, std::vector<float>{-1.0f, 2.0f})));
    CHECK(r.value()[0] == 0.0f);
    CHECK(r.value()[1] == 2.0f);
}

TEST_CASE("mse_pixel_loss")
{
    Graph<double> g;
    auto a = g.input(TensorD({1, 2, 2}, {0.0, 1.0, 1.0, 0.0}));
    auto b = g.input(TensorD({1, 2, 2}, {1.0, 0.0, 0.0, 1.0}));
    CHECK(mse_pixel_loss(a, b).value()[0] == 1.0);
    CHECK(mse_pixel_loss(a, a).value()[0] == 0.0);
    CHECK_THROWS_AS(mse_pixel_loss(a, g.input(TensorD({1, 2, 3}))), ShapeError);

    // Channels are summed inside the norm: a 3-channel image off by 1 in every
    // channel scores 3, not 1.
    auto c = g.input(TensorD({3, 2, 2}, 1.0));
    auto z = g.input(TensorD({3, 2, 2}, 0.0));
    CHECK(mse_pixel_loss(c, z).value()[0] == 3.0);
}

TEST_CASE("mse_pixel_loss: non-negative, symmetric, zero iff equal")
{
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Rng rng(seed);
        const TensorD a = random_tensor({2, 3, 4, 4}, rng, 0.0, 1.0);
        TensorD b = random_tensor({2, 3, 4, 4}, rng, 0.0, 1.0);
        Graph<double> g;
        auto va = g.input(a), vb = g.input(b);
        const double ab = mse_pixel_loss(va, vb).value()[0];
        const double ba = mse_pixel_loss(vb, va).value()[0];
        CHECK(ab > 0.0);
        CHECK(ab == ba);
        CHECK(mse_pixel_loss(va, g.input(a)).value()[0] == 0.0);
    }
}

TEST_CASE("bce_loss")
{
    Graph<double> g;
    auto half = g.input(TensorD({1}, {0.5}));
    CHECK(bce_loss(half, g.input(TensorD({1}, {1.0}))).value()[0] == doctest::Approx(std::log(2.0)));
    CHECK(bce_loss(half, g.input(TensorD({1}, {0.0}))).value()[0] == doctest::Approx(std::log(2.0)));
    auto exact = bce_loss(g.input(TensorD({2}, {1.0, 0.0})), g.input(TensorD({2}, {1.0, 0.0})));
    CHECK(exact.value()[0] >= 0.0);
    CHECK(exact.value()[0] <= -std::log(1.0 - kBceClamp) + 1e-12);
}

TEST_CASE("backward")
{
    SUBCASE("sum gives all-ones")
    {
        Graph<double> g;
        auto x = g.input(TensorD({2, 3}, 4.0), true);
        g.backward(sum(x));
        for (double v : g.grad(x).data()) CHECK(v == 1.0);
    }
    SUBCASE("non-scalar loss is a usage error")
    {
        Graph<double> g;
        auto x = g.input(TensorD({2, 3}), true);
        CHECK_THROWS_AS(g.backward(relu(x)), UsageError);
    }
    SUBCASE("two backward calls accumulate exactly twice into parameters")
    {
        Rng rng(5);
        BasicParameter<double> w("w", random_tensor({3, 2}, rng));
        BasicParameter<double> b("b", random_tensor({2}, rng));
        Graph<double> g;
        auto loss = sum(sigmoid(dense(g.input(random_tensor({4, 3}, rng)), g.parameter(w), g.parameter(b))));
        g.backward(loss);
        const TensorD once = w.grad;
        g.backward(loss);
        for (std::size_t i = 0; i < once.size(); ++i) CHECK(w.grad[i] == 2.0 * once[i]);
    }
    SUBCASE("frozen parameters receive no gradient")
    {
        Rng rng(6);
        BasicParameter<double> w("w", random_tensor({3, 2}, rng), false);
        BasicParameter<double> b("b", random_tensor({2}, rng));
        Graph<double> g;
        auto wv = g.parameter(w);
        g.backward(sum(dense(g.input(random_tensor({4, 3}, rng)), wv, g.parameter(b))));
        for (double v : w.grad.data()) CHECK(v == 0.0);
        CHECK(g.grad(wv).empty());
        for (double v : b.grad.data()) CHECK(v == 4.0);
    }
}

TEST_CASE("finite checks flag non-finite outputs")
{
    const bool previous = finite_checks_enabled();
    set_finite_checks(true);
    Graph<double> g;
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(relu(g.input(TensorD({2}, {1.0, inf}))), std::domain_error);
    set_finite_checks(previous);
}

TEST_CASE("adam_step")
{
    SUBCASE("first step moves each weight by alpha against the gradient sign")
    {
        Rng rng(7);
        BasicParameter<double> p("p", random_tensor({10}, rng));
        for (std::size_t i = 0; i < 10; ++i) p.grad[i] = (i % 2 ? 1.0 : -1.0) * rng.uniform(0.01, 5.0);
        const TensorD before = p.value;
        AdamHyper h;
        BasicAdam<double> adam({&p}, h);
        adam.step();
        for (std::size_t i = 0; i < 10; ++i) {
            const double expected = -h.alpha * (p.grad[i] > 0 ? 1.0 : -1.0);
            CHECK(p.value[i] - before[i] == doctest::Approx(expected).epsilon(1e-6));
        }
        CHECK(adam.states()[0].t == 1);
    }
    SUBCASE("zero gradient with zero state leaves weights unchanged")
    {
        Rng rng(8);
        Parameter p("p", random_tensor<float>({6}, rng));
        const Tensor before = p.value;
        Adam adam({&p}, AdamHyper{});
        adam.step();
        CHECK(p.value == before);
    }
    SUBCASE("frozen parameters are untouched")
    {
        Parameter p("p", Tensor({4}, 1.0f), false);
        p.grad.fill(3.0f);
        Adam adam({&p}, AdamHyper{});
        for (int i = 0; i < 3; ++i) adam.step();
        CHECK(p.value == Tensor({4}, 1.0f));
        CHECK(adam.states()[0].t == 0);
    }
    SUBCASE("default step size preset")
    {
        CHECK(AdamHyper{}.alpha == 0.0001);
    }
    SUBCASE("state shape mismatch")
    {
        Parameter p("p", Tensor({4}));
        std::array<AdamState, 1> states{AdamState(Shape{5}, AdamHyper{})};
        std::array<Parameter*, 1> params{&p};
        CHECK_THROWS_AS(adam_step<float>(params, states), ShapeError);
    }
}

TEST_CASE("gradient_check: dense and conv pass, corrupted gradient fails")
{
    const auto cases = fusiform::testing::layer_gradient_cases();
    for (const auto& c : cases) {
        for (std::uint64_t seed = 0; seed < 3; ++seed) {
            CAPTURE(c.name);
            CAPTURE(seed);
            const auto r64 = c.run(seed, false);
            CHECK(r64.passed);
            CHECK(r64.max_rel_error < 1e-6);
            const auto r32 = c.run(seed, true);
            CHECK(r32.passed);
            CHECK(r32.max_rel_error < 1e-3);
        }
    }

    // Negative control: an op whose recorded backward is off by 10%.
    auto broken = [](auto& g, const auto& v) {
        using G = std::decay_t<decltype(g)>;
        using U = typename G::value_type;
        auto x = v[0];
        auto out = x.value();
        for (auto& e : out.data()) e = e * e;
        return g.record(out, {x.id}, [x](G& gg, std::size_t self) {
            const auto gy = gg.grad(BasicVar<U>{&gg, self}).data();
            const auto xv = x.value().data();
            auto gx = gg.grad_mut(x.id).data();
            for (std::size_t k = 0; k < gx.size(); ++k) gx[k] += U(2.2) * xv[k] * gy[k];
        }, "broken_square");
    };
    Rng rng(9);
    const auto report = gradient_check<double>(broken, {{"x", random_tensor({5}, rng)}});
    CHECK_FALSE(report.passed);
    CHECK(report.max_rel_error > 0.05);
}
