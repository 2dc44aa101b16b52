#include "asrc/neural.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace asrc::neural;

namespace {

// Finite-difference oracle: loss(net) = sum_i v_i * out_i for a fixed v.
double probe_loss(const Mlp& net, const std::vector<double>& input,
                  const std::vector<double>& v) {
    MlpCache cache;
    std::vector<double> out;
    mlp_forward(net, input, out, cache);
    double loss = 0;
    for (std::size_t i = 0; i < out.size(); ++i) loss += v[i] * out[i];
    return loss;
}

double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0});
}

}  // namespace

TEST_CASE("activations and identity layer") {
    CHECK(sigmoid(0.0) == doctest::Approx(0.5));
    std::mt19937_64 rng(1);
    DenseLayer layer = make_layer(2, 2, Activation::Identity, rng);
    layer.w = {1, 0, 0, 1};
    layer.b = {0, 0};
    std::vector<double> y;
    LayerCache cache;
    layer_forward(layer, std::vector<double>{0.3, -0.7}, y, cache);
    CHECK(y[0] == 0.3);
    CHECK(y[1] == -0.7);

    layer.act = Activation::ReLU;
    layer_forward(layer, std::vector<double>{-1.0, 2.0}, y, cache);
    CHECK(y[0] == 0.0);
    CHECK(y[1] == 2.0);
}

TEST_CASE("linear layer gradient is the outer product") {
    std::mt19937_64 rng(7);
    DenseLayer layer = make_layer(3, 2, Activation::Identity, rng);
    const std::vector<double> x = {0.5, -1.5};
    const std::vector<double> v = {1.0, 2.0, -3.0};
    std::vector<double> y, dx;
    LayerCache cache;
    layer_forward(layer, x, y, cache);
    LayerGrads grads;
    grads.match(layer);
    layer_backward(layer, cache, v, grads, dx);
    for (int o = 0; o < 3; ++o) {
        for (int i = 0; i < 2; ++i) CHECK(grads.w[o * 2 + i] == doctest::Approx(v[o] * x[i]));
        CHECK(grads.b[o] == doctest::Approx(v[o]));
    }
}

TEST_CASE("relu blocks gradient at negative pre-activations") {
    std::mt19937_64 rng(3);
    DenseLayer layer = make_layer(1, 1, Activation::ReLU, rng);
    layer.w = {1.0};
    layer.b = {-2.0};  // pre-activation negative for small inputs
    std::vector<double> y, dx;
    LayerCache cache;
    layer_forward(layer, std::vector<double>{1.0}, y, cache);
    CHECK(y[0] == 0.0);
    LayerGrads grads;
    grads.match(layer);
    layer_backward(layer, cache, std::vector<double>{5.0}, grads, dx);
    CHECK(grads.w[0] == 0.0);
    CHECK(grads.b[0] == 0.0);
    CHECK(dx[0] == 0.0);
}

TEST_CASE("backward matches central finite differences on random nets") {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    const double h = 1e-6;
    for (int trial = 0; trial < 10; ++trial) {
        const int in = 2 + trial % 4;
        const int hidden = 3 + trial % 5;
        const int out = 1 + trial % 3;
        Mlp net;
        net.push_back(make_layer(hidden, in, Activation::ReLU, rng));
        net.push_back(make_layer(hidden, hidden,
                                 trial % 2 == 0 ? Activation::Sigmoid : Activation::ReLU, rng));
        net.push_back(make_layer(out, hidden, Activation::Identity, rng));
        // random biases keep every pre-activation away from the ReLU kink
        for (auto& layer : net)
            for (auto& b : layer.b) b = unit(rng);

        std::vector<double> input(in), v(out);
        for (auto& xi : input) xi = unit(rng);
        for (auto& vi : v) vi = unit(rng);

        MlpCache cache;
        std::vector<double> outv, dx;
        mlp_forward(net, input, outv, cache);
        MlpGrads grads = make_grads(net);
        mlp_backward(net, cache, v, grads, dx);

        double worst = 0;
        for (std::size_t l = 0; l < net.size(); ++l) {
            auto check_param = [&](double& p, double analytic) {
                const double saved = p;
                p = saved + h;
                const double lp = probe_loss(net, input, v);
                p = saved - h;
                const double lm = probe_loss(net, input, v);
                p = saved;
                worst = std::max(worst, rel_err((lp - lm) / (2 * h), analytic));
            };
            for (std::size_t k = 0; k < net[l].w.size(); ++k)
                check_param(net[l].w[k], grads[l].w[k]);
            for (std::size_t k = 0; k < net[l].b.size(); ++k)
                check_param(net[l].b[k], grads[l].b[k]);
        }
        CHECK(worst < 1e-5);
    }
}

TEST_CASE("bias-corrected first Adam step has magnitude lr") {
    std::vector<double> w = {0.0};
    std::vector<double> g = {1.0};
    AdamParams hp;
    hp.lr = 0.002;
    hp.decay = 1.0;
    Adam adam({1}, hp);
    adam.step({std::span<double>(w)}, {std::span<const double>(g)}, 0);
    CHECK(w[0] == doctest::Approx(-0.002).epsilon(1e-7));
}

TEST_CASE("zero gradient from a fresh state leaves parameters unchanged") {
    std::vector<double> w = {1.25};
    std::vector<double> g = {0.0};
    Adam adam({1}, AdamParams{});
    adam.step({std::span<double>(w)}, {std::span<const double>(g)}, 0);
    adam.step({std::span<double>(w)}, {std::span<const double>(g)}, 0);
    CHECK(w[0] == 1.25);
}

TEST_CASE("adam with beta1=beta2=0 and decay 1 reduces to sign-scaled SGD") {
    AdamParams hp;
    hp.beta1 = 0;
    hp.beta2 = 0;
    hp.decay = 1.0;
    hp.lr = 0.01;
    std::vector<double> w = {0.5};
    std::vector<double> g = {-0.3};
    Adam adam({1}, hp);
    adam.step({std::span<double>(w)}, {std::span<const double>(g)}, 3);
    const double expected = 0.5 - hp.lr * (-0.3) / (std::sqrt(0.09) + hp.eps);
    CHECK(w[0] == doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("learning rate decays per epoch") {
    AdamParams hp;
    hp.lr = 0.1;
    hp.decay = 0.5;
    hp.beta1 = 0;
    hp.beta2 = 0;
    std::vector<double> w = {0.0};
    std::vector<double> g = {1.0};
    Adam adam({1}, hp);
    adam.step({std::span<double>(w)}, {std::span<const double>(g)}, 2);
    CHECK(w[0] == doctest::Approx(-0.1 * 0.25).epsilon(1e-7));
}

TEST_CASE("parameter counts") {
    std::mt19937_64 rng(1);
    Mlp net;
    net.push_back(make_layer(128, 16, Activation::ReLU, rng));
    net.push_back(make_layer(16, 128, Activation::Identity, rng));
    CHECK(count_parameters(net) == 4240);
    net.push_back(make_layer(32, 128, Activation::Identity, rng));
    CHECK(count_parameters(net) == 4240 + 4128);
}

TEST_CASE("initialization is deterministic per seed") {
    std::mt19937_64 a(9), b(9), c(10);
    const DenseLayer la = make_layer(4, 3, Activation::ReLU, a);
    const DenseLayer lb = make_layer(4, 3, Activation::ReLU, b);
    const DenseLayer lc = make_layer(4, 3, Activation::ReLU, c);
    CHECK(la.w == lb.w);
    CHECK(la.w != lc.w);
    for (double b0 : la.b) CHECK(b0 == 0.0);
}

TEST_CASE("network block round-trips exactly") {
    std::mt19937_64 rng(5);
    Mlp net;
    net.push_back(make_layer(5, 3, Activation::ReLU, rng));
    net.push_back(make_layer(2, 5, Activation::Sigmoid, rng));
    std::stringstream ss;
    write_mlp(ss, net);
    const Mlp back = read_mlp(ss);
    REQUIRE(back.size() == net.size());
    for (std::size_t l = 0; l < net.size(); ++l) {
        CHECK(back[l].w == net[l].w);
        CHECK(back[l].b == net[l].b);
        CHECK(back[l].act == net[l].act);
        CHECK(back[l].out == net[l].out);
        CHECK(back[l].in == net[l].in);
    }
}
