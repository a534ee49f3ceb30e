#include <doctest.h>

#include <algorithm>
#include <limits>
#include <vector>

#include "oracles.hpp"
#include "sparsebound/autodiff.hpp"
#include "sparsebound/simd.hpp"
#include "sparsebound/tensor.hpp"
#include "sparsebound/verify.hpp"

using namespace sparsebound;

namespace {

/// 2-layer shared 1-D conv net on a 1x8 input: kernel size 2, stride 2.
ArchGraph conv_1d_net(std::size_t hidden_channels) {
    LayerSpec conv;
    conv.kernel = {1, 2};
    conv.stride = {1, 2};
    conv.out_channels = hidden_channels;
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = 1;
    return conv_arch({1, 1, 8}, {conv, fc}, true);
}

}  // namespace

TEST_CASE("all-zero weights give zero output") {
    Rng rng(3);
    const ArchGraph g = random_dag(rng, RandomDagSpec{});
    const WeightSet w = WeightSet::zeros_like(g);
    const Tensor x = oracles::random_input(g, rng);
    const Tensor out = forward(g, w, x);
    for (double v : out.data) CHECK(v == 0.0);
}

TEST_CASE("identity chain passes positive input through") {
    // 1-channel chain of depth 3, each layer a single neuron with weight 1
    const ArchGraph g = build_dag({1, 1, 1, 1}, {1, 1, 1, 1}, {{{0}}, {{0}}, {{0}}}, false);
    WeightSet w = WeightSet::zeros_like(g);
    for (auto& layer : w.layers) layer[0].a[0] = 1.0;
    Tensor x({1, 1});
    x.data[0] = 2.5;
    CHECK(forward(g, w, x).data[0] == doctest::Approx(2.5));
}

TEST_CASE("non-finite input rejected") {
    const ArchGraph g = build_dag({1, 1}, {1, 1}, {{{0}}}, false);
    WeightSet w = WeightSet::zeros_like(g);
    Tensor x({1, 1});
    x.data[0] = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(forward(g, w, x), std::invalid_argument);
}

TEST_CASE("shared conv forward equals explicit Toeplitz forward") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t h = 1 + rng.bounded(3);
        const ArchGraph g = conv_1d_net(h);
        WeightSet w = oracles::random_weights(g, rng);
        const Tensor x = oracles::random_input(g, rng);

        // Toeplitz route: stack the shared kernel along the diagonal blocks,
        // apply ReLU between stages, then the dense head.
        const Matrix& kernel = w.layers[0][0];  // h x 2
        const Matrix& head = w.layers[1][0];    // 1 x (h*4)
        std::vector<double> hidden(4 * h, 0.0);
        for (std::size_t block = 0; block < 4; ++block)
            for (std::size_t r = 0; r < h; ++r)
                for (std::size_t t = 0; t < 2; ++t)
                    hidden[block * h + r] += kernel.at(r, t) * x.data[2 * block + t];
        for (double& v : hidden) v = std::max(0.0, v);
        double expect = 0.0;
        for (std::size_t t = 0; t < 4 * h; ++t) expect += head.a[t] * hidden[t];

        const Tensor out = forward(g, w, x);
        CHECK(out.data[0] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("forward on a shared graph equals the unshared copy") {
    LayerSpec conv;
    conv.kernel = {2, 2};
    conv.stride = {2, 2};
    conv.out_channels = 3;
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = 2;
    const ArchGraph gs = conv_arch({1, 4, 4}, {conv, fc}, true);
    const ArchGraph gu = conv_arch({1, 4, 4}, {conv, fc}, false);

    Rng rng(5);
    WeightSet ws = oracles::random_weights(gs, rng);
    WeightSet wu = WeightSet::zeros_like(gu);
    for (std::size_t l = 0; l < wu.layers.size(); ++l)
        for (auto& m : wu.layers[l])
            if (!m.a.empty()) m = ws.layers[l][0];

    const Tensor x = oracles::random_input(gs, rng);
    const Tensor a = forward(gs, ws, x);
    const Tensor b = forward(gu, wu, x);
    for (std::size_t r = 0; r < a.numel(); ++r)
        CHECK(a.data[r] == doctest::Approx(b.data[r]).epsilon(1e-12));
}

TEST_CASE("zero upstream gradient gives zero weight gradient") {
    Rng rng(23);
    const ArchGraph g = random_dag(rng, RandomDagSpec{});
    const WeightSet w = oracles::random_weights(g, rng);
    ActivationTrace trace;
    const Tensor x = oracles::random_input(g, rng);
    forward(g, w, x, &trace);
    const WeightSet grad = backward(g, w, trace, std::vector<double>(g.channels(g.depth()), 0.0));
    CHECK(oracles::weightset_norm(grad) == 0.0);
}

TEST_CASE("one-layer linear net: MSE gradient matches the closed form") {
    // f(x) = W x with W 2x3; batch of 4; loss = mean_b ||W x_b - y_b||^2
    const ArchGraph g = build_dag({1, 1}, {3, 2}, {{{0}}}, false);
    Rng rng(31);
    WeightSet w = oracles::random_weights(g, rng);
    const std::size_t batch = 4;
    std::vector<Tensor> xs;
    std::vector<std::vector<double>> ys;
    for (std::size_t b = 0; b < batch; ++b) {
        xs.push_back(oracles::random_input(g, rng));
        ys.push_back({rng.uniform(-1, 1), rng.uniform(-1, 1)});
    }

    WeightSet grad = WeightSet::zeros_like(g);
    ActivationTrace trace;
    for (std::size_t b = 0; b < batch; ++b) {
        const Tensor out = forward(g, w, xs[b], &trace);
        std::vector<double> upstream(2);
        for (int r = 0; r < 2; ++r) upstream[r] = 2.0 * (out.data[r] - ys[b][r]) / batch;
        backward_accumulate(g, w, trace, upstream.data(), grad);
    }

    // closed form: grad = (2/B) sum_b (W x_b - y_b) x_b^T
    const Matrix& W = w.layers[0][0];
    for (int r = 0; r < 2; ++r) {
        for (int c = 0; c < 3; ++c) {
            double expect = 0.0;
            for (std::size_t b = 0; b < batch; ++b) {
                double wx = 0.0;
                for (int t = 0; t < 3; ++t) wx += W.at(r, t) * xs[b].data[t];
                expect += 2.0 * (wx - ys[b][r]) * xs[b].data[c] / batch;
            }
            CHECK(grad.layers[0][0].at(r, c) == doctest::Approx(expect).epsilon(1e-12));
        }
    }
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(41);
    RandomDagSpec spec;
    spec.max_depth = 3;
    spec.max_width = 5;
    spec.max_pred = 3;
    spec.max_channels = 2;
    int done = 0;
    while (done < 20) {
        const ArchGraph g = random_dag(rng, spec);
        const WeightSet w = oracles::random_weights(g, rng);
        const Tensor x = oracles::random_input(g, rng);

        // keep a safe margin from ReLU kinks so finite differences are valid
        ActivationTrace trace;
        forward(g, w, x, &trace);
        bool near_kink = false;
        for (std::size_t l = 1; l < g.depth(); ++l)
            for (double v : trace.z[l])
                if (std::abs(v) < 1e-4) near_kink = true;
        if (near_kink) continue;

        const std::size_t k = g.channels(g.depth());
        std::vector<double> upstream(k);
        for (double& u : upstream) u = rng.uniform(-1.0, 1.0);

        const WeightSet analytic = backward(g, w, trace, upstream);
        auto scalar_loss = [&](const WeightSet& wt) {
            const Tensor out = forward(g, wt, x);
            double acc = 0.0;
            for (std::size_t r = 0; r < k; ++r) acc += upstream[r] * out.data[r];
            return acc;
        };
        const WeightSet numeric = oracles::finite_difference_grad(g, w, scalar_loss, 1e-6);

        const double rel = oracles::weightset_diff_norm(analytic, numeric) /
                           std::max(1e-12, oracles::weightset_norm(analytic));
        CHECK(rel <= 1e-5);
        ++done;
    }
}

TEST_CASE("positive homogeneity in each layer's weights") {
    Rng rng(53);
    RandomDagSpec spec;
    spec.max_depth = 3;
    spec.max_width = 5;
    spec.max_channels = 2;
    for (int t = 0; t < 10; ++t) {
        const ArchGraph g = random_dag(rng, spec);
        WeightSet w = oracles::random_weights(g, rng);
        const Tensor x = oracles::random_input(g, rng);
        const Tensor base = forward(g, w, x);

        const std::size_t layer = rng.bounded(g.depth());
        const double c = 0.3 + rng.uniform() * 2.0;
        for (auto& m : w.layers[layer]) simd::scale(m.a.data(), c, m.a.size());
        const Tensor scaled = forward(g, w, x);
        for (std::size_t r = 0; r < base.numel(); ++r)
            CHECK(scaled.data[r] == doctest::Approx(c * base.data[r]).epsilon(1e-10));
    }
}

TEST_CASE("no biases: f(a x) = a f(x) for a > 0") {
    Rng rng(61);
    const ArchGraph g = random_dag(rng, RandomDagSpec{});
    const WeightSet w = oracles::random_weights(g, rng);
    Tensor x = oracles::random_input(g, rng);
    const Tensor base = forward(g, w, x);
    const double a = 1.7;
    for (double& v : x.data) v *= a;
    const Tensor scaled = forward(g, w, x);
    for (std::size_t r = 0; r < base.numel(); ++r)
        CHECK(scaled.data[r] == doctest::Approx(a * base.data[r]).epsilon(1e-10));
}

TEST_CASE("relu and mse fixtures") {
    Tensor t({2});
    t.data = {-1.0, 2.0};
    const Tensor r = relu(t);
    CHECK(r.data[0] == 0.0);
    CHECK(r.data[1] == 2.0);

    Tensor logits({1, 2}), target({1, 2});
    logits.data = {1.0, 0.0};
    target.data = {0.0, 1.0};  // one-hot class 2
    // sum over dimensions, mean over batch
    CHECK(mse_loss(logits, target) == doctest::Approx(2.0));
    CHECK(mse_loss(target, target) == 0.0);
}
