#include <doctest.h>

#include <algorithm>
#include <set>

#include "oracles.hpp"
#include "sparsebound/arch.hpp"
#include "sparsebound/verify.hpp"

using namespace sparsebound;

namespace {

ArchGraph binary_tree(std::size_t depth) {
    // d_l = 2^(L-l), pred(l, j) = [2j, 2j+1]
    std::vector<std::size_t> widths(depth + 1);
    std::vector<std::size_t> channels(depth + 1, 1);
    for (std::size_t l = 0; l <= depth; ++l) widths[l] = std::size_t{1} << (depth - l);
    std::vector<std::vector<std::vector<std::uint32_t>>> preds(depth);
    for (std::size_t l = 1; l <= depth; ++l) {
        preds[l - 1].resize(widths[l]);
        for (std::size_t j = 0; j < widths[l]; ++j)
            preds[l - 1][j] = {static_cast<std::uint32_t>(2 * j),
                               static_cast<std::uint32_t>(2 * j + 1)};
    }
    return build_dag(widths, channels, preds, false);
}

}  // namespace

TEST_CASE("smallest legal graph") {
    const ArchGraph g = build_dag({1, 1}, {1, 1}, {{{0}}}, false);
    CHECK(g.depth() == 1);
    CHECK(degree(g) == 1);
    CHECK(max_path_pred_product(g).value == 1.0);
}

TEST_CASE("binary tree: degree 2 and path product 2^L") {
    for (std::size_t L : {1u, 3u, 5u}) {
        const ArchGraph g = binary_tree(L);
        CHECK(degree(g) == 2);
        CHECK(max_path_pred_product(g).value == doctest::Approx(std::pow(2.0, L)));
    }
}

TEST_CASE("build_dag rejects malformed graphs") {
    CHECK_THROWS_AS(build_dag({4, 1}, {1, 1}, {{{5}}}, false), ArchError);     // out of range
    CHECK_THROWS_AS(build_dag({4, 1}, {1, 1}, {{{}}}, false), ArchError);      // empty pred
    CHECK_THROWS_AS(build_dag({4, 1}, {1, 1}, {{{1, 1}}}, false), ArchError);  // duplicate
    CHECK_THROWS_AS(build_dag({2, 2}, {1, 1}, {{{0}, {1}}}, false), ArchError);  // d_L != 1
    // shared layer with heterogeneous |pred|
    CHECK_THROWS_AS(build_dag({3, 2, 1}, {1, 1, 1}, {{{0, 1}, {2}}, {{0, 1}}}, true), ArchError);
    // dead neuron without the override
    CHECK_THROWS_AS(build_dag({2, 1}, {1, 1}, {{{0}}}, false), ArchError);
    const ArchGraph pruned = build_dag({2, 1}, {1, 1}, {{{0}}}, false, BuildOptions{true});
    CHECK(pruned.dead_real_nodes() == 1);
}

TEST_CASE("conv_arch window arithmetic") {
    SUBCASE("1x4x4 input, 2x2 stride-2 conv: four neurons of window size 4") {
        LayerSpec conv;
        conv.kernel = {2, 2};
        conv.stride = {2, 2};
        conv.out_channels = 3;
        LayerSpec fc;
        fc.kind = LayerSpec::Kind::fully_connected;
        fc.out_channels = 1;
        const ArchGraph g = conv_arch({1, 4, 4}, {conv, fc}, true);
        CHECK(g.real_width(1) == 4);
        for (std::size_t j = 0; j < g.width(1); ++j) CHECK(g.pred_size(1, j) == 4);
        // non-overlapping stride: pred lists partition the input
        std::set<std::uint32_t> seen;
        std::size_t total = 0;
        for (std::size_t j = 0; j < g.width(1); ++j) {
            for (auto p : g.pred(1, j)) seen.insert(p);
            total += g.pred_size(1, j);
        }
        CHECK(seen.size() == total);
        CHECK(seen.size() == 16);
    }

    SUBCASE("28x28 through two 2x2 stride-2 convs: 14 then 7") {
        LayerSpec conv;
        conv.kernel = {2, 2};
        conv.stride = {2, 2};
        conv.out_channels = 4;
        LayerSpec fc;
        fc.kind = LayerSpec::Kind::fully_connected;
        fc.out_channels = 2;
        const ArchGraph g = conv_arch({1, 28, 28}, {conv, conv, fc}, true);
        CHECK(g.grid_dims()[1][0] == 14);
        CHECK(g.grid_dims()[2][0] == 7);
    }

    SUBCASE("3x32x32 with 3x3 stride-2: 15x15 grid, window 9") {
        LayerSpec conv;
        conv.kernel = {3, 3};
        conv.stride = {2, 2};
        conv.out_channels = 8;
        LayerSpec fc;
        fc.kind = LayerSpec::Kind::fully_connected;
        fc.out_channels = 2;
        // the full stack 32 -> 15 -> 7 -> 3 -> 1 leaves a 1x1 grid for the head
        const ArchGraph g =
            conv_arch({3, 32, 32}, {conv, conv, conv, conv, fc}, true, BuildOptions{true});
        CHECK(g.grid_dims()[1][0] == 15);
        CHECK(g.grid_dims()[1][1] == 15);
        // window-enumeration oracle over all output positions
        for (std::size_t r = 0; r < 15; ++r) {
            for (std::size_t c = 0; c < 15; ++c) {
                const auto& pred = g.pred(1, r * 15 + c);
                REQUIRE(pred.size() == 9);
                std::set<std::uint32_t> expect;
                for (std::size_t u = 0; u < 3; ++u)
                    for (std::size_t v = 0; v < 3; ++v)
                        expect.insert(static_cast<std::uint32_t>((2 * r + u) * 32 + (2 * c + v)));
                CHECK(std::set<std::uint32_t>(pred.begin(), pred.end()) == expect);
            }
        }
        CHECK(degree(g) == 9);
    }

    SUBCASE("spatial collapse rejected") {
        LayerSpec conv;
        conv.kernel = {5, 5};
        conv.stride = {1, 1};
        conv.out_channels = 2;
        LayerSpec fc;
        fc.kind = LayerSpec::Kind::fully_connected;
        fc.out_channels = 1;
        CHECK_THROWS_AS(conv_arch({1, 4, 4}, {conv, fc}, true), ArchError);
    }
}

TEST_CASE("padding materializes constant-zero ring nodes") {
    LayerSpec first;
    first.kernel = {2, 2};
    first.stride = {2, 2};
    first.out_channels = 2;
    LayerSpec padded;
    padded.kernel = {3, 3};
    padded.stride = {1, 1};
    padded.padding = {1, 1};
    padded.out_channels = 2;
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = 1;
    const ArchGraph g = conv_arch({1, 8, 8}, {first, padded, fc}, true);

    // grid 1 is 4x4 real with a 1-wide ring of zero nodes
    CHECK(g.real_width(1) == 16);
    CHECK(g.width(1) == 36);
    CHECK(g.zero_count(1) == 20);
    // every real neuron of the padded layer still sees a full 3x3 window
    for (std::size_t j = 0; j < g.width(2); ++j)
        if (!g.is_zero(2, j)) CHECK(g.pred_size(2, j) == 9);
    CHECK(g.real_width(2) == 16);
    CHECK(g.zero_count(2) == 0);
}

TEST_CASE("degree equals an exhaustive pred-list scan") {
    Rng rng(42);
    RandomDagSpec spec;
    spec.max_depth = 4;
    spec.max_width = 10;
    spec.max_pred = 6;
    for (int t = 0; t < 25; ++t) {
        const ArchGraph g = random_dag(rng, spec);
        std::size_t scan = 0;
        for (std::size_t l = 1; l <= g.depth(); ++l)
            for (std::size_t j = 0; j < g.width(l); ++j)
                scan = std::max(scan, g.pred(l, j).size());
        CHECK(degree(g) == scan);
    }
}

TEST_CASE("path product DP equals exhaustive enumeration") {
    Rng rng(7);
    RandomDagSpec spec;
    spec.max_depth = 4;
    spec.max_width = 8;
    spec.max_pred = 4;
    for (int t = 0; t < 40; ++t) {
        const ArchGraph g = random_dag(rng, spec);
        const PathProduct dp = max_path_pred_product(g);
        CHECK(dp.value == doctest::Approx(oracles::brute_force_path_product(g)).epsilon(1e-12));

        std::vector<double> weights(g.width(0));
        for (double& w : weights) w = rng.uniform(0.0, 3.0);
        const PathProduct weighted = max_path_pred_product(g, &weights);
        CHECK(weighted.value ==
              doctest::Approx(oracles::brute_force_path_product(g, &weights)).epsilon(1e-12));

        // the witness path reproduces the value
        REQUIRE(weighted.path.size() == g.depth() + 1);
        double along = weights[weighted.path.back()];
        for (std::size_t t2 = 0; t2 < g.depth(); ++t2) {
            const std::size_t layer = g.depth() - t2;
            const auto& pred = g.pred(layer, weighted.path[t2]);
            along *= static_cast<double>(pred.size());
            CHECK(std::find(pred.begin(), pred.end(), weighted.path[t2 + 1]) != pred.end());
        }
        CHECK(along == doctest::Approx(weighted.value).epsilon(1e-12));
    }
}

TEST_CASE("uniform conv stacks: path product is the kernel-size product") {
    LayerSpec c2;
    c2.kernel = {2, 2};
    c2.stride = {2, 2};
    c2.out_channels = 3;
    LayerSpec c3;
    c3.kernel = {3, 3};
    c3.stride = {2, 2};
    c3.out_channels = 3;
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = 1;
    const ArchGraph g = conv_arch({1, 17, 17}, {c3, c2, fc}, true, BuildOptions{true});
    // fc consumes a multi-node grid here, so its |pred| enters the product
    const auto kernels = g.uniform_pred_sizes();
    REQUIRE(kernels.has_value());
    double prod = 1.0;
    for (std::size_t k : *kernels) prod *= static_cast<double>(k);
    CHECK(max_path_pred_product(g).value == doctest::Approx(prod));
}

TEST_CASE("parameter counts") {
    SUBCASE("single 4->2 fully-connected layer, no bias") {
        LayerSpec fc;
        fc.kind = LayerSpec::Kind::fully_connected;
        fc.out_channels = 2;
        const ArchGraph g = conv_arch({1, 2, 2}, {fc}, false);
        CHECK(parameter_count(g) == 8);
        CHECK(parameter_count(g, true) == 10);
    }

    SUBCASE("reference 5-layer model within 0.2% under the documented convention") {
        // conv stack 3->32->64->128->128 with 3x3 kernels, then the stated
        // 3200-dim flat input to the classifier head
        const std::size_t five_layer = shared_stack_parameter_count(
            3, {{9, 32}, {9, 64}, {9, 128}, {9, 128}}, {{3200, 2}});
        CHECK(five_layer == 246880);
        CHECK(std::abs(static_cast<double>(five_layer) - 246886.0) / 246886.0 < 0.002);

        const std::size_t six_layer = shared_stack_parameter_count(
            3, {{9, 32}, {9, 64}, {9, 128}, {9, 128}}, {{3200, 128}, {128, 2}});
        CHECK(six_layer == 650336);
        CHECK(std::abs(static_cast<double>(six_layer) - 650343.0) / 650343.0 < 0.002);
    }

    SUBCASE("CONV-3-H closed form vs per-edge DAG count") {
        const std::size_t H = 6;
        const ArchGraph g = conv_arch({1, 28, 28}, conv_lh_stack(3, H, 10), true);
        // two 2x2 convs then a 7x7xH fully-connected head
        CHECK(parameter_count(g) == 4 * 1 * H + 4 * H * H + H * 49 * 10);

        // per-edge enumeration oracle on the unshared variant
        const ArchGraph gu = conv_arch({1, 28, 28}, conv_lh_stack(3, H, 10), false);
        std::size_t per_edge = 0;
        for (std::size_t l = 1; l <= gu.depth(); ++l)
            for (std::size_t j = 0; j < gu.width(l); ++j)
                if (!gu.is_zero(l, j))
                    per_edge += gu.channels(l) * gu.channels(l - 1) * gu.pred_size(l, j);
        CHECK(parameter_count(gu) == per_edge);
    }

    SUBCASE("literal CONV-L-H interpretation holds L+1 parametric layers") {
        CHECK(conv_lh_stack(4, 5, 10, false).size() == 4);
        CHECK(conv_lh_stack(4, 5, 10, true).size() == 5);
    }
}

TEST_CASE("serialization round-trip is an identity") {
    Rng rng(11);
    RandomDagSpec spec;
    spec.max_depth = 3;
    spec.max_width = 6;
    for (int t = 0; t < 10; ++t) {
        const ArchGraph g = random_dag(rng, spec);
        const ArchGraph back = arch_from_json(arch_to_json(g));
        CHECK(back.depth() == g.depth());
        CHECK(back.widths() == g.widths());
        CHECK(back.channel_dims() == g.channel_dims());
        for (std::size_t l = 1; l <= g.depth(); ++l)
            for (std::size_t j = 0; j < g.width(l); ++j) CHECK(back.pred(l, j) == g.pred(l, j));
    }

    // padded conv graph keeps its zero nodes and pixel map
    LayerSpec c;
    c.kernel = {3, 3};
    c.stride = {1, 1};
    c.padding = {1, 1};
    c.out_channels = 2;
    LayerSpec first;
    first.kernel = {2, 2};
    first.stride = {2, 2};
    first.out_channels = 2;
    LayerSpec fc;
    fc.kind = LayerSpec::Kind::fully_connected;
    fc.out_channels = 1;
    const ArchGraph g = conv_arch({1, 8, 8}, {first, c, fc}, true);
    const ArchGraph back = arch_from_json(arch_to_json(g));
    CHECK(back.width(1) == g.width(1));
    CHECK(back.zero_count(1) == g.zero_count(1));
    for (std::size_t j = 0; j < g.width(0); ++j) CHECK(back.input_pixel(j) == g.input_pixel(j));
    CHECK(max_path_pred_product(back).value == max_path_pred_product(g).value);
}
