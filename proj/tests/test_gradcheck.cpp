// Finite-difference verification of every layer's analytic gradients, and of
// a small composed residual network, at 64-bit precision.

#include <catch2/catch_amalgamated.hpp>

#include "gradcheck_common.hpp"
#include "mamr/nn/layers.hpp"
#include "mamr/nn/network.hpp"
#include "mamr/nn/spec.hpp"

using namespace mamr;
using namespace gradcheck;

namespace {
constexpr double kTol = 1e-4;
constexpr int kTrials = 20;
}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
    Rng rng(101);
    for (int trial = 0; trial < kTrials; ++trial) {
        nn::ConvSpec spec;
        spec.kh = 1 + static_cast<int>(rng.below(3));
        spec.kw = 1 + static_cast<int>(rng.below(3));
        spec.cin = 1 + static_cast<int>(rng.below(3));
        spec.cout = 1 + static_cast<int>(rng.below(3));
        spec.sw = 1 + static_cast<int>(rng.below(2));
        spec.ph = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.kh)));
        spec.pw = static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.kw)));
        const int h = spec.kh + static_cast<int>(rng.below(3));
        const int w = spec.kw + spec.sw + static_cast<int>(rng.below(4));
        spec.resolve(h, w);

        nn::Conv2d<double> conv(spec, "conv");
        conv.init(rng);
        const auto x = random_tensor(2, spec.cin, h, w, rng);
        const auto res = check_layer(conv, x, rng);
        INFO("trial " << trial << " worst " << res.worst());
        CHECK(res.worst() < kTol);
    }
}

TEST_CASE("batchnorm gradients match finite differences") {
    Rng rng(202);
    for (int trial = 0; trial < kTrials; ++trial) {
        const int c = 1 + static_cast<int>(rng.below(4));
        nn::BatchNorm<double> bn(c, "bn");
        // random affine parameters, not just the identity initialization
        std::vector<nn::Param<double>*> params;
        bn.collect(params);
        for (auto& v : params[0]->value) v = 0.5 + rng.uniform01();
        for (auto& v : params[1]->value) v = rng.normal();
        const auto x = random_tensor(3, c, 1, 4 + static_cast<int>(rng.below(4)), rng, 2.0);
        const auto res = check_layer(bn, x, rng);
        INFO("trial " << trial << " worst " << res.worst());
        CHECK(res.worst() < kTol);
    }
}

TEST_CASE("relu gradient matches finite differences") {
    Rng rng(303);
    for (int trial = 0; trial < kTrials; ++trial) {
        nn::ReLU<double> relu;
        auto x = random_tensor(2, 3, 1, 7, rng);
        // keep inputs away from the kink so central differences are valid
        for (auto& v : x.data)
            if (std::abs(v) < 1e-3) v = v < 0 ? v - 1e-3 : v + 1e-3;
        const auto res = check_layer(relu, x, rng);
        CHECK(res.worst() < kTol);
    }
}

TEST_CASE("global average pool gradient matches finite differences") {
    Rng rng(404);
    for (int trial = 0; trial < kTrials; ++trial) {
        nn::GlobalAvgPool<double> pool;
        const auto x = random_tensor(2, 1 + static_cast<int>(rng.below(4)), 1,
                                     3 + static_cast<int>(rng.below(6)), rng);
        const auto res = check_layer(pool, x, rng);
        CHECK(res.worst() < kTol);
    }
}

TEST_CASE("dense gradients match finite differences") {
    Rng rng(505);
    for (int trial = 0; trial < kTrials; ++trial) {
        const int in = 2 + static_cast<int>(rng.below(6));
        const int out = 1 + static_cast<int>(rng.below(5));
        nn::Dense<double> dense(in, out, "dense");
        dense.init(rng);
        const auto x = random_tensor(3, in, 1, 1, rng);
        const auto res = check_layer(dense, x, rng);
        CHECK(res.worst() < kTol);
    }
}

TEST_CASE("residual block gradients match finite differences") {
    Rng rng(606);
    for (int trial = 0; trial < kTrials; ++trial) {
        const bool project = trial % 2 == 1;
        const int cin = 2, cout = project ? 3 : 2;
        const int w = 8;
        nn::BlockSpec spec;
        spec.conv1 = nn::ConvSpec{.kh = 1, .kw = 3, .cin = cin, .cout = cout,
                                  .sw = project ? 2 : 1, .pw = 1};
        spec.conv1.resolve(1, w);
        spec.conv2 = nn::ConvSpec{.kh = 1, .kw = 3, .cin = cout, .cout = cout, .pw = 1};
        spec.conv2.resolve(spec.conv1.out_h, spec.conv1.out_w);
        if (project) {
            spec.projection = nn::ConvSpec{.kh = 1, .kw = 1, .cin = cin, .cout = cout, .sw = 2};
            spec.projection->resolve(1, w);
        }
        nn::ResidualBlock<double> block(spec, "block");
        block.init(rng);
        const auto x = random_tensor(2, cin, 1, w, rng);
        const auto res = check_layer(block, x, rng);
        INFO("trial " << trial << (project ? " (projection)" : "") << " worst " << res.worst());
        CHECK(res.worst() < kTol);
    }
}

TEST_CASE("softmax cross-entropy gradient matches closed form and finite differences") {
    Rng rng(707);
    for (int trial = 0; trial < kTrials; ++trial) {
        const int n = 3, classes = 2 + static_cast<int>(rng.below(5));
        auto logits = random_tensor(n, classes, 1, 1, rng, 2.0);
        std::vector<int> labels(n);
        for (auto& l : labels) l = static_cast<int>(rng.below(static_cast<std::uint64_t>(classes)));

        nn::SoftmaxXent<double> sm;
        sm.forward(logits);
        const auto analytic = sm.backward(labels);

        // closed form: (posterior - onehot) / n
        for (int ni = 0; ni < n; ++ni)
            for (int k = 0; k < classes; ++k) {
                const double expect =
                    (sm.probs.at(ni, k, 0, 0) - (labels[static_cast<std::size_t>(ni)] == k ? 1.0 : 0.0)) / n;
                CHECK(analytic.at(ni, k, 0, 0) == Catch::Approx(expect).margin(1e-12));
            }

        const auto loss = [&] {
            nn::SoftmaxXent<double> s;
            s.forward(logits);
            return s.loss(labels);
        };
        auto numeric = numeric_gradient(logits.data, loss);
        CHECK(rel_error(std::vector<double>(analytic.data.begin(), analytic.data.end()), numeric) <
              kTol);
    }
}

TEST_CASE("three-block composed network passes the finite-difference oracle") {
    Rng rng(808);
    // miniature resnet: full-height stem + one block per stage + head
    nn::NetworkSpec spec;
    spec.arch = nn::Arch::ResNet56;
    spec.input_rows = 4;
    spec.input_cols = 8;
    spec.classes = 3;
    spec.stem = nn::ConvSpec{.kh = 4, .kw = 5, .cin = 1, .cout = 2, .ph = 0, .pw = 2};
    spec.stem.resolve(4, 8);
    int h = spec.stem.out_h, w = spec.stem.out_w, ch = 2;
    const int widths[3] = {2, 3, 4};
    const int strides[3] = {1, 2, 1};
    for (int stage = 0; stage < 3; ++stage) {
        nn::BlockSpec b;
        b.conv1 = nn::ConvSpec{.kh = 1, .kw = 3, .cin = ch, .cout = widths[stage],
                               .sw = strides[stage], .pw = 1};
        b.conv1.resolve(h, w);
        b.conv2 = nn::ConvSpec{.kh = 1, .kw = 3, .cin = widths[stage], .cout = widths[stage],
                               .pw = 1};
        b.conv2.resolve(b.conv1.out_h, b.conv1.out_w);
        if (widths[stage] != ch || strides[stage] != 1) {
            b.projection = nn::ConvSpec{.kh = 1, .kw = 1, .cin = ch, .cout = widths[stage],
                                        .sw = strides[stage]};
            b.projection->resolve(h, w);
        }
        h = b.conv2.out_h;
        w = b.conv2.out_w;
        ch = widths[stage];
        spec.blocks.push_back(b);
    }
    spec.dense_in = ch;
    spec.dense_out = spec.classes;

    for (int trial = 0; trial < kTrials; ++trial) {
        nn::Network<double> net(spec, derive_seed(909, static_cast<std::uint64_t>(trial)));
        const auto x = random_tensor(2, 1, 4, 8, rng);
        std::vector<int> labels = {static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};
        const auto res = check_network(net, x, labels);
        INFO("trial " << trial << " input err " << res.input_err << " worst " << res.worst());
        CHECK(res.worst() < kTol);
    }
}
