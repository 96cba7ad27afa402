#include <doctest.h>

#include <cmath>
#include <memory>

#include "bnlab/error.hpp"
#include "bnlab/nn/batchnorm.hpp"
#include "bnlab/nn/generalized_norm.hpp"
#include "bnlab/nn/layers.hpp"
#include "bnlab/nn/loss.hpp"
#include "bnlab/nn/network.hpp"
#include "bnlab/nn/sgd.hpp"
#include "support/testing.hpp"

using namespace bnlab;
using namespace bnlab::nn;
using bnlab::testing::check_gradients;
using bnlab::testing::check_layer;
using bnlab::testing::random_tensor;

namespace {

void randomize_affine(NormLayer& n, std::uint64_t seed) {
    auto& s = n.state();
    s.gamma = random_tensor(s.gamma.shape(), seed, 1);
    s.beta = random_tensor(s.beta.shape(), seed, 2);
}

}  // namespace

TEST_CASE("dense and conv layers pass finite differences") {
    DenseLayer dense(random_tensor({4, 6}, 1), random_tensor({4}, 2));
    const auto d = check_layer(dense, random_tensor({3, 6}, 3), Mode::probe, 1e-6, 4);
    CHECK_MESSAGE(d.ok(), d.first_failure);

    DenseLayer flat(random_tensor({5, 2 * 3 * 3}, 5), random_tensor({5}, 6));
    const auto f = check_layer(flat, random_tensor({2, 2, 3, 3}, 7), Mode::probe, 1e-6, 8);
    CHECK_MESSAGE(f.ok(), f.first_failure);

    Conv3x3Layer conv(random_tensor({3, 2, 3, 3}, 9));
    const auto c = check_layer(conv, random_tensor({2, 2, 4, 5}, 10), Mode::probe, 1e-6, 11);
    CHECK_MESSAGE(c.ok(), c.first_failure);
}

TEST_CASE("relu, pooling and residual blocks pass finite differences") {
    ReluLayer relu;
    const auto r = check_layer(relu, random_tensor({3, 7}, 12), Mode::probe, 1e-6, 13);
    CHECK_MESSAGE(r.ok(), r.first_failure);

    GlobalAvgPoolLayer pool;
    const auto p = check_layer(pool, random_tensor({2, 3, 4, 4}, 14), Mode::probe, 1e-6, 15);
    CHECK_MESSAGE(p.ok(), p.first_failure);

    for (bool relu_after : {true, false}) {
        std::vector<std::unique_ptr<Layer>> body;
        body.push_back(std::make_unique<Conv3x3Layer>(random_tensor({4, 2, 3, 3}, 16, 0, 0.5)));
        body.push_back(std::make_unique<ReluLayer>());
        body.push_back(std::make_unique<Conv3x3Layer>(random_tensor({4, 4, 3, 3}, 17, 0, 0.5)));
        ResidualBlock block(std::move(body), relu_after);
        const auto b = check_layer(block, random_tensor({2, 2, 3, 3}, 18), Mode::probe, 1e-6, 19);
        CHECK_MESSAGE(b.ok(), b.first_failure);
    }
}

TEST_CASE("batch norm passes finite differences under every toggle combination") {
    for (int mask = 0; mask < 16; ++mask) {
        BatchNormOptions opt;
        opt.toggles = {(mask & 1) != 0, (mask & 2) != 0, (mask & 4) != 0, (mask & 8) != 0};
        CAPTURE(mask);
        NormLayer conv_bn(3, Grouping::batch(), opt);
        randomize_affine(conv_bn, 20 + mask);
        const auto c = check_layer(conv_bn, random_tensor({2, 3, 2, 3}, 40 + mask), Mode::probe, 1e-6, 60 + mask);
        CHECK_MESSAGE(c.ok(), c.first_failure);

        NormLayer dense_bn(4, Grouping::batch(), opt);
        randomize_affine(dense_bn, 80 + mask);
        const auto d = check_layer(dense_bn, random_tensor({5, 4}, 100 + mask), Mode::probe, 1e-6, 120 + mask);
        CHECK_MESSAGE(d.ok(), d.first_failure);
    }
}

TEST_CASE("batch norm with stale statistics treats them as constants") {
    BatchNormLayer layer(3);
    layer.gamma = random_tensor({3}, 1);
    layer.beta = random_tensor({3}, 2);
    Tensor x = random_tensor({4, 3, 2, 2}, 3);
    const ChannelStats stale{{0.3, -0.2, 0.1}, {1.5, 0.7, 2.0}};
    const BnForward f = bn_forward_with_stats(x, layer, stale, false);
    const Tensor r = random_tensor(f.output.shape(), 4);
    const BnGrads g = bn_backward(r, f.cache, layer);
    const auto res = check_gradients(
        [&] { return testing::dot(bn_forward_with_stats(x, layer, stale, false).output, r); },
        {&x, &layer.gamma, &layer.beta}, {g.grad_input, g.grad_gamma, g.grad_beta}, 1e-6);
    CHECK_MESSAGE(res.ok(), res.first_failure);
}

TEST_CASE("generalized groupings pass finite differences") {
    for (Grouping g : {Grouping::batch(), Grouping::layer(), Grouping::instance(), Grouping::group(2)}) {
        CAPTURE(to_string(g.kind));
        NormLayer n(4, g, {});
        randomize_affine(n, 7);
        const auto c = check_layer(n, random_tensor({3, 4, 2, 3}, 8), Mode::probe, 1e-6, 9);
        CHECK_MESSAGE(c.ok(), c.first_failure);
    }
    Tensor x = random_tensor({2, 4, 3, 3}, 10);
    Tensor gamma = random_tensor({4}, 11), beta = random_tensor({4}, 12);
    const auto f = generalized_norm_forward(x, Grouping::group(2), gamma, beta);
    const Tensor r = random_tensor(f.output.shape(), 13);
    const auto g = generalized_norm_backward(r, f.cache, gamma);
    const auto res = check_gradients(
        [&] { return testing::dot(generalized_norm(x, Grouping::group(2), gamma, beta), r); }, {&x, &gamma, &beta},
        {g.grad_input, g.grad_gamma, g.grad_beta}, 1e-6);
    CHECK_MESSAGE(res.ok(), res.first_failure);
    CHECK_THROWS_AS(generalized_norm(x, Grouping::group(3), gamma, beta), GroupingError);
}

TEST_CASE("batch grouping matches batch norm bit for bit") {
    BatchNormLayer layer(3);
    layer.gamma = random_tensor({3}, 1);
    layer.beta = random_tensor({3}, 2);
    const Tensor x = random_tensor({4, 3, 2, 2}, 3);
    const Tensor a = bn_forward_train(x, layer).output;
    const Tensor b = generalized_norm(x, Grouping::batch(), layer.gamma, layer.beta);
    CHECK(testing::bit_equal(a, b));
}

TEST_CASE("softmax cross-entropy") {
    const Tensor logits = Tensor::from_rows({{2, 0}});
    const std::vector<int> label{0};
    const SoftmaxXent s = softmax_xent(logits, label);
    CHECK(s.loss == doctest::Approx(std::log1p(std::exp(-2.0))).epsilon(1e-14));
    CHECK(s.grad_logits[0] == doctest::Approx(-0.11920292202211755).epsilon(1e-12));
    CHECK(s.grad_logits[1] == doctest::Approx(0.11920292202211755).epsilon(1e-12));

    Tensor z = random_tensor({4, 5}, 3, 0, 2.0);
    const std::vector<int> labels{0, 4, 2, 2};
    const SoftmaxXent g = softmax_xent(z, labels);
    const auto res = check_gradients([&] { return softmax_xent(z, labels).loss; }, {&z}, {g.grad_logits}, 1e-6);
    CHECK_MESSAGE(res.ok(), res.first_failure);

    const Tensor big = Tensor::from_rows({{1000, 0}, {0, -1000}});
    const std::vector<int> lb{1, 0};
    CHECK(std::isfinite(softmax_xent(big, lb).loss));
    const std::vector<int> bad{0, 2};
    CHECK_THROWS_AS(softmax_xent(big, bad), LabelError);
}

TEST_CASE("batch norm postcondition on random batches") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        SeededRng rng(seed);
        const std::size_t b = 2 + rng.uniform_index(5), h = 1 + rng.uniform_index(3), w = 2 + rng.uniform_index(3);
        Tensor x({b, 3, h, w});
        const double scale = 0.1 + 3.0 * rng.uniform(), shift = 5.0 * rng.normal();
        for (auto& v : x.storage()) v = shift + scale * rng.normal();
        BatchNormOptions opt;
        opt.toggles.use_gamma = opt.toggles.use_beta = false;
        BatchNormLayer layer(3, opt);
        const Tensor y = bn_forward_train(x, layer).output;
        const ChannelStats in = channel_statistics(x), out = channel_statistics(y);
        for (std::size_t c = 0; c < 3; ++c) {
            if (in.var[c] <= 1e-3) continue;
            CHECK(std::fabs(out.mean[c]) < 1e-8);
            CHECK(std::fabs(out.var[c] - in.var[c] / (in.var[c] + 1e-5)) < 1e-6);
        }
    }
}

TEST_CASE("batch norm modes and state") {
    BatchNormLayer layer(2);
    const Tensor x = random_tensor({4, 2, 2, 2}, 1, 0, 2.0);
    CHECK_THROWS_AS(bn_forward_eval(x, layer), UninitializedStatsError);
    CHECK_THROWS_AS(bn_forward_train(random_tensor({1, 2, 1, 1}, 2), layer), DegenerateBatchError);

    const BnForward probe = bn_forward_probe(x, layer);
    CHECK_FALSE(layer.running_initialized);
    CHECK(layer.batch_counter == 0);

    const BnForward train = bn_forward_train(x, layer);
    CHECK(testing::bit_equal(probe.output, train.output));
    const ChannelStats st = channel_statistics(x);
    for (std::size_t c = 0; c < 2; ++c) {
        CHECK(layer.running_mean[c] == doctest::Approx(0.1 * st.mean[c]).epsilon(1e-14));
        CHECK(layer.running_var[c] == doctest::Approx(0.9 + 0.1 * st.var[c]).epsilon(1e-14));
    }
    const Tensor e = bn_forward_eval(x, layer);
    CHECK(e.at({0, 0, 0, 0}) ==
          doctest::Approx((x.at({0, 0, 0, 0}) - layer.running_mean[0]) / std::sqrt(layer.running_var[0] + 1e-5)));

    // A forward pass after the cache was taken invalidates it.
    const BnForward first = bn_forward_train(x, layer);
    bn_forward_train(x, layer);
    CHECK_THROWS_AS(bn_backward(x, first.cache, layer), CacheMismatchError);
}

TEST_CASE("statistics period refreshes every k-th batch only") {
    BatchNormOptions opt;
    opt.stat_update_period = 2;
    BatchNormLayer layer(1, opt);
    const Tensor a = random_tensor({4, 1}, 1), b = random_tensor({4, 1}, 2, 0, 3.0);
    bn_forward_train(a, layer);
    const auto running = layer.running_mean;
    const BnForward stale = bn_forward_train(b, layer);
    CHECK_FALSE(stale.cache.stats_from_batch);
    CHECK(stale.cache.mean == channel_statistics(a).mean);
    CHECK(layer.running_mean == running);
    const BnForward fresh = bn_forward_train(b, layer);
    CHECK(fresh.cache.stats_from_batch);
    CHECK(fresh.cache.mean == channel_statistics(b).mean);
}

TEST_CASE("networks build to the configured depth and pass end-to-end finite differences") {
    for (auto placement : {NormPlacement::none, NormPlacement::per_layer, NormPlacement::final_only}) {
        for (bool stream_relu : {false, true}) {
            CAPTURE(to_string(placement));
            CAPTURE(stream_relu);
            NetworkConfig cfg;
            cfg.depth = 6;
            cfg.width = 4;
            cfg.class_count = 3;
            cfg.input_shape = {2, 4, 4};
            cfg.normalization = placement;
            cfg.stream_relu = stream_relu;
            SeededRng rng(3);
            Network net = build_network(cfg, rng);
            std::size_t convs = 0, dense = 0;
            for (const auto& t : net.taps()) (t.weight->is_conv() ? convs : dense)++;
            CHECK(convs == 5);
            CHECK(dense == 1);

            const Tensor x = random_tensor({4, 2, 4, 4}, 5);
            const std::vector<int> labels{0, 2, 1, 2};
            net.compute_gradients(x, labels, Mode::probe);
            std::vector<Tensor*> vars;
            std::vector<Tensor> grads;
            for (auto& p : net.params()) {
                vars.push_back(p.value);
                grads.push_back(*p.grad);
            }
            const auto res = check_gradients([&] { return net.loss(x, labels, Mode::probe); }, vars, grads, 1e-4);
            CHECK_MESSAGE(res.ok(), res.first_failure);
        }
    }
    NetworkConfig bad;
    bad.depth = 7;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("plain and dense stacks") {
    NetworkConfig cfg;
    cfg.kind = NetKind::plain;
    cfg.depth = 4;
    cfg.width = 3;
    cfg.input_shape = {1, 3, 3};
    SeededRng rng(1);
    Network plain = build_network(cfg, rng);
    CHECK(plain.taps().size() == 4);
    CHECK(plain.forward(random_tensor({2, 1, 3, 3}, 1), Mode::probe).shape() == Shape{2, 10});

    cfg.kind = NetKind::dense;
    Network dense = build_network(cfg, rng);
    CHECK(dense.taps().size() == 4);
    CHECK(dense.forward(random_tensor({2, 1, 3, 3}, 1), Mode::probe).shape() == Shape{2, 10});
    CHECK_THROWS_AS(dense.forward(random_tensor({2, 2, 3, 3}, 1), Mode::probe), DimensionError);
}

TEST_CASE("sgd: schedule, momentum and weight decay") {
    SgdState s({1.0, 0.9, 0.1, {}});
    CHECK(s.lr_at(0.0) == 1.0);
    CHECK(s.lr_at(0.4999) == 1.0);
    CHECK(s.lr_at(0.5) == doctest::Approx(0.1));
    CHECK(s.lr_at(0.75) == doctest::Approx(0.01));

    Tensor w = Tensor::from_rows({{1.0}}), gw = Tensor::from_rows({{0.5}});
    Tensor b({1}, 2.0), gb({1}, 0.5);
    std::vector<ParamRef> params{{"w", &w, &gw, true}, {"b", &b, &gb, false}};
    sgd_step(params, s, 0.0);
    CHECK(w[0] == doctest::Approx(1.0 - (0.5 + 0.1 * 1.0)));
    CHECK(b[0] == doctest::Approx(2.0 - 0.5));
    const double v1 = 0.5 + 0.1 * 1.0;
    const double w1 = w[0];
    sgd_step(params, s, 0.6);
    CHECK(w[0] == doctest::Approx(w1 - 0.1 * (0.9 * v1 + 0.5 + 0.1 * w1)));

    gw[0] = std::nan("");
    CHECK(sgd_step(params, s, 0.9).non_finite_gradient);
}

TEST_CASE("probe mode leaves batch norm state untouched inside a network") {
    NetworkConfig cfg;
    cfg.depth = 4;
    cfg.width = 4;
    cfg.input_shape = {1, 4, 4};
    SeededRng rng(2);
    Network net = build_network(cfg, rng);
    const Tensor x = random_tensor({3, 1, 4, 4}, 1);
    const std::vector<int> labels{1, 2, 3};
    net.compute_gradients(x, labels, Mode::train);
    std::vector<std::vector<double>> before;
    for (auto* n : net.norm_layers()) before.push_back(n->state().running_mean);
    net.compute_gradients(x, labels, Mode::probe);
    net.loss(x, labels, Mode::probe);
    std::size_t k = 0;
    for (auto* n : net.norm_layers()) CHECK(n->state().running_mean == before[k++]);
}
