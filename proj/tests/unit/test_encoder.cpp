#include <cmath>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "hiclr/encoder.hpp"

using namespace hiclr;
using Eigen::VectorXd;

namespace {

EncoderConfig small_config() {
    EncoderConfig c;
    c.frames = 12;
    c.joints = 11;
    c.persons = 2;
    c.widths = {6, 8};
    c.strides = {1, 2};
    c.temporal_kernel = 3;
    c.embed_dim = 5;
    return c;
}

// Loss = sum_i w_i . embed(x_i) under batch statistics.
double batch_loss(const GraphEncoder& enc, std::span<const double> params, std::span<const double> buffers,
                  std::span<const SkeletonSequence> xs, const std::vector<VectorXd>& w) {
    const auto z = enc.embed(params, buffers, xs, {}, NormMode::batch);
    double s = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) s += w[i].dot(z[i]);
    return s;
}

}  // namespace

TEST_CASE("encoder config validation") {
    CHECK_NOTHROW(EncoderConfig{}.validate());
    CHECK_NOTHROW(EncoderConfig::micro().validate());
    auto c = EncoderConfig{};
    c.widths = {};
    CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
    c = EncoderConfig{};
    c.strides = {1, 2};
    CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
    c = EncoderConfig{};
    c.temporal_kernel = 4;
    CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
    c = EncoderConfig{};
    c.embed_dim = 0;
    CHECK_ERROR_KIND(c.validate(), ErrorKind::config);
}

TEST_CASE("embeddings are unit length and deterministic") {
    const GraphEncoder enc(small_config(), tree11_graph());
    const auto params = enc.initial_parameters(3);
    CHECK(params == enc.initial_parameters(3));
    CHECK(params != enc.initial_parameters(4));
    const auto buffers = enc.initial_buffers();
    CHECK(buffers.size() == enc.buffer_count());
    const auto x = testing::random_sequence(12, 11, 2, 5);
    const VectorXd z = enc.embed(params, buffers, x);
    CHECK(z.size() == 5);
    CHECK(z.norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(enc.embed(params, buffers, x) == z);
    CHECK(enc.features(params, buffers, x).size() == 8);
}

TEST_CASE("input shape mismatch") {
    const GraphEncoder enc(small_config(), tree11_graph());
    const auto params = enc.initial_parameters(1);
    const auto buffers = enc.initial_buffers();
    CHECK_ERROR_KIND(enc.embed(params, buffers, testing::random_sequence(12, 25, 2, 1)), ErrorKind::shape);
    CHECK_ERROR_KIND(enc.embed(params, buffers, testing::random_sequence(11, 11, 2, 1)), ErrorKind::shape);
    CHECK_ERROR_KIND(GraphEncoder(small_config(), ntu25_graph()), ErrorKind::config);
}

TEST_CASE("joint relabeling by a graph automorphism leaves the embedding unchanged") {
    const auto g = tree11_graph();
    const GraphEncoder enc(small_config(), g);
    const auto params = enc.initial_parameters(7);
    const auto buffers = enc.initial_buffers();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto x = testing::random_sequence(12, 11, 2, seed);
        auto mirrored = x;
        for (int c = 0; c < 3; ++c)
            for (int t = 0; t < 12; ++t)
                for (int v = 0; v < 11; ++v)
                    for (int p = 0; p < 2; ++p) mirrored.at(c, t, v, p) = x.at(c, t, g.mirror[v], p);
        CHECK((enc.embed(params, buffers, x) - enc.embed(params, buffers, mirrored)).norm() <= 1e-5);
    }
}

TEST_CASE("person order does not matter") {
    const GraphEncoder enc(small_config(), tree11_graph());
    const auto params = enc.initial_parameters(2);
    const auto buffers = enc.initial_buffers();
    const auto x = testing::random_sequence(12, 11, 2, 9);
    auto swapped = x;
    for (int c = 0; c < 3; ++c)
        for (int t = 0; t < 12; ++t)
            for (int v = 0; v < 11; ++v) {
                swapped.at(c, t, v, 0) = x.at(c, t, v, 1);
                swapped.at(c, t, v, 1) = x.at(c, t, v, 0);
            }
    CHECK((enc.embed(params, buffers, x) - enc.embed(params, buffers, swapped)).norm() <= 1e-9);
}

TEST_CASE("graph perturbation changes the output, the empty one does not") {
    const GraphEncoder enc(small_config(), tree11_graph());
    const auto params = enc.initial_parameters(4);
    const auto buffers = enc.initial_buffers();
    const auto x = testing::random_sequence(12, 11, 2, 3);
    GraphPerturbation none;
    CHECK(enc.embed(params, buffers, x, &none) == enc.embed(params, buffers, x));
    GraphPerturbation drop_all;
    EdgeEdit edit;
    for (const auto& [a, b] : tree11_graph().edges) edit.dropped.insert({std::min(a, b), std::max(a, b)});
    drop_all.layers = {edit, edit};
    drop_all.per_layer = true;
    CHECK((enc.embed(params, buffers, x, &drop_all) - enc.embed(params, buffers, x)).norm() > 1e-6);
}

TEST_CASE("batch-mode gradients match finite differences") {
    const auto cfg = EncoderConfig::micro();
    const GraphEncoder enc(cfg, micro5_graph());
    auto params = enc.initial_parameters(11);
    const auto buffers = enc.initial_buffers();
    std::vector<SkeletonSequence> xs;
    std::vector<VectorXd> w;
    std::mt19937_64 rng(2);
    for (int i = 0; i < 3; ++i) {
        xs.push_back(testing::random_sequence(8, 5, 1, 40 + i));
        w.push_back(testing::random_unit(cfg.embed_dim, rng));
    }
    GraphEncoder::BatchTrace trace;
    enc.embed(params, buffers, xs, {}, NormMode::batch, &trace);
    std::vector<double> grad(params.size(), 0.0);
    enc.backward_embedding(params, trace, w, grad);

    int good = 0, checked = 0;
    for (std::size_t i = 0; i < params.size(); i += 3) {
        const double p0 = params[i], h = 1e-5;
        params[i] = p0 + h;
        const double a = batch_loss(enc, params, buffers, xs, w);
        params[i] = p0 - h;
        const double b = batch_loss(enc, params, buffers, xs, w);
        params[i] = p0;
        const double num = (a - b) / (2 * h);
        const double rel = std::abs(num - grad[i]) / std::max({std::abs(num), std::abs(grad[i]), 1e-7});
        ++checked;
        good += rel < 1e-3 || std::abs(num - grad[i]) < 1e-8;
    }
    CHECK(good >= 0.99 * checked);
}

TEST_CASE("running buffers") {
    const GraphEncoder enc(small_config(), tree11_graph());
    const auto params = enc.initial_parameters(5);
    auto buffers = enc.initial_buffers();
    const auto before = buffers;
    std::vector<SkeletonSequence> xs{testing::random_sequence(12, 11, 2, 1), testing::random_sequence(12, 11, 2, 2)};
    GraphEncoder::BatchTrace trace;
    enc.embed(params, buffers, xs, {}, NormMode::batch, &trace);
    CHECK(trace.stats.size() == 4);
    enc.update_buffers(buffers, trace, 0.0);
    CHECK(buffers == before);
    enc.update_buffers(buffers, trace, kRunningStatsRate);
    CHECK(buffers != before);
    // running mode ignores the rest of the batch
    const auto solo = enc.embed(params, buffers, xs[0]);
    const auto both = enc.embed(params, buffers, xs, {}, NormMode::running);
    CHECK((both[0] - solo).norm() <= 1e-12);
}

TEST_CASE("momentum update") {
    auto state = init_state(small_config(), tree11_graph(), 8);
    CHECK(state.key == state.query);
    for (auto& q : state.query) q += 0.5;
    SUBCASE("m = 0 copies the query") {
        momentum_update(state, 0.0);
        CHECK(state.key == state.query);
    }
    SUBCASE("key = query is a fixed point") {
        state.key = state.query;
        momentum_update(state, 0.9);
        CHECK(state.key == state.query);
    }
    SUBCASE("out of range") {
        CHECK_ERROR_KIND(momentum_update(state, 1.0), ErrorKind::config);
        CHECK_ERROR_KIND(momentum_update(state, -0.1), ErrorKind::config);
    }
}

TEST_CASE("parameter checksum") {
    std::vector<double> a{1.0, 2.0, 3.0};
    const auto c = parameter_checksum(a);
    CHECK(c == parameter_checksum(a));
    a[1] = std::nextafter(2.0, 3.0);
    CHECK(c != parameter_checksum(a));
}
