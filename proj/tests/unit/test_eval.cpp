#include <cmath>

#include "doctest.h"
#include "helpers.hpp"

#include "hiclr/eval.hpp"

using namespace hiclr;
using Eigen::MatrixXd;

namespace {

FeatureBank bank(MatrixXd features, std::vector<int> labels, int classes) {
    FeatureBank b;
    b.features = std::move(features);
    b.labels = std::move(labels);
    b.class_count = classes;
    b.sample_keys.resize(b.labels.size());
    for (std::size_t i = 0; i < b.labels.size(); ++i) b.sample_keys[i] = i;
    return b;
}

// Gaussian blobs around +-e_c.
FeatureBank blobs(int per_class, int classes, int dim, std::uint64_t seed, double spread) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, spread);
    MatrixXd f(per_class * classes, dim);
    std::vector<int> y;
    for (int c = 0; c < classes; ++c)
        for (int i = 0; i < per_class; ++i) {
            const int r = c * per_class + i;
            for (int d = 0; d < dim; ++d) f(r, d) = n(rng) + (d == c ? 1.0 : 0.0);
            y.push_back(c);
        }
    return bank(f, y, classes);
}

Dataset tiny_data(std::uint64_t seed) {
    SynthSpec s;
    s.class_count = 3;
    s.sequences_per_class = 4;
    s.frames = 16;
    return synth_generate(s, seed);
}

EncoderState tiny_state(const Dataset& d) {
    EncoderConfig c;
    c.frames = 8;
    c.joints = d.graph.num_joints;
    c.persons = 1;
    c.widths = {4, 6};
    c.strides = {1, 2};
    c.temporal_kernel = 3;
    c.embed_dim = 4;
    return init_state(c, d.graph, 2);
}

}  // namespace

TEST_CASE("protocol names") {
    for (auto p : {Protocol::knn, Protocol::linear, Protocol::semi, Protocol::finetune})
        CHECK(parse_protocol(to_string(p)) == p);
    CHECK_ERROR_KIND(parse_protocol("svm"), ErrorKind::config);
}

TEST_CASE("knn") {
    SUBCASE("self-test with k = 1 is perfect") {
        const auto b = blobs(10, 4, 6, 1, 0.5);
        CHECK(knn_eval(b, b, 1).top1_accuracy == 1.0);
    }
    SUBCASE("separated blobs") {
        const auto tr = blobs(20, 3, 5, 2, 0.1), te = blobs(10, 3, 5, 3, 0.1);
        const auto r = knn_eval(tr, te, 5);
        CHECK(r.top1_accuracy == 1.0);
        CHECK(r.per_class_accuracy == std::vector<double>{1.0, 1.0, 1.0});
        CHECK(r.per_class_count == std::vector<int>{10, 10, 10});
        for (Eigen::Index i = 0; i < r.scores.rows(); ++i) CHECK(r.scores.row(i).sum() == doctest::Approx(1.0));
    }
    SUBCASE("vote ties go to the larger similarity mass") {
        MatrixXd tr(2, 2), te(1, 2);
        tr << 1, 0, 0, 1;
        te << 0.4, 1.0;  // closer to class 1
        const auto r = knn_eval(bank(tr, {0, 1}, 2), bank(te, {1}, 2), 2);
        CHECK(r.predictions == std::vector<int>{1});
    }
    SUBCASE("full ties go to the lowest class") {
        MatrixXd tr(2, 2), te(1, 2);
        tr << 1, 0, 1, 0;
        te << 1, 0;
        const auto r = knn_eval(bank(tr, {1, 0}, 2), bank(te, {0}, 2), 2);
        CHECK(r.predictions == std::vector<int>{0});
    }
    SUBCASE("k larger than the bank uses all neighbours") {
        const auto b = blobs(2, 2, 3, 4, 0.1);
        CHECK_NOTHROW(knn_eval(b, b, 100));
    }
    SUBCASE("errors") {
        const auto b = blobs(2, 2, 3, 4, 0.1);
        CHECK_ERROR_KIND(knn_eval(b, b, 0), ErrorKind::config);
        CHECK_ERROR_KIND(knn_eval(b, blobs(2, 2, 4, 4, 0.1), 1), ErrorKind::shape);
        CHECK_ERROR_KIND(knn_eval(bank(MatrixXd(0, 3), {}, 2), b, 1), ErrorKind::empty_input);
    }
}

TEST_CASE("report json round trip and argmax ties") {
    MatrixXd s(3, 3);
    s << 0.5, 0.5, 0.0, 0.1, 0.2, 0.7, 1.0, 0.0, 0.0;
    const auto r = make_report(Protocol::linear, s, {1, 2, 0}, {7, 8, 9}, 3);
    CHECK(r.predictions == std::vector<int>{0, 2, 0});
    CHECK(r.top1_accuracy == doctest::Approx(2.0 / 3.0));
    const auto back = report_from_json(to_json(r));
    CHECK(back.top1_accuracy == r.top1_accuracy);
    CHECK(back.predictions == r.predictions);
    CHECK(back.sample_keys == r.sample_keys);
    CHECK(back.scores.isApprox(r.scores));
}

TEST_CASE("linear probe") {
    const auto tr = blobs(30, 3, 5, 5, 0.2), te = blobs(10, 3, 5, 6, 0.2);
    ProbeConfig pc;
    pc.epochs = 30;
    const auto r = train_linear_probe(tr, te, pc);
    CHECK(r.top1_accuracy >= 0.95);
    CHECK(train_linear_probe(tr, te, pc).scores == r.scores);
    pc.epochs = 0;
    CHECK_ERROR_KIND(train_linear_probe(tr, te, pc), ErrorKind::config);
}

TEST_CASE("probe and finetune configs are strict") {
    auto j = to_json(ProbeConfig{});
    CHECK(probe_config_from_json(j).epochs == 80);
    j["epoch"] = 3;
    CHECK_ERROR_KIND(probe_config_from_json(j), ErrorKind::config);
    auto f = to_json(FinetuneConfig{});
    CHECK(finetune_config_from_json(f).batch_size == 16);
    f["lr"] = 0.1;
    CHECK_ERROR_KIND(finetune_config_from_json(f), ErrorKind::config);
}

TEST_CASE("frozen evaluation leaves the encoder untouched") {
    const auto train = tiny_data(1), test = tiny_data(2);
    const auto state = tiny_state(train);
    const auto q = parameter_checksum(state.query), k = parameter_checksum(state.key);
    const auto buffers = state.buffers;
    ProbeConfig pc;
    pc.epochs = 3;
    const auto r = linear_eval(state, train, test, Stream::joint, pc);
    CHECK(r.stream == "joint");
    CHECK(parameter_checksum(state.query) == q);
    CHECK(parameter_checksum(state.key) == k);
    CHECK(state.buffers == buffers);

    const auto fb = extract_features(state, train, Stream::bone);
    CHECK(fb.size() == 12);
    CHECK(fb.features.cols() == 6);
    CHECK(fb.sample_keys[0] == sample_key(train.sequences[0]));
}

TEST_CASE("finetune trains and reports") {
    const auto train = tiny_data(1), test = tiny_data(2);
    const auto state = tiny_state(train);
    FinetuneConfig fc;
    fc.epochs = 2;
    fc.batch_size = 4;
    fc.decay_epochs = {};
    const auto res = finetune(state, train, test, Stream::joint, fc);
    CHECK(res.epoch_loss.size() == 2);
    for (double l : res.epoch_loss) CHECK(std::isfinite(l));
    CHECK(res.report.protocol == Protocol::finetune);
    CHECK(res.report.labels.size() == 12);
    const auto again = finetune(state, train, test, Stream::joint, fc);
    CHECK(again.epoch_loss == res.epoch_loss);
}

TEST_CASE("semi-supervised subset") {
    SynthSpec s;
    s.class_count = 4;
    s.sequences_per_class = 10;
    s.frames = 8;
    const auto d = synth_generate(s, 1);
    const auto sub = semi_supervised_subset(d, 0.2, 3);
    CHECK(sub.size() == 8);
    std::vector<int> per(4, 0);
    for (const auto& q : sub.sequences) ++per[*q.label];
    CHECK(per == std::vector<int>{2, 2, 2, 2});
    CHECK(semi_supervised_subset(d, 0.2, 3).sequences == sub.sequences);
    CHECK_ERROR_KIND(semi_supervised_subset(d, 0.01, 3), ErrorKind::config);
    CHECK_ERROR_KIND(semi_supervised_subset(d, 1.5, 3), ErrorKind::config);
}

TEST_CASE("ensemble fusion") {
    MatrixXd a(2, 2), b(2, 2);
    a << 0.9, 0.1, 0.4, 0.6;
    b << 0.2, 0.8, 0.1, 0.9;
    auto ra = make_report(Protocol::knn, a, {0, 1}, {1, 2}, 2);
    auto rb = make_report(Protocol::knn, b, {0, 1}, {1, 2}, 2);
    ra.stream = "joint";
    rb.stream = "bone";
    const std::vector<EvalReport> both{ra, rb};
    const std::vector<double> w{0.6, 0.4};
    const auto f = ensemble_fuse(both, w);
    CHECK(f.stream == "joint+bone");
    CHECK(f.scores(0, 0) == doctest::Approx(0.62));
    CHECK(f.predictions == std::vector<int>{0, 1});
    // one stream fused with itself is unchanged
    const std::vector<EvalReport> self{ra};
    const std::vector<double> one{1.0};
    CHECK(ensemble_fuse(self, one).scores.isApprox(ra.scores));

    const std::vector<double> bad_count{1.0};
    CHECK_ERROR_KIND(ensemble_fuse(both, bad_count), ErrorKind::config);
    const std::vector<double> negative{1.0, -1.0};
    CHECK_ERROR_KIND(ensemble_fuse(both, negative), ErrorKind::config);
    auto shuffled = rb;
    shuffled.sample_keys = {2, 1};
    const std::vector<EvalReport> mismatched{ra, shuffled};
    CHECK_ERROR_KIND(ensemble_fuse(mismatched, w), ErrorKind::config);
    CHECK_ERROR_KIND(ensemble_fuse(std::span<const EvalReport>{}, std::span<const double>{}), ErrorKind::empty_input);
}
