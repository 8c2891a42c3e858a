#include "hiclr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

#include "hiclr/error.hpp"
#include "hiclr/random.hpp"
#include "json_reader.hpp"

namespace hiclr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;

Protocol parse_protocol(const std::string& name) {
    if (name == "knn") return Protocol::knn;
    if (name == "linear") return Protocol::linear;
    if (name == "semi") return Protocol::semi;
    if (name == "finetune") return Protocol::finetune;
    fail(ErrorKind::config, "unknown protocol '" + name + "' (expected knn, linear, semi or finetune)");
}

const char* to_string(Protocol protocol) {
    switch (protocol) {
        case Protocol::knn: return "knn";
        case Protocol::linear: return "linear";
        case Protocol::semi: return "semi";
        case Protocol::finetune: return "finetune";
    }
    return "?";
}

std::uint64_t sample_key(const SkeletonSequence& seq) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const auto* bytes = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) h = (h ^ bytes[i]) * 0x100000001b3ULL;
    };
    const int dims[4] = {seq.channels, seq.frames, seq.joints, seq.persons};
    mix(dims, sizeof(dims));
    mix(seq.data.data(), seq.data.size() * sizeof(float));
    const int label = seq.label.value_or(-1);
    mix(&label, sizeof(label));
    return h;
}

// ---------------------------------------------------------------------------
// Reports

json to_json(const EvalReport& r) {
    json scores = json::array();
    for (Eigen::Index i = 0; i < r.scores.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index c = 0; c < r.scores.cols(); ++c) row.push_back(r.scores(i, c));
        scores.push_back(std::move(row));
    }
    return {{"protocol", to_string(r.protocol)},
            {"stream", r.stream},
            {"top1_accuracy", r.top1_accuracy},
            {"per_class_accuracy", r.per_class_accuracy},
            {"per_class_count", r.per_class_count},
            {"sample_count", r.labels.size()},
            {"config", r.config},
            {"labels", r.labels},
            {"predictions", r.predictions},
            {"sample_keys", r.sample_keys},
            {"scores", std::move(scores)}};
}

EvalReport report_from_json(const json& j) {
    EvalReport r;
    try {
        r.protocol = parse_protocol(j.at("protocol").get<std::string>());
        r.stream = j.at("stream").get<std::string>();
        r.top1_accuracy = j.at("top1_accuracy").get<double>();
        r.per_class_accuracy = j.at("per_class_accuracy").get<std::vector<double>>();
        r.per_class_count = j.at("per_class_count").get<std::vector<int>>();
        r.config = j.value("config", json::object());
        r.labels = j.at("labels").get<std::vector<int>>();
        r.predictions = j.at("predictions").get<std::vector<int>>();
        r.sample_keys = j.at("sample_keys").get<std::vector<std::uint64_t>>();
        const auto& scores = j.at("scores");
        const auto rows = static_cast<Eigen::Index>(scores.size());
        const auto cols = rows > 0 ? static_cast<Eigen::Index>(scores.at(0).size()) : 0;
        r.scores.resize(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            require(static_cast<Eigen::Index>(scores.at(i).size()) == cols, ErrorKind::parse, "ragged score matrix");
            for (Eigen::Index c = 0; c < cols; ++c) r.scores(i, c) = scores.at(i).at(c).get<double>();
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, std::string("malformed report: ") + e.what());
    }
    require(r.labels.size() == r.predictions.size(), ErrorKind::parse, "report labels and predictions differ in length");
    return r;
}

EvalReport make_report(Protocol protocol, const MatrixXd& scores, std::vector<int> labels,
                       std::vector<std::uint64_t> sample_keys, int class_count) {
    require(!labels.empty(), ErrorKind::empty_input, "no test samples to score");
    require(scores.rows() == static_cast<Eigen::Index>(labels.size()) && scores.cols() == class_count,
            ErrorKind::shape, "score matrix does not match labels and class count");
    EvalReport r;
    r.protocol = protocol;
    r.scores = scores;
    r.per_class_accuracy.assign(class_count, 0.0);
    r.per_class_count.assign(class_count, 0);
    int correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        Eigen::Index best = 0;
        scores.row(static_cast<Eigen::Index>(i)).maxCoeff(&best);  // first maximum = lowest class
        const int pred = static_cast<int>(best);
        r.predictions.push_back(pred);
        const int y = labels[i];
        require(y >= 0 && y < class_count, ErrorKind::shape, "label out of range");
        ++r.per_class_count[y];
        if (pred == y) {
            ++correct;
            r.per_class_accuracy[y] += 1.0;
        }
    }
    for (int c = 0; c < class_count; ++c)
        if (r.per_class_count[c] > 0) r.per_class_accuracy[c] /= r.per_class_count[c];
    r.top1_accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());
    r.labels = std::move(labels);
    r.sample_keys = std::move(sample_keys);
    return r;
}

// ---------------------------------------------------------------------------
// Features and KNN

FeatureBank extract_features(const EncoderState& state, const Dataset& dataset, Stream stream) {
    require(dataset.size() > 0, ErrorKind::empty_input, "cannot extract features from an empty dataset");
    const Dataset prepared = prepare_dataset(dataset, stream, state.config.frames);
    const GraphEncoder enc = state.encoder();
    FeatureBank bank;
    bank.split = dataset.split;
    bank.class_count = dataset.class_count;
    bank.features.resize(static_cast<Eigen::Index>(prepared.size()), state.config.latent_dim());
    for (std::size_t i = 0; i < prepared.size(); ++i) {
        bank.features.row(static_cast<Eigen::Index>(i)) =
            enc.features(state.query, state.buffers, prepared.sequences[i]).transpose();
        bank.labels.push_back(dataset.sequences[i].label.value_or(-1));
        bank.sample_keys.push_back(sample_key(dataset.sequences[i]));
    }
    require(bank.features.allFinite(), ErrorKind::internal, "encoder produced non-finite features");
    return bank;
}

namespace {

MatrixXd row_normalized(const MatrixXd& m) {
    MatrixXd out = m;
    for (Eigen::Index i = 0; i < out.rows(); ++i) {
        const double n = out.row(i).norm();
        if (n > 0.0) out.row(i) /= n;
    }
    return out;
}

int bank_classes(const FeatureBank& a, const FeatureBank& b) {
    int c = std::max(a.class_count, b.class_count);
    for (int y : a.labels) c = std::max(c, y + 1);
    for (int y : b.labels) c = std::max(c, y + 1);
    return c;
}

void check_labels(const FeatureBank& bank, const char* what) {
    for (int y : bank.labels) require(y >= 0, ErrorKind::shape, std::string(what) + " bank has unlabelled samples");
}

}  // namespace

EvalReport knn_eval(const FeatureBank& train, const FeatureBank& test, int k_neighbors) {
    require(train.size() > 0 && test.size() > 0, ErrorKind::empty_input, "KNN needs non-empty train and test banks");
    require(k_neighbors >= 1, ErrorKind::config, "k must be at least 1");
    require(train.features.cols() == test.features.cols(), ErrorKind::shape, "feature banks differ in width");
    check_labels(train, "train");
    check_labels(test, "test");
    const int classes = bank_classes(train, test);
    const int k = std::min<int>(k_neighbors, static_cast<int>(train.size()));

    const MatrixXd sim = row_normalized(test.features) * row_normalized(train.features).transpose();
    MatrixXd scores = MatrixXd::Zero(static_cast<Eigen::Index>(test.size()), classes);
    std::vector<int> idx(train.size());
    std::vector<double> votes(classes), mass(classes);
    for (Eigen::Index i = 0; i < sim.rows(); ++i) {
        std::iota(idx.begin(), idx.end(), 0);
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
            const double sa = sim(i, a), sb = sim(i, b);
            return sa != sb ? sa > sb : a < b;
        });
        std::fill(votes.begin(), votes.end(), 0.0);
        std::fill(mass.begin(), mass.end(), 0.0);
        for (int n = 0; n < k; ++n) {
            const int y = train.labels[static_cast<std::size_t>(idx[n])];
            votes[y] += 1.0;
            mass[y] += sim(i, idx[n]);
        }
        int best = 0;
        for (int c = 1; c < classes; ++c)
            if (votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best])) best = c;
        for (int c = 0; c < classes; ++c) scores(i, c) = votes[c] / k;
        // Encode the tie-break in the scores so argmax agrees with the vote.
        if (scores.row(i).maxCoeff() == scores(i, best)) {
            for (int c = 0; c < classes; ++c)
                if (c != best && scores(i, c) == scores(i, best)) scores(i, c) = std::nextafter(scores(i, c), 0.0);
        }
    }
    EvalReport r = make_report(Protocol::knn, scores, test.labels, test.sample_keys, classes);
    r.config = {{"k_neighbors", k_neighbors}, {"metric", "cosine"}};
    return r;
}

// ---------------------------------------------------------------------------
// Linear probe

json to_json(const ProbeConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"decay_epochs", c.decay_epochs},
            {"decay_factor", c.decay_factor},
            {"standardize", c.standardize},
            {"seed", c.seed}};
}

ProbeConfig probe_config_from_json(const json& j) {
    ProbeConfig c;
    {
        Reader r(j, "probe");
        r.read("epochs", c.epochs);
        r.read("batch_size", c.batch_size);
        r.read("learning_rate", c.learning_rate);
        r.read("momentum", c.momentum);
        r.read("weight_decay", c.weight_decay);
        r.read("decay_epochs", c.decay_epochs);
        r.read("decay_factor", c.decay_factor);
        r.read("standardize", c.standardize);
        r.read("seed", c.seed);
    }
    return c;
}

json to_json(const FinetuneConfig& c) {
    return {{"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"momentum", c.momentum},
            {"weight_decay", c.weight_decay},
            {"decay_epochs", c.decay_epochs},
            {"decay_factor", c.decay_factor},
            {"seed", c.seed}};
}

FinetuneConfig finetune_config_from_json(const json& j) {
    FinetuneConfig c;
    {
        Reader r(j, "finetune");
        r.read("epochs", c.epochs);
        r.read("batch_size", c.batch_size);
        r.read("learning_rate", c.learning_rate);
        r.read("momentum", c.momentum);
        r.read("weight_decay", c.weight_decay);
        r.read("decay_epochs", c.decay_epochs);
        r.read("decay_factor", c.decay_factor);
        r.read("seed", c.seed);
    }
    return c;
}

namespace {

double step_decay(double base, int epoch, const std::vector<int>& milestones, double factor) {
    double lr = base;
    for (int m : milestones)
        if (epoch >= m) lr *= factor;
    return lr;
}

void softmax_inplace(VectorXd& x) {
    x.array() -= x.maxCoeff();
    x = x.array().exp();
    x /= x.sum();
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, {0x11e4ULL, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

}  // namespace

EvalReport train_linear_probe(const FeatureBank& train, const FeatureBank& test, const ProbeConfig& config) {
    require(train.size() > 0 && test.size() > 0, ErrorKind::empty_input, "linear probe needs non-empty banks");
    require(train.features.cols() == test.features.cols(), ErrorKind::shape, "feature banks differ in width");
    require(config.epochs >= 1 && config.batch_size >= 1 && config.learning_rate > 0.0, ErrorKind::config,
            "probe epochs, batch size and learning rate must be positive");
    check_labels(train, "train");
    check_labels(test, "test");
    const int classes = bank_classes(train, test);
    const Eigen::Index d = train.features.cols();

    VectorXd mean = VectorXd::Zero(d), scale = VectorXd::Ones(d);
    if (config.standardize) {
        mean = train.features.colwise().mean().transpose();
        const MatrixXd centered = train.features.rowwise() - mean.transpose();
        const VectorXd var = centered.array().square().colwise().mean().transpose();
        for (Eigen::Index j = 0; j < d; ++j) scale(j) = var(j) > 1e-12 ? 1.0 / std::sqrt(var(j)) : 1.0;
    }
    auto transform = [&](const MatrixXd& f) -> MatrixXd {
        return ((f.rowwise() - mean.transpose()).array().rowwise() * scale.transpose().array()).matrix();
    };
    const MatrixXd xtr = transform(train.features);
    const MatrixXd xte = transform(test.features);

    MatrixXd w = MatrixXd::Zero(classes, d), vw = MatrixXd::Zero(classes, d);
    VectorXd b = VectorXd::Zero(classes), vb = VectorXd::Zero(classes);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = step_decay(config.learning_rate, epoch, config.decay_epochs, config.decay_factor);
        const auto order = epoch_order(train.size(), config.seed, epoch);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            MatrixXd gw = MatrixXd::Zero(classes, d);
            VectorXd gb = VectorXd::Zero(classes);
            for (std::size_t s = start; s < end; ++s) {
                const auto row = static_cast<Eigen::Index>(order[s]);
                VectorXd p = w * xtr.row(row).transpose() + b;
                softmax_inplace(p);
                p(train.labels[order[s]]) -= 1.0;
                gw.noalias() += p * xtr.row(row);
                gb += p;
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            vw = config.momentum * vw + gw * inv + config.weight_decay * w;
            vb = config.momentum * vb + gb * inv;
            w -= lr * vw;
            b -= lr * vb;
        }
    }

    MatrixXd scores(xte.rows(), classes);
    for (Eigen::Index i = 0; i < xte.rows(); ++i) {
        VectorXd p = w * xte.row(i).transpose() + b;
        softmax_inplace(p);
        scores.row(i) = p.transpose();
    }
    EvalReport r = make_report(Protocol::linear, scores, test.labels, test.sample_keys, classes);
    r.config = to_json(config);
    return r;
}

EvalReport linear_eval(const EncoderState& state, const Dataset& train, const Dataset& test, Stream stream,
                       const ProbeConfig& config) {
    const FeatureBank tr = extract_features(state, train, stream);
    const FeatureBank te = extract_features(state, test, stream);
    EvalReport r = train_linear_probe(tr, te, config);
    r.stream = to_string(stream);
    return r;
}

// ---------------------------------------------------------------------------
// Fine-tuning

FinetuneResult finetune(const EncoderState& state, const Dataset& train, const Dataset& test, Stream stream,
                        const FinetuneConfig& config) {
    require(train.size() > 0 && test.size() > 0, ErrorKind::empty_input, "fine-tuning needs non-empty datasets");
    require(config.epochs >= 1 && config.batch_size >= 1 && config.learning_rate > 0.0, ErrorKind::config,
            "fine-tune epochs, batch size and learning rate must be positive");
    const Dataset tr = prepare_dataset(train, stream, state.config.frames);
    const Dataset te = prepare_dataset(test, stream, state.config.frames);
    int classes = std::max(train.class_count, test.class_count);
    for (const auto* ds : {&train, &test})
        for (const auto& s : ds->sequences) {
            require(s.label.has_value() && *s.label >= 0, ErrorKind::shape, "fine-tuning needs labelled sequences");
            classes = std::max(classes, *s.label + 1);
        }

    const GraphEncoder enc = state.encoder();
    const Eigen::Index d = state.config.latent_dim();
    std::vector<double> params = state.query, buffers = state.buffers, velocity(params.size(), 0.0),
                        grad(params.size());
    MatrixXd w = MatrixXd::Zero(classes, d), vw = MatrixXd::Zero(classes, d);
    VectorXd b = VectorXd::Zero(classes), vb = VectorXd::Zero(classes);

    FinetuneResult result;
    GraphEncoder::BatchTrace trace;
    std::vector<SkeletonSequence> batch;
    std::vector<VectorXd> df;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const double lr = step_decay(config.learning_rate, epoch, config.decay_epochs, config.decay_factor);
        const auto order = epoch_order(tr.size(), config.seed, epoch);
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
            const double inv = 1.0 / static_cast<double>(end - start);
            batch.clear();
            for (std::size_t s = start; s < end; ++s) batch.push_back(tr.sequences[order[s]]);
            const auto f = enc.features(params, buffers, batch, {}, NormMode::batch, &trace);

            std::fill(grad.begin(), grad.end(), 0.0);
            MatrixXd gw = MatrixXd::Zero(classes, d);
            VectorXd gb = VectorXd::Zero(classes);
            df.assign(batch.size(), VectorXd());
            for (std::size_t s = 0; s < batch.size(); ++s) {
                VectorXd p = w * f[s] + b;
                softmax_inplace(p);
                const int y = *batch[s].label;
                loss_sum -= std::log(std::max(p(y), 1e-300));
                p(y) -= 1.0;
                gw.noalias() += p * f[s].transpose();
                gb += p;
                df[s] = (w.transpose() * p) * inv;
            }
            enc.backward_features(params, trace, df, grad);
            enc.update_buffers(buffers, trace, kRunningStatsRate);
            for (std::size_t i = 0; i < params.size(); ++i) {
                velocity[i] = config.momentum * velocity[i] + grad[i] + config.weight_decay * params[i];
                params[i] -= lr * velocity[i];
            }
            vw = config.momentum * vw + gw * inv + config.weight_decay * w;
            vb = config.momentum * vb + gb * inv;
            w -= lr * vw;
            b -= lr * vb;
        }
        result.epoch_loss.push_back(loss_sum / static_cast<double>(tr.size()));
        require(std::isfinite(result.epoch_loss.back()), ErrorKind::internal,
                "fine-tuning diverged in epoch " + std::to_string(epoch));
    }

    MatrixXd scores(static_cast<Eigen::Index>(te.size()), classes);
    std::vector<int> labels;
    std::vector<std::uint64_t> keys;
    for (std::size_t i = 0; i < te.size(); ++i) {
        VectorXd p = w * enc.features(params, buffers, te.sequences[i]) + b;
        softmax_inplace(p);
        scores.row(static_cast<Eigen::Index>(i)) = p.transpose();
        labels.push_back(*te.sequences[i].label);
        keys.push_back(sample_key(test.sequences[i]));
    }
    result.report = make_report(Protocol::finetune, scores, std::move(labels), std::move(keys), classes);
    result.report.stream = to_string(stream);
    result.report.config = to_json(config);
    return result;
}

EvalReport supervised_eval(const EncoderState& state, const Dataset& train, const Dataset& test, Stream stream,
                           const FinetuneConfig& config) {
    return finetune(state, train, test, stream, config).report;
}

Dataset semi_supervised_subset(const Dataset& train, double fraction, std::uint64_t seed) {
    require(fraction > 0.0 && fraction <= 1.0, ErrorKind::config, "label fraction must lie in (0, 1]");
    require(train.size() > 0, ErrorKind::empty_input, "training set is empty");
    int classes = train.class_count;
    for (const auto& s : train.sequences) {
        require(s.label.has_value() && *s.label >= 0, ErrorKind::shape, "semi-supervised sampling needs labels");
        classes = std::max(classes, *s.label + 1);
    }
    std::vector<std::vector<std::size_t>> by_class(classes);
    for (std::size_t i = 0; i < train.size(); ++i) by_class[*train.sequences[i].label].push_back(i);

    std::vector<std::size_t> keep;
    for (int c = 0; c < classes; ++c) {
        auto& members = by_class[c];
        if (members.empty()) continue;
        const auto take = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(members.size())));
        if (take == 0)
            fail(ErrorKind::config, "label fraction " + std::to_string(fraction) + " leaves class " + std::to_string(c) +
                                        " (" + std::to_string(members.size()) + " samples) without any labelled sample");
        Rng rng(derive_seed(seed, {0x5e31ULL, static_cast<std::uint64_t>(c)}));
        std::shuffle(members.begin(), members.end(), rng);
        keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(take));
    }
    std::sort(keep.begin(), keep.end());

    Dataset out;
    out.graph = train.graph;
    out.split = train.split;
    out.class_count = train.class_count;
    out.seed = train.seed;
    for (std::size_t i : keep) out.sequences.push_back(train.sequences[i]);
    return out;
}

EvalReport semi_supervised_eval(const EncoderState& state, const Dataset& train, double fraction, const Dataset& test,
                                Stream stream, const FinetuneConfig& config) {
    const Dataset subset = semi_supervised_subset(train, fraction, config.seed);
    EvalReport r = finetune(state, subset, test, stream, config).report;
    r.protocol = Protocol::semi;
    r.config["label_fraction"] = fraction;
    r.config["labelled_samples"] = subset.size();
    return r;
}

// ---------------------------------------------------------------------------
// Fusion

EvalReport ensemble_fuse(std::span<const EvalReport> reports, std::span<const double> weights) {
    require(!reports.empty(), ErrorKind::empty_input, "nothing to fuse");
    require(weights.size() == reports.size(), ErrorKind::config,
            "fusion needs one weight per stream (" + std::to_string(reports.size()) + " streams, " +
                std::to_string(weights.size()) + " weights)");
    for (double w : weights) require(w >= 0.0 && std::isfinite(w), ErrorKind::config, "fusion weights must be nonnegative");
    const EvalReport& first = reports.front();
    MatrixXd fused = MatrixXd::Zero(first.scores.rows(), first.scores.cols());
    std::string streams;
    for (std::size_t s = 0; s < reports.size(); ++s) {
        const EvalReport& r = reports[s];
        require(r.labels == first.labels && r.sample_keys == first.sample_keys, ErrorKind::config,
                "stream '" + r.stream + "' was evaluated on a different test order than '" + first.stream + "'");
        require(r.scores.rows() == fused.rows() && r.scores.cols() == fused.cols(), ErrorKind::shape,
                "stream '" + r.stream + "' has a differently shaped score matrix");
        fused += weights[s] * r.scores;
        streams += (s ? "+" : "") + r.stream;
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (total > 0.0) fused /= total;
    EvalReport out = make_report(first.protocol, fused, first.labels, first.sample_keys,
                                 static_cast<int>(first.scores.cols()));
    out.stream = streams;
    out.config = {{"fusion_weights", std::vector<double>(weights.begin(), weights.end())}};
    return out;
}

}  // namespace hiclr
