#include "hiclr/encoder.hpp"

#include <algorithm>
#include <cmath>

#include "hiclr/error.hpp"
#include "hiclr/random.hpp"

namespace hiclr {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ConstMap = Eigen::Map<const MatrixXd>;
using GradMap = Eigen::Map<MatrixXd>;
using ConstVec = Eigen::Map<const VectorXd>;
using GradVec = Eigen::Map<VectorXd>;

namespace {

constexpr double kNormEps = 1e-5;
constexpr double kBiasInit = 0.01;

}  // namespace

void EncoderConfig::validate() const {
    require(in_channels > 0 && frames > 0 && joints > 0 && persons > 0, ErrorKind::config,
            "encoder input dimensions must be positive");
    require(!widths.empty(), ErrorKind::config, "encoder needs at least one block");
    require(strides.size() == widths.size(), ErrorKind::config, "encoder strides must match widths");
    for (std::size_t i = 0; i < widths.size(); ++i)
        require(widths[i] > 0 && strides[i] > 0, ErrorKind::config, "encoder widths and strides must be positive");
    require(temporal_kernel > 0 && temporal_kernel % 2 == 1, ErrorKind::config, "temporal kernel must be odd");
    require(projector_hidden >= 0, ErrorKind::config, "projector hidden width must be nonnegative");
    require(embed_dim >= 2, ErrorKind::config, "embedding dimension must be at least 2");
}

EncoderConfig EncoderConfig::micro() {
    EncoderConfig c;
    c.frames = 8;
    c.joints = 5;
    c.persons = 1;
    c.widths = {4, 6};
    c.strides = {1, 2};
    c.temporal_kernel = 3;
    c.projector_hidden = 6;
    c.embed_dim = 4;
    return c;
}

GraphEncoder::GraphEncoder(EncoderConfig config, SkeletonGraph graph)
    : config_(std::move(config)), graph_(std::move(graph)) {
    config_.validate();
    require(graph_.num_joints == config_.joints, ErrorKind::config, "encoder joints do not match graph");
    std::size_t offset = 0, stats = 0;
    int in = config_.in_channels;
    const int K = config_.temporal_kernel;
    for (std::size_t b = 0; b < config_.widths.size(); ++b) {
        BlockLayout l{in, config_.widths[b], config_.strides[b], 0, 0, 0, 0, 0, 0, stats};
        l.wg = offset, offset += static_cast<std::size_t>(l.out) * l.in;
        l.g1 = offset, offset += l.out;
        l.b1 = offset, offset += l.out;
        l.wt = offset, offset += static_cast<std::size_t>(l.out) * K * l.out;
        l.g2 = offset, offset += l.out;
        l.b2 = offset, offset += l.out;
        stats += 4 * static_cast<std::size_t>(l.out);
        channel_total_ += l.out;
        blocks_.push_back(l);
        in = l.out;
    }
    const int H = config_.hidden_dim(), D = config_.embed_dim, F = config_.latent_dim();
    w1_ = offset, offset += static_cast<std::size_t>(H) * F;
    b1_ = offset, offset += H;
    w2_ = offset, offset += static_cast<std::size_t>(D) * H;
    b2_ = offset, offset += D;
    total_ = offset;
}

std::vector<double> GraphEncoder::initial_parameters(std::uint64_t seed) const {
    std::vector<double> p(total_, 0.0);
    Rng rng(derive_seed(seed, {0xe7c0ULL}));
    std::normal_distribution<double> normal(0.0, 1.0);
    auto fill = [&](std::size_t at, std::size_t n, double std) {
        for (std::size_t i = 0; i < n; ++i) p[at + i] = std * normal(rng);
    };
    auto constant = [&](std::size_t at, std::size_t n, double value) { std::fill_n(p.begin() + at, n, value); };
    const int K = config_.temporal_kernel;
    for (const auto& b : blocks_) {
        fill(b.wg, static_cast<std::size_t>(b.out) * b.in, std::sqrt(2.0 / b.in));
        constant(b.g1, b.out, 1.0);
        fill(b.wt, static_cast<std::size_t>(b.out) * K * b.out, std::sqrt(2.0 / (K * b.out)));
        constant(b.g2, b.out, 1.0);
    }
    const int H = config_.hidden_dim(), D = config_.embed_dim, F = config_.latent_dim();
    fill(w1_, static_cast<std::size_t>(H) * F, std::sqrt(2.0 / F));
    constant(b1_, H, kBiasInit);  // keeps the hidden units off the ReLU kink for constant inputs
    fill(w2_, static_cast<std::size_t>(D) * H, std::sqrt(1.0 / H));
    return p;
}

std::vector<double> GraphEncoder::initial_buffers() const {
    std::vector<double> b(buffer_count(), 0.0);
    for (const auto& l : blocks_) {
        std::fill_n(b.begin() + l.stats + l.out, l.out, 1.0);
        std::fill_n(b.begin() + l.stats + 3 * l.out, l.out, 1.0);
    }
    return b;
}

MatrixXd GraphEncoder::normalized_adjacency(const EdgeEdit* edit) const {
    const int V = graph_.num_joints;
    const auto a = effective_adjacency(graph_, edit);
    MatrixXd m = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(a.data(), V, V);
    VectorXd inv_sqrt = m.rowwise().sum().array().rsqrt();
    return inv_sqrt.asDiagonal() * m * inv_sqrt.asDiagonal();
}

void GraphEncoder::check_input(const SkeletonSequence& input) const {
    if (input.channels != config_.in_channels || input.frames != config_.frames || input.joints != config_.joints ||
        input.persons != config_.persons)
        fail(ErrorKind::shape, "view shape (" + std::to_string(input.channels) + ", " + std::to_string(input.frames) +
                                   ", " + std::to_string(input.joints) + ", " + std::to_string(input.persons) +
                                   ") does not match encoder (" + std::to_string(config_.in_channels) + ", " +
                                   std::to_string(config_.frames) + ", " + std::to_string(config_.joints) + ", " +
                                   std::to_string(config_.persons) + ")");
}

namespace {

// Statistics over every column of every matrix, per row.
GraphEncoder::NormStats batch_stats(const std::vector<std::vector<MatrixXd>*>& groups, Eigen::Index rows) {
    GraphEncoder::NormStats s;
    s.mean = VectorXd::Zero(rows);
    s.var = VectorXd::Zero(rows);
    for (const auto* g : groups)
        for (const auto& m : *g) {
            s.mean += m.rowwise().sum();
            s.count += static_cast<double>(m.cols());
        }
    s.mean /= s.count;
    for (const auto* g : groups)
        for (const auto& m : *g) s.var += (m.colwise() - s.mean).array().square().matrix().rowwise().sum();
    s.var /= s.count;
    return s;
}

GraphEncoder::NormStats running_stats(std::span<const double> buffers, std::size_t at, int n) {
    GraphEncoder::NormStats s;
    s.mean = ConstVec(buffers.data() + at, n);
    s.var = ConstVec(buffers.data() + at + n, n);
    return s;
}

void normalize_all(const std::vector<std::vector<MatrixXd>*>& groups, const GraphEncoder::NormStats& s) {
    const VectorXd inv_std = (s.var.array() + kNormEps).rsqrt();
    for (auto* g : groups)
        for (auto& m : *g) m = ((m.colwise() - s.mean).array().colwise() * inv_std.array()).matrix();
}

MatrixXd affine_relu(const MatrixXd& xhat, const VectorXd& gamma, const VectorXd& beta) {
    return ((xhat.array().colwise() * gamma.array()).colwise() + beta.array()).cwiseMax(0.0).matrix();
}

}  // namespace

std::vector<VectorXd> GraphEncoder::features(std::span<const double> params, std::span<const double> buffers,
                                             std::span<const SkeletonSequence> inputs,
                                             std::span<const GraphPerturbation* const> perturbations, NormMode mode,
                                             BatchTrace* trace) const {
    require(params.size() == total_, ErrorKind::shape, "parameter vector has the wrong size");
    require(buffers.size() == buffer_count(), ErrorKind::shape, "batch-norm buffer vector has the wrong size");
    require(!inputs.empty(), ErrorKind::empty_input, "encoder batch is empty");
    require(perturbations.empty() || perturbations.size() == inputs.size(), ErrorKind::shape,
            "need one graph perturbation entry per input");
    for (const auto& in : inputs) check_input(in);
    const int V = config_.joints, P = config_.persons, K = config_.temporal_kernel, pad = K / 2;
    const std::size_t B = inputs.size();
    const double* w = params.data();

    BatchTrace local;
    BatchTrace& tr = trace ? *trace : local;
    tr.mode = mode;
    tr.samples.assign(B, Trace{});
    tr.stats.clear();

    std::vector<std::vector<MatrixXd>> x(B, std::vector<MatrixXd>(P));
    for (std::size_t n = 0; n < B; ++n) {
        tr.samples[n].blocks.resize(blocks_.size());
        for (int p = 0; p < P; ++p) {
            auto& m = x[n][p];
            m.resize(config_.in_channels, static_cast<Eigen::Index>(config_.frames) * V);
            for (int c = 0; c < config_.in_channels; ++c)
                for (int t = 0; t < config_.frames; ++t)
                    for (int v = 0; v < V; ++v) m(c, t * V + v) = inputs[n].at(c, t, v, p);
        }
    }

    int frames = config_.frames;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& l = blocks_[b];
        ConstMap wg(w + l.wg, l.out, l.in);
        ConstMap wt(w + l.wt, l.out, static_cast<Eigen::Index>(K) * l.out);
        const VectorXd g1 = ConstVec(w + l.g1, l.out), b1 = ConstVec(w + l.b1, l.out);
        const VectorXd g2 = ConstVec(w + l.g2, l.out), b2 = ConstVec(w + l.b2, l.out);
        const int out_frames = (frames + 2 * pad - K) / l.stride + 1;

        std::vector<std::vector<MatrixXd>*> spatial, temporal;
        for (std::size_t n = 0; n < B; ++n) {
            auto& bt = tr.samples[n].blocks[b];
            const GraphPerturbation* pert = perturbations.empty() ? nullptr : perturbations[n];
            const EdgeEdit* edit = pert && !pert->layers.empty() ? &pert->for_layer(static_cast<int>(b)) : nullptr;
            bt.adjacency = normalized_adjacency(edit);
            for (int p = 0; p < P; ++p) {
                MatrixXd g(l.in, static_cast<Eigen::Index>(frames) * V);
                for (int t = 0; t < frames; ++t)
                    g.middleCols(t * V, V).noalias() = x[n][p].middleCols(t * V, V) * bt.adjacency;
                bt.spatial.push_back(wg * g);
                bt.aggregated.push_back(std::move(g));
            }
            spatial.push_back(&bt.spatial);
        }
        tr.stats.push_back(mode == NormMode::batch ? batch_stats(spatial, l.out) : running_stats(buffers, l.stats, l.out));
        normalize_all(spatial, tr.stats.back());

        for (std::size_t n = 0; n < B; ++n) {
            auto& bt = tr.samples[n].blocks[b];
            for (int p = 0; p < P; ++p) {
                const MatrixXd a = affine_relu(bt.spatial[p], g1, b1);
                MatrixXd cols =
                    MatrixXd::Zero(static_cast<Eigen::Index>(K) * l.out, static_cast<Eigen::Index>(out_frames) * V);
                for (int to = 0; to < out_frames; ++to)
                    for (int k = 0; k < K; ++k) {
                        const int ti = to * l.stride + k - pad;
                        if (ti < 0 || ti >= frames) continue;
                        cols.block(k * l.out, to * V, l.out, V) = a.middleCols(ti * V, V);
                    }
                bt.temporal.push_back(wt * cols);
                bt.columns.push_back(std::move(cols));
            }
            temporal.push_back(&bt.temporal);
        }
        tr.stats.push_back(mode == NormMode::batch ? batch_stats(temporal, l.out)
                                                   : running_stats(buffers, l.stats + 2 * l.out, l.out));
        normalize_all(temporal, tr.stats.back());

        for (std::size_t n = 0; n < B; ++n)
            for (int p = 0; p < P; ++p) x[n][p] = affine_relu(tr.samples[n].blocks[b].temporal[p], g2, b2);
        frames = out_frames;
    }

    const double count = static_cast<double>(P) * frames * V;
    std::vector<VectorXd> out(B);
    for (std::size_t n = 0; n < B; ++n) {
        VectorXd pooled = VectorXd::Zero(config_.latent_dim());
        for (int p = 0; p < P; ++p) pooled += x[n][p].rowwise().sum();
        pooled /= count;
        tr.samples[n].pooled_count = count;
        tr.samples[n].features = pooled;
        out[n] = std::move(pooled);
    }
    return out;
}

VectorXd GraphEncoder::features(std::span<const double> params, std::span<const double> buffers,
                                const SkeletonSequence& input, const GraphPerturbation* perturbation) const {
    const GraphPerturbation* perts[1] = {perturbation};
    return features(params, buffers, std::span(&input, 1), std::span(perts), NormMode::running).front();
}

VectorXd GraphEncoder::project(std::span<const double> params, const VectorXd& features, Trace* trace) const {
    require(params.size() == total_, ErrorKind::shape, "parameter vector has the wrong size");
    require(features.size() == config_.latent_dim(), ErrorKind::shape, "feature vector has the wrong size");
    const int H = config_.hidden_dim(), D = config_.embed_dim, F = config_.latent_dim();
    const double* w = params.data();
    VectorXd a1 = ConstMap(w + w1_, H, F) * features + ConstVec(w + b1_, H);
    VectorXd u = ConstMap(w + w2_, D, H) * a1.cwiseMax(0.0) + ConstVec(w + b2_, D);
    const double norm = u.norm();
    require(norm > 0.0, ErrorKind::internal, "projector produced a zero vector");
    VectorXd z = u / norm;
    if (trace) {
        trace->features = features;
        trace->hidden_pre = std::move(a1);
        trace->projected = std::move(u);
        trace->embedding = z;
    }
    return z;
}

std::vector<VectorXd> GraphEncoder::embed(std::span<const double> params, std::span<const double> buffers,
                                          std::span<const SkeletonSequence> inputs,
                                          std::span<const GraphPerturbation* const> perturbations, NormMode mode,
                                          BatchTrace* trace) const {
    auto f = features(params, buffers, inputs, perturbations, mode, trace);
    for (std::size_t n = 0; n < f.size(); ++n) f[n] = project(params, f[n], trace ? &trace->samples[n] : nullptr);
    return f;
}

VectorXd GraphEncoder::embed(std::span<const double> params, std::span<const double> buffers,
                             const SkeletonSequence& input, const GraphPerturbation* perturbation) const {
    return project(params, features(params, buffers, input, perturbation));
}

VectorXd GraphEncoder::project_backward(std::span<const double> params, const Trace& trace, const VectorXd& d_embedding,
                                        std::span<double> grad) const {
    const int H = config_.hidden_dim(), D = config_.embed_dim, F = config_.latent_dim();
    const double* w = params.data();
    require(trace.projected.size() == D, ErrorKind::internal, "trace does not hold a projector pass");
    const double norm = trace.projected.norm();
    const VectorXd& z = trace.embedding;
    const VectorXd du = (d_embedding - z * z.dot(d_embedding)) / norm;
    const VectorXd r1 = trace.hidden_pre.cwiseMax(0.0);

    GradMap(grad.data() + w2_, D, H).noalias() += du * r1.transpose();
    GradVec(grad.data() + b2_, D) += du;
    VectorXd da1 = ConstMap(w + w2_, D, H).transpose() * du;
    da1 = (trace.hidden_pre.array() > 0.0).select(da1, 0.0);
    GradMap(grad.data() + w1_, H, F).noalias() += da1 * trace.features.transpose();
    GradVec(grad.data() + b1_, H) += da1;
    return ConstMap(w + w1_, H, F).transpose() * da1;
}

void GraphEncoder::backward_embedding(std::span<const double> params, const BatchTrace& trace,
                                      std::span<const VectorXd> d_embedding, std::span<double> grad) const {
    require(grad.size() == total_, ErrorKind::shape, "gradient vector has the wrong size");
    require(d_embedding.size() == trace.samples.size(), ErrorKind::shape, "need one embedding gradient per sample");
    std::vector<VectorXd> df(d_embedding.size());
    for (std::size_t n = 0; n < df.size(); ++n) df[n] = project_backward(params, trace.samples[n], d_embedding[n], grad);
    backward_features(params, trace, df, grad);
}

namespace {

// Gradient through y = (x - mean) / sqrt(var + eps), in place on dxhat.
// With batch statistics the mean and variance depend on every input.
void norm_backward(std::vector<std::vector<MatrixXd>>& dxhat, const std::vector<const std::vector<MatrixXd>*>& xhat,
                   const GraphEncoder::NormStats& s, bool batch) {
    const VectorXd inv_std = (s.var.array() + kNormEps).rsqrt();
    if (!batch) {
        for (auto& g : dxhat)
            for (auto& m : g) m = (m.array().colwise() * inv_std.array()).matrix();
        return;
    }
    VectorXd sum_d = VectorXd::Zero(s.mean.size()), sum_dx = VectorXd::Zero(s.mean.size());
    for (std::size_t n = 0; n < dxhat.size(); ++n)
        for (std::size_t p = 0; p < dxhat[n].size(); ++p) {
            sum_d += dxhat[n][p].rowwise().sum();
            sum_dx += dxhat[n][p].cwiseProduct((*xhat[n])[p]).rowwise().sum();
        }
    const VectorXd mean_d = sum_d / s.count, mean_dx = sum_dx / s.count;
    for (std::size_t n = 0; n < dxhat.size(); ++n)
        for (std::size_t p = 0; p < dxhat[n].size(); ++p) {
            auto& m = dxhat[n][p];
            const auto& xh = (*xhat[n])[p];
            m = (((m.colwise() - mean_d).array() - xh.array().colwise() * mean_dx.array()).colwise() * inv_std.array())
                    .matrix();
        }
}

}  // namespace

void GraphEncoder::backward_features(std::span<const double> params, const BatchTrace& trace,
                                     std::span<const VectorXd> d_features, std::span<double> grad) const {
    require(grad.size() == total_, ErrorKind::shape, "gradient vector has the wrong size");
    require(d_features.size() == trace.samples.size(), ErrorKind::shape, "need one feature gradient per sample");
    require(trace.stats.size() == 2 * blocks_.size(), ErrorKind::internal, "trace does not hold a backbone pass");
    const int V = config_.joints, P = config_.persons, K = config_.temporal_kernel, pad = K / 2;
    const std::size_t B = trace.samples.size();
    const bool batch = trace.mode == NormMode::batch;
    const double* w = params.data();

    std::vector<std::vector<MatrixXd>> dx(B, std::vector<MatrixXd>(P));
    for (std::size_t n = 0; n < B; ++n) {
        const auto& s = trace.samples[n];
        for (int p = 0; p < P; ++p)
            dx[n][p] = (d_features[n] / s.pooled_count).replicate(1, s.blocks.back().temporal[p].cols());
    }

    for (int b = static_cast<int>(blocks_.size()) - 1; b >= 0; --b) {
        const auto& l = blocks_[b];
        ConstMap wg(w + l.wg, l.out, l.in);
        ConstMap wt(w + l.wt, l.out, static_cast<Eigen::Index>(K) * l.out);
        const VectorXd g1 = ConstVec(w + l.g1, l.out), b1 = ConstVec(w + l.b1, l.out);
        const VectorXd g2 = ConstVec(w + l.g2, l.out), b2 = ConstVec(w + l.b2, l.out);
        GradMap gwg(grad.data() + l.wg, l.out, l.in);
        GradVec gg1(grad.data() + l.g1, l.out), gb1(grad.data() + l.b1, l.out);
        GradMap gwt(grad.data() + l.wt, l.out, static_cast<Eigen::Index>(K) * l.out);
        GradVec gg2(grad.data() + l.g2, l.out), gb2(grad.data() + l.b2, l.out);
        const int in_frames = static_cast<int>(trace.samples[0].blocks[b].spatial[0].cols() / V);
        const int out_frames = static_cast<int>(trace.samples[0].blocks[b].temporal[0].cols() / V);

        // second norm + ReLU
        std::vector<const std::vector<MatrixXd>*> xhat2(B), xhat1(B);
        for (std::size_t n = 0; n < B; ++n) {
            const auto& bt = trace.samples[n].blocks[b];
            xhat2[n] = &bt.temporal;
            xhat1[n] = &bt.spatial;
            for (int p = 0; p < P; ++p) {
                const auto& xh = bt.temporal[p];
                const auto pre = (xh.array().colwise() * g2.array()).colwise() + b2.array();
                MatrixXd d = (pre > 0.0).select(dx[n][p], 0.0);
                gg2 += d.cwiseProduct(xh).rowwise().sum();
                gb2 += d.rowwise().sum();
                dx[n][p] = (d.array().colwise() * g2.array()).matrix();
            }
        }
        norm_backward(dx, xhat2, trace.stats[2 * b + 1], batch);

        // temporal conv, first norm + ReLU
        for (std::size_t n = 0; n < B; ++n) {
            const auto& bt = trace.samples[n].blocks[b];
            for (int p = 0; p < P; ++p) {
                const MatrixXd& dy = dx[n][p];
                gwt.noalias() += dy * bt.columns[p].transpose();
                const MatrixXd dcols = wt.transpose() * dy;
                MatrixXd da = MatrixXd::Zero(l.out, static_cast<Eigen::Index>(in_frames) * V);
                for (int to = 0; to < out_frames; ++to)
                    for (int k = 0; k < K; ++k) {
                        const int ti = to * l.stride + k - pad;
                        if (ti < 0 || ti >= in_frames) continue;
                        da.middleCols(ti * V, V) += dcols.block(k * l.out, to * V, l.out, V);
                    }
                const auto& xh = bt.spatial[p];
                const auto pre = (xh.array().colwise() * g1.array()).colwise() + b1.array();
                da = (pre > 0.0).select(da, 0.0);
                gg1 += da.cwiseProduct(xh).rowwise().sum();
                gb1 += da.rowwise().sum();
                dx[n][p] = (da.array().colwise() * g1.array()).matrix();
            }
        }
        norm_backward(dx, xhat1, trace.stats[2 * b], batch);

        // 1x1 conv and graph aggregation
        for (std::size_t n = 0; n < B; ++n) {
            const auto& bt = trace.samples[n].blocks[b];
            for (int p = 0; p < P; ++p) {
                const MatrixXd& dh = dx[n][p];
                gwg.noalias() += dh * bt.aggregated[p].transpose();
                if (b == 0) continue;
                const MatrixXd dg = wg.transpose() * dh;
                MatrixXd din(l.in, static_cast<Eigen::Index>(in_frames) * V);
                for (int t = 0; t < in_frames; ++t)
                    din.middleCols(t * V, V).noalias() = dg.middleCols(t * V, V) * bt.adjacency.transpose();
                dx[n][p] = std::move(din);
            }
        }
    }
}

void GraphEncoder::update_buffers(std::span<double> buffers, const BatchTrace& trace, double rate) const {
    require(buffers.size() == buffer_count(), ErrorKind::shape, "batch-norm buffer vector has the wrong size");
    require(trace.mode == NormMode::batch && trace.stats.size() == 2 * blocks_.size(), ErrorKind::internal,
            "running statistics can only be updated from a batch-statistics pass");
    require(rate >= 0.0 && rate <= 1.0, ErrorKind::config, "running-statistics rate must lie in [0, 1]");
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        const auto& l = blocks_[b];
        for (int half = 0; half < 2; ++half) {
            const auto& s = trace.stats[2 * b + half];
            GradVec mean(buffers.data() + l.stats + 2 * half * l.out, l.out);
            GradVec var(buffers.data() + l.stats + (2 * half + 1) * l.out, l.out);
            mean = (1.0 - rate) * mean + rate * s.mean;
            var = (1.0 - rate) * var + rate * s.var;
        }
    }
}

EncoderState init_state(const EncoderConfig& config, const SkeletonGraph& graph, std::uint64_t seed) {
    GraphEncoder enc(config, graph);
    EncoderState s{config, graph, enc.initial_parameters(seed), {}, enc.initial_buffers()};
    s.key = s.query;
    return s;
}

VectorXd encode_query(const EncoderState& state, const SkeletonSequence& view, const GraphPerturbation* perturbation) {
    return state.encoder().embed(state.query, state.buffers, view, perturbation);
}

VectorXd encode_key(const EncoderState& state, const SkeletonSequence& view, const GraphPerturbation* perturbation) {
    return state.encoder().embed(state.key, state.buffers, view, perturbation);
}

void momentum_update(EncoderState& state, double m) {
    require(m >= 0.0 && m < 1.0, ErrorKind::config, "momentum coefficient must lie in [0, 1)");
    require(state.key.size() == state.query.size(), ErrorKind::shape, "query and key parameters differ in size");
    if (m == 0.0) {
        state.key = state.query;
        return;
    }
    // Written as an increment so a key equal to the query stays bit-identical.
    const double rate = 1.0 - m;
    for (std::size_t i = 0; i < state.key.size(); ++i) state.key[i] += rate * (state.query[i] - state.key[i]);
}

std::uint64_t parameter_checksum(std::span<const double> params) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    const auto* bytes = reinterpret_cast<const unsigned char*>(params.data());
    for (std::size_t i = 0; i < params.size_bytes(); ++i) {
        h ^= bytes[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace hiclr
