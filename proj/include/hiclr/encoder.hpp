#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hiclr/augment.hpp"
#include "hiclr/skeleton.hpp"

namespace hiclr {

struct EncoderConfig {
    int in_channels = 3;
    int frames = 50;
    int joints = 25;
    int persons = 2;
    std::vector<int> widths{16, 32, 64};
    std::vector<int> strides{1, 2, 2};
    int temporal_kernel = 5;
    int projector_hidden = 0;  // 0 means "same as the last block width"
    int embed_dim = 128;

    void validate() const;
    int layers() const { return static_cast<int>(widths.size()); }
    int latent_dim() const { return widths.back(); }
    int hidden_dim() const { return projector_hidden > 0 ? projector_hidden : widths.back(); }

    // Two-block encoder over the 5-joint graph, used by gradient checks.
    static EncoderConfig micro();

    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Batch norm either normalizes with the statistics of the current batch
// (training) or with the stored running statistics (evaluation, key twin).
enum class NormMode { batch, running };

// Weight of the newest batch in the running batch-norm statistics.
inline constexpr double kRunningStatsRate = 0.1;

// Stacked blocks of
//   graph aggregation -> 1x1 conv -> BN -> ReLU -> temporal conv -> BN -> ReLU,
// global average pooling over (T, V, P), then a two-layer projector with
// L2-normalized output. Trainable parameters live in one flat vector so the
// momentum twin, optimizer and checkpoints can treat them uniformly; the
// running batch-norm statistics live in a separate buffer vector.
class GraphEncoder {
public:
    struct BlockTrace {
        Eigen::MatrixXd adjacency;                // normalized, V x V
        std::vector<Eigen::MatrixXd> aggregated;  // per person, Cin x (T_in V)
        std::vector<Eigen::MatrixXd> spatial;     // normalized 1x1 conv output, Cout x (T_in V)
        std::vector<Eigen::MatrixXd> columns;     // im2col of the activations, (K Cout) x (T_out V)
        std::vector<Eigen::MatrixXd> temporal;    // normalized temporal conv output, Cout x (T_out V)
    };
    struct Trace {
        std::vector<BlockTrace> blocks;
        double pooled_count = 0.0;
        Eigen::VectorXd features;
        Eigen::VectorXd hidden_pre;
        Eigen::VectorXd projected;  // before normalization
        Eigen::VectorXd embedding;
    };
    // Per-channel statistics one batch-norm layer used in a forward pass.
    struct NormStats {
        Eigen::VectorXd mean, var;
        double count = 0.0;  // values per channel the statistics were taken over
    };
    struct BatchTrace {
        NormMode mode = NormMode::running;
        std::vector<Trace> samples;
        std::vector<NormStats> stats;  // two per block
    };

    GraphEncoder(EncoderConfig config, SkeletonGraph graph);

    const EncoderConfig& config() const { return config_; }
    const SkeletonGraph& graph() const { return graph_; }
    std::size_t parameter_count() const { return total_; }
    std::size_t buffer_count() const { return 4 * channel_total_; }
    std::vector<double> initial_parameters(std::uint64_t seed) const;
    // Running means 0 and variances 1.
    std::vector<double> initial_buffers() const;

    // Pre-projector representations f(x) for a batch. perturbations may be
    // empty or hold one (possibly null) entry per input.
    std::vector<Eigen::VectorXd> features(std::span<const double> params, std::span<const double> buffers,
                                          std::span<const SkeletonSequence> inputs,
                                          std::span<const GraphPerturbation* const> perturbations, NormMode mode,
                                          BatchTrace* trace = nullptr) const;
    // Single input with running statistics.
    Eigen::VectorXd features(std::span<const double> params, std::span<const double> buffers,
                             const SkeletonSequence& input, const GraphPerturbation* perturbation = nullptr) const;

    // h(f) followed by L2 normalization.
    Eigen::VectorXd project(std::span<const double> params, const Eigen::VectorXd& features,
                            Trace* trace = nullptr) const;

    std::vector<Eigen::VectorXd> embed(std::span<const double> params, std::span<const double> buffers,
                                       std::span<const SkeletonSequence> inputs,
                                       std::span<const GraphPerturbation* const> perturbations, NormMode mode,
                                       BatchTrace* trace = nullptr) const;
    Eigen::VectorXd embed(std::span<const double> params, std::span<const double> buffers,
                          const SkeletonSequence& input, const GraphPerturbation* perturbation = nullptr) const;

    // Accumulate dLoss/dparams into grad. Batch statistics are differentiated
    // through, running statistics are constants.
    void backward_embedding(std::span<const double> params, const BatchTrace& trace,
                            std::span<const Eigen::VectorXd> d_embedding, std::span<double> grad) const;
    void backward_features(std::span<const double> params, const BatchTrace& trace,
                           std::span<const Eigen::VectorXd> d_features, std::span<double> grad) const;

    // buffers <- (1 - rate) * buffers + rate * batch statistics of trace.
    void update_buffers(std::span<double> buffers, const BatchTrace& trace, double rate) const;

private:
    struct BlockLayout {
        int in, out, stride;
        std::size_t wg, g1, b1, wt, g2, b2;  // parameter offsets
        std::size_t stats;                   // buffer offset: mean1, var1, mean2, var2
    };

    Eigen::MatrixXd normalized_adjacency(const EdgeEdit* edit) const;
    void check_input(const SkeletonSequence& input) const;
    Eigen::VectorXd project_backward(std::span<const double> params, const Trace& trace,
                                     const Eigen::VectorXd& d_embedding, std::span<double> grad) const;

    EncoderConfig config_;
    SkeletonGraph graph_;
    std::vector<BlockLayout> blocks_;
    std::size_t w1_ = 0, b1_ = 0, w2_ = 0, b2_ = 0, total_ = 0, channel_total_ = 0;
};

struct EncoderState {
    EncoderConfig config;
    SkeletonGraph graph;
    std::vector<double> query;    // encoder + projector, trained by gradients
    std::vector<double> key;      // momentum twin
    std::vector<double> buffers;  // running batch-norm statistics, shared by both twins

    GraphEncoder encoder() const { return GraphEncoder(config, graph); }
};

EncoderState init_state(const EncoderConfig& config, const SkeletonGraph& graph, std::uint64_t seed);

// Eval-mode forward passes (running statistics).
Eigen::VectorXd encode_query(const EncoderState& state, const SkeletonSequence& view,
                             const GraphPerturbation* perturbation = nullptr);
Eigen::VectorXd encode_key(const EncoderState& state, const SkeletonSequence& view,
                           const GraphPerturbation* perturbation = nullptr);

// key <- m * key + (1 - m) * query
void momentum_update(EncoderState& state, double m);

// FNV-1a over the raw bytes of a parameter vector.
std::uint64_t parameter_checksum(std::span<const double> params);

}  // namespace hiclr
