#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "hiclr/encoder.hpp"
#include "hiclr/skeleton.hpp"

namespace hiclr {

enum class Protocol { knn, linear, semi, finetune };

Protocol parse_protocol(const std::string& name);
const char* to_string(Protocol protocol);

struct FeatureBank {
    Eigen::MatrixXd features;  // N x latent, pre-projector
    std::vector<int> labels;
    std::vector<std::uint64_t> sample_keys;  // content hash of each raw sequence, for order checks
    SplitTag split = SplitTag::train;
    int class_count = 0;

    std::size_t size() const { return labels.size(); }
};

struct EvalReport {
    Protocol protocol = Protocol::knn;
    std::string stream = "joint";
    double top1_accuracy = 0.0;
    std::vector<double> per_class_accuracy;
    std::vector<int> per_class_count;
    nlohmann::json config = nlohmann::json::object();
    // Per-sample class scores (rows sum to one), labels and predictions in test order.
    Eigen::MatrixXd scores;
    std::vector<int> labels;
    std::vector<int> predictions;
    std::vector<std::uint64_t> sample_keys;
};

nlohmann::json to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

// Hash identifying a raw sequence (coordinates and label).
std::uint64_t sample_key(const SkeletonSequence& seq);

// Eval-mode forward of the query encoder on un-augmented, preprocessed
// sequences. Takes the raw dataset; stream derivation and resampling to the
// encoder's frame count happen here.
FeatureBank extract_features(const EncoderState& state, const Dataset& dataset, Stream stream);

// Builds a report from a score matrix; ties in the argmax go to the lowest class.
EvalReport make_report(Protocol protocol, const Eigen::MatrixXd& scores, std::vector<int> labels,
                       std::vector<std::uint64_t> sample_keys, int class_count);

// Cosine-similarity KNN with majority vote. Ties are broken by summed
// similarity, then by the lowest class id. Scores are vote fractions.
EvalReport knn_eval(const FeatureBank& train, const FeatureBank& test, int k_neighbors = 20);

struct ProbeConfig {
    int epochs = 80;
    int batch_size = 64;
    double learning_rate = 0.1;
    double momentum = 0.9;
    double weight_decay = 0.0;
    std::vector<int> decay_epochs{50, 70};  // lr is multiplied by decay_factor at each
    double decay_factor = 0.1;
    bool standardize = true;  // z-score features with train statistics
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const ProbeConfig& config);
ProbeConfig probe_config_from_json(const nlohmann::json& j);

// Softmax regression on a fixed feature bank.
EvalReport train_linear_probe(const FeatureBank& train, const FeatureBank& test, const ProbeConfig& config);

// Linear probe on the frozen encoder; state is never written.
EvalReport linear_eval(const EncoderState& state, const Dataset& train, const Dataset& test, Stream stream,
                       const ProbeConfig& config = {});

struct FinetuneConfig {
    int epochs = 30;
    int batch_size = 16;
    double learning_rate = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<int> decay_epochs{20, 25};
    double decay_factor = 0.1;
    std::uint64_t seed = 0;
};

nlohmann::json to_json(const FinetuneConfig& config);
FinetuneConfig finetune_config_from_json(const nlohmann::json& j);

struct FinetuneResult {
    EvalReport report;
    std::vector<double> epoch_loss;  // mean training cross-entropy per epoch
};

// Trains encoder and a linear classifier together on all of train.
FinetuneResult finetune(const EncoderState& state, const Dataset& train, const Dataset& test, Stream stream,
                        const FinetuneConfig& config = {});
EvalReport supervised_eval(const EncoderState& state, const Dataset& train, const Dataset& test, Stream stream,
                           const FinetuneConfig& config = {});

// Stratified labelled subset: round(fraction * n_c) samples of each class,
// kept in dataset order. A class that would receive no sample is an error.
Dataset semi_supervised_subset(const Dataset& train, double fraction, std::uint64_t seed);

EvalReport semi_supervised_eval(const EncoderState& state, const Dataset& train, double fraction,
                                const Dataset& test, Stream stream, const FinetuneConfig& config = {});

// Weighted sum of per-stream scores. Default weights for joint, bone, motion.
inline const std::vector<double> kDefaultFusionWeights{0.6, 0.6, 0.4};

EvalReport ensemble_fuse(std::span<const EvalReport> reports, std::span<const double> weights);

}  // namespace hiclr
