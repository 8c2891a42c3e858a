#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "hiclr/augment.hpp"
#include "hiclr/contrastive.hpp"
#include "hiclr/encoder.hpp"
#include "hiclr/skeleton.hpp"

namespace hiclr {

struct TrainConfig {
    double temperature = 0.07;
    double momentum = 0.999;
    double lambda_h = 0.5;
    int queue_size = 4096;
    std::vector<std::string> arrangement{"BA", "NA", "Mask"};
    SimFunction sim = SimFunction::kl;
    int epochs = 50;
    int batch_size = 32;
    // Learning rate at batch 128; the effective rate scales linearly with batch size.
    double learning_rate = 0.1;
    double sgd_momentum = 0.9;
    double weight_decay = 1e-4;
    Stream stream = Stream::joint;
    int target_frames = 50;
    int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 keeps only the final one
    AugmentOptions augment;
    EncoderConfig encoder;

    int branches() const { return static_cast<int>(arrangement.size()); }
    double scaled_learning_rate() const { return learning_rate * batch_size / 128.0; }
    // "skeletonclr" for the single-branch, lambda_h = 0 objective, otherwise "hiclr".
    std::string objective_tag() const;
    void validate() const;

    friend bool operator==(const TrainConfig& a, const TrainConfig& b);
};

// Settings of the full-scale runs: 300 epochs, batch 128, queue 32768,
// lambda_h 0.5, k = 3 with [BA, NA, Mask], 128-d embeddings.
TrainConfig reference_train_config();

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const AugmentOptions& options);
AugmentOptions augment_options_from_json(const nlohmann::json& j);
nlohmann::json to_json(const EncoderConfig& config);
EncoderConfig encoder_config_from_json(const nlohmann::json& j);

struct OptimizerState {
    std::vector<double> velocity;
    std::int64_t step = 0;
};

// SGD with momentum and L2 weight decay: v <- mu v + (g + wd w); w <- w - lr v.
void sgd_step(std::vector<double>& params, std::span<const double> grad, OptimizerState& opt, double lr,
              double momentum, double weight_decay);

double cosine_learning_rate(double base, std::int64_t step, std::int64_t total_steps);

struct StepLog {
    std::int64_t step = 0;
    int epoch = 0;
    LossBreakdown loss;
    double learning_rate = 0.0;
    bool queue_warm = false;  // queue had been filled with real keys before this step
};

nlohmann::json to_json(const StepLog& log, const std::string& tag);

// One optimization step on a batch of preprocessed sequences. All sampling
// inside the step is derived from step_seed.
LossBreakdown train_step(EncoderState& state, OptimizerState& optimizer, std::span<const SkeletonSequence> batch,
                         MemoryQueue& queue, const TrainConfig& config, double learning_rate,
                         std::uint64_t step_seed);

struct Checkpoint {
    TrainConfig config;
    std::uint64_t seed = 0;
    EncoderState state;
    OptimizerState optimizer;
    MemoryQueue queue;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct PretrainOptions {
    std::optional<std::filesystem::path> checkpoint_dir;
    std::optional<std::filesystem::path> resume_from;
    std::optional<std::int64_t> stop_after_steps;  // total step count at which to stop early
    std::function<void(const StepLog&)> on_step;
};

struct PretrainResult {
    Checkpoint checkpoint;
    std::vector<StepLog> log;
};

// Copies frames, joints and persons of the prepared data into the encoder config.
TrainConfig resolve_config(const TrainConfig& config, const Dataset& prepared);

PretrainResult pretrain(const Dataset& dataset, const TrainConfig& config, std::uint64_t seed,
                        const PretrainOptions& options = {});

}  // namespace hiclr
