#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "hiclr/eval.hpp"
#include "hiclr/skeleton.hpp"
#include "hiclr/training.hpp"

namespace hiclr {

// Where the train/test splits of an experiment come from.
//   synthetic: generated in memory from `synth`, then split
//   cache:     train.bin / test.bin written by `hiclr synth` (or explicit files)
//   ntu:       a directory of raw .skeleton files, cross-subject split
struct DatasetSpec {
    std::string kind = "synthetic";
    SynthSpec synth;
    std::uint64_t synth_seed = 1;
    double test_fraction = 0.2;
    std::uint64_t split_seed = 1;
    std::filesystem::path train_path;
    std::filesystem::path test_path;
    std::filesystem::path ntu_dir;
};

struct ExperimentConfig {
    std::string name = "run";
    DatasetSpec dataset;
    TrainConfig train;
    std::vector<Stream> streams{Stream::joint};
    std::vector<Protocol> protocols{Protocol::knn};
    int knn_k = 20;
    ProbeConfig probe;
    FinetuneConfig finetune;
    double semi_fraction = 0.1;
    bool fuse = false;
    std::vector<double> fusion_weights;  // empty: defaults per stream
    std::uint64_t seed = 0;
    std::filesystem::path output_dir = "runs/run";

    void validate() const;
};

nlohmann::json to_json(const SynthSpec& spec);
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j);

// Settings used by the acceptance checks on the synthetic 8-class data:
// 800/200 sequences, 50 epochs, batch 32, queue 1024, small encoder.
ExperimentConfig synthetic_benchmark_config();

// NTU60 cross-subject training subjects.
const std::vector<int>& ntu_train_subjects();

// Parses the SsssCcccPpppRrrrAaaa file-name convention; label is A - 1.
struct NtuFileInfo {
    int setup = 0, camera = 0, subject = 0, replication = 0, action = 0;
};
NtuFileInfo parse_ntu_file_name(const std::string& stem);

std::pair<Dataset, Dataset> load_experiment_data(const DatasetSpec& spec);

void write_json(const nlohmann::json& j, const std::filesystem::path& path);
nlohmann::json read_json(const std::filesystem::path& path);
std::vector<nlohmann::json> read_json_lines(const std::filesystem::path& path);

// --- commands -------------------------------------------------------------

// Writes train.bin (and test.bin when test_fraction > 0) under out.
std::vector<std::filesystem::path> cmd_synth(const SynthSpec& spec, std::uint64_t seed, double test_fraction,
                                             std::uint64_t split_seed, const std::filesystem::path& out);

struct PretrainRun {
    Stream stream = Stream::joint;
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    LossBreakdown final_loss;
    std::int64_t steps = 0;
    std::vector<double> epoch_loss;  // mean total loss per epoch of this invocation
};

struct PretrainControls {
    bool resume = false;  // continue from <stream>/checkpoint.bin when present
    std::optional<std::int64_t> stop_after_steps;
};

// One pretraining run per configured stream, into output_dir/<stream>/.
std::vector<PretrainRun> cmd_pretrain(const ExperimentConfig& config, const PretrainControls& controls = {});

// Checkpoints to evaluate: either a run directory (one checkpoint per stream
// under <dir>/<stream>/checkpoint.bin) or a single checkpoint file.
struct EvalInputs {
    std::filesystem::path run_dir;
    std::filesystem::path checkpoint;
};

struct EvalOutput {
    std::vector<EvalReport> reports;
    std::vector<std::filesystem::path> files;
};

// Runs every protocol on every stream and optionally fuses the streams.
EvalOutput cmd_eval(const ExperimentConfig& config, const EvalInputs& inputs);

struct AblationRun {
    std::string name;
    nlohmann::json overrides = nlohmann::json::object();  // merge patch onto the base config
};

struct AblationConfig {
    ExperimentConfig base;
    std::vector<AblationRun> runs;
    std::vector<std::uint64_t> seeds{0};
};

nlohmann::json to_json(const AblationConfig& config);
AblationConfig ablation_config_from_json(const nlohmann::json& j);

struct AblationRow {
    std::string name;
    std::string objective;
    std::vector<double> accuracy;  // one per seed, first protocol, first stream
    double median = 0.0;
    std::vector<double> loss_curve;  // mean loss per epoch, first seed
};

// Preset matrices: the five arrangements [BA,NA,Mask], [NA,BA,Mask],
// [Mask,BA,NA], [BA+NA,Mask], [BA,NA+Mask]; and sim in {cosine, l1, kl}.
AblationConfig arrangement_ablation(const ExperimentConfig& base, std::vector<std::uint64_t> seeds);
AblationConfig sim_ablation(const ExperimentConfig& base, std::vector<std::uint64_t> seeds);

// Runs are executed sequentially, each with every seed in `seeds`.
std::vector<AblationRow> cmd_ablate(const AblationConfig& config);

// Renders loss curves of every log.jsonl under the given run directories.
std::filesystem::path cmd_plot(const std::vector<std::filesystem::path>& run_dirs,
                               const std::filesystem::path& out);

// Applies an RFC 7386 merge patch to the JSON form of a config.
ExperimentConfig apply_overrides(const ExperimentConfig& base, const nlohmann::json& patch);

double median(std::vector<double> values);

// Mean total loss per epoch from a step log.
std::vector<double> epoch_mean_loss(const std::vector<StepLog>& log);

}  // namespace hiclr
