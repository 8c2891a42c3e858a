// Command-line front end: synth, pretrain, eval, ablate, plot.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <regex>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "CLI11.hpp"
#include "json.hpp"

#include "hiclr/error.hpp"
#include "hiclr/experiment.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace hiclr;

namespace {

// Exit codes by error category.
int exit_code(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::config: return 2;
        case ErrorKind::parse: return 3;
        case ErrorKind::io: return 4;
        case ErrorKind::shape: return 5;
        case ErrorKind::empty_input: return 6;
        case ErrorKind::internal: return 70;
    }
    return 1;
}

json yaml_to_json(const YAML::Node& node) {
    switch (node.Type()) {
        case YAML::NodeType::Null:
        case YAML::NodeType::Undefined: return nullptr;
        case YAML::NodeType::Sequence: {
            json out = json::array();
            for (const auto& item : node) out.push_back(yaml_to_json(item));
            return out;
        }
        case YAML::NodeType::Map: {
            json out = json::object();
            for (const auto& kv : node) out[kv.first.as<std::string>()] = yaml_to_json(kv.second);
            return out;
        }
        case YAML::NodeType::Scalar: break;
    }
    const std::string text = node.Scalar();
    if (node.Tag() == "!") return text;  // quoted
    static const std::regex integer(R"([-+]?[0-9]+)");
    static const std::regex real(R"([-+]?([0-9]+\.?[0-9]*|\.[0-9]+)([eE][-+]?[0-9]+)?)");
    if (text == "true" || text == "True") return true;
    if (text == "false" || text == "False") return false;
    if (text == "~" || text == "null") return nullptr;
    if (std::regex_match(text, integer)) {
        if (text[0] == '-') return std::stoll(text);
        return std::stoull(text[0] == '+' ? text.substr(1) : text);
    }
    if (std::regex_match(text, real)) return std::stod(text);
    return text;
}

// YAML or JSON (JSON is a YAML subset, but keep its parser for clearer errors).
json load_config_file(const fs::path& path) {
    require(fs::is_regular_file(path), ErrorKind::io, "config file not found: " + path.string());
    if (path.extension() == ".json") return read_json(path);
    try {
        return yaml_to_json(YAML::LoadFile(path.string()));
    } catch (const YAML::Exception& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

// Flags collected into a merge patch; only flags given on the command line
// end up in the patch, so they win over file values and leave the rest alone.
struct ExperimentFlags {
    std::string config, out, data, ntu, name, sim;
    std::uint64_t seed = 0;
    int epochs = 0, batch_size = 0, queue_size = 0, knn_k = 0, frames = 0;
    double lr = 0, temperature = 0, momentum = 0, lambda_h = 0, mask_probability = 0, semi_fraction = 0;
    std::vector<std::string> arrangement, streams, protocols;
    std::vector<double> weights;
    bool benchmark = false, fuse = false;

    CLI::App* app = nullptr;
    bool given(const char* flag) const { return app->count(flag) > 0; }

    void add(CLI::App* sub, bool training) {
        app = sub;
        sub->add_option("--config", config, "YAML or JSON experiment config");
        sub->add_flag("--benchmark", benchmark, "start from the synthetic benchmark settings");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--name", name, "experiment name");
        sub->add_option("--seed", seed, "run seed");
        sub->add_option("--data", data, "directory holding train.bin and test.bin from `hiclr synth`");
        sub->add_option("--ntu", ntu, "directory of raw NTU .skeleton files (cross-subject split)");
        sub->add_option("--streams", streams, "joint, bone and/or motion");
        if (training) {
            sub->add_option("--epochs", epochs);
            sub->add_option("--batch-size", batch_size);
            sub->add_option("--queue-size", queue_size);
            sub->add_option("--frames", frames, "target frame count after resampling");
            sub->add_option("--lr", lr, "learning rate at batch 128");
            sub->add_option("--temperature", temperature);
            sub->add_option("--momentum", momentum, "key encoder momentum");
            sub->add_option("--lambda-h", lambda_h, "weight of the hierarchical loss");
            sub->add_option("--sim", sim, "kl, cosine or l1");
            sub->add_option("--arrangement", arrangement, "augmentation groups, weak to strong, e.g. BA NA Mask");
            sub->add_option("--mask-probability", mask_probability);
        }
        sub->add_option("--protocols", protocols, "knn, linear, semi and/or finetune");
        sub->add_option("--k", knn_k, "neighbors for knn");
        sub->add_option("--semi-fraction", semi_fraction, "labelled fraction for semi");
        sub->add_flag("--fuse", fuse, "also write a fused report over the streams");
        sub->add_option("--weights", weights, "fusion weights, one per stream");
    }

    json patch() const {
        json p = json::object();
        if (given("--name")) p["name"] = name;
        if (given("--seed")) p["seed"] = seed;
        if (given("--out")) p["output_dir"] = out;
        if (given("--data")) {
            p["dataset"]["kind"] = "cache";
            p["dataset"]["train_path"] = (fs::path(data) / "train.bin").string();
            p["dataset"]["test_path"] = (fs::path(data) / "test.bin").string();
        }
        if (given("--ntu")) {
            p["dataset"]["kind"] = "ntu";
            p["dataset"]["ntu_dir"] = ntu;
        }
        if (given("--streams")) p["streams"] = streams;
        if (app->get_option_no_throw("--epochs")) {
            if (given("--epochs")) p["train"]["epochs"] = epochs;
            if (given("--batch-size")) p["train"]["batch_size"] = batch_size;
            if (given("--queue-size")) p["train"]["queue_size"] = queue_size;
            if (given("--frames")) p["train"]["target_frames"] = frames;
            if (given("--lr")) p["train"]["learning_rate"] = lr;
            if (given("--temperature")) p["train"]["temperature"] = temperature;
            if (given("--momentum")) p["train"]["momentum"] = momentum;
            if (given("--lambda-h")) p["train"]["lambda_h"] = lambda_h;
            if (given("--sim")) p["train"]["sim"] = sim;
            if (given("--arrangement")) p["train"]["arrangement"] = arrangement;
            if (given("--mask-probability")) p["train"]["augment"]["mask_probability"] = mask_probability;
        }
        if (given("--protocols")) p["protocols"] = protocols;
        if (given("--k")) p["knn_k"] = knn_k;
        if (given("--semi-fraction")) p["semi_fraction"] = semi_fraction;
        if (given("--fuse")) p["fuse"] = fuse;
        if (given("--weights")) p["fusion_weights"] = weights;
        return p;
    }

    // Defaults, then the config file, then flags.
    ExperimentConfig resolve(std::optional<ExperimentConfig> base = std::nullopt) const {
        ExperimentConfig c = base ? *base : (benchmark ? synthetic_benchmark_config() : ExperimentConfig{});
        if (!config.empty()) c = apply_overrides(c, load_config_file(config));
        return apply_overrides(c, patch());
    }
};

void print_report_line(const EvalReport& r) {
    std::cout << to_string(r.protocol) << " " << r.stream << " top1 " << r.top1_accuracy << "\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Hierarchical contrastive pretraining for skeleton action representations"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate the synthetic dataset cache");
    SynthSpec spec;
    std::uint64_t synth_seed = 7, split_seed = 1;
    double test_fraction = 0.2;
    std::string synth_out, synth_config;
    synth->add_option("--out", synth_out, "output directory")->required();
    synth->add_option("--config", synth_config, "YAML or JSON generator spec");
    synth->add_option("--seed", synth_seed);
    synth->add_option("--classes", spec.class_count);
    synth->add_option("--per-class", spec.sequences_per_class);
    synth->add_option("--joints", spec.joints, "11, 25 or 5");
    synth->add_option("--frames", spec.frames);
    synth->add_option("--persons", spec.persons);
    synth->add_option("--noise", spec.noise_scale);
    synth->add_option("--test-fraction", test_fraction, "0 writes a single train.bin");
    synth->add_option("--split-seed", split_seed);

    // pretrain
    auto* pretrain_cmd = app.add_subcommand("pretrain", "contrastive pretraining, one checkpoint per stream");
    ExperimentFlags pretrain_flags;
    pretrain_flags.add(pretrain_cmd, true);
    bool resume = false;
    std::int64_t stop_after = -1;
    pretrain_cmd->add_flag("--resume", resume, "continue from checkpoints in the output directory");
    pretrain_cmd->add_option("--stop-after", stop_after, "stop once this many steps have run in total");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate pretrained checkpoints");
    ExperimentFlags eval_flags;
    eval_flags.add(eval_cmd, false);
    std::string run_dir, checkpoint;
    auto* run_opt = eval_cmd->add_option("--run", run_dir, "run directory written by pretrain");
    auto* ck_opt = eval_cmd->add_option("--checkpoint", checkpoint, "single checkpoint file");
    run_opt->excludes(ck_opt);

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "sequential runs varying one factor, with a summary table");
    ExperimentFlags ablate_flags;
    ablate_flags.add(ablate_cmd, true);
    std::string preset, matrix_file;
    std::vector<std::uint64_t> seeds;
    ablate_cmd->add_option("--preset", preset, "arrangement or sim")->check(CLI::IsMember({"arrangement", "sim"}));
    ablate_cmd->add_option("--matrix", matrix_file, "YAML or JSON file with base, runs and seeds");
    ablate_cmd->add_option("--seeds", seeds, "shared seeds for every run");

    // plot
    auto* plot_cmd = app.add_subcommand("plot", "plot pretraining loss curves of run directories");
    std::vector<std::string> plot_dirs;
    std::string plot_out;
    plot_cmd->add_option("runs", plot_dirs, "run directories")->required();
    plot_cmd->add_option("--out", plot_out, "SVG file (default <first run>/loss.svg)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth->parsed()) {
            // defaults, then the file, then explicit flags
            json j = to_json(SynthSpec{});
            if (!synth_config.empty()) j.merge_patch(load_config_file(synth_config));
            const json flags = to_json(spec);
            const std::pair<const char*, const char*> keys[] = {
                {"--classes", "class_count"}, {"--per-class", "sequences_per_class"}, {"--joints", "joints"},
                {"--frames", "frames"},       {"--persons", "persons"},                {"--noise", "noise_scale"}};
            for (const auto& [flag, key] : keys)
                if (synth->count(flag) > 0) j[key] = flags[key];
            spec = synth_spec_from_json(j);
            for (const auto& f : cmd_synth(spec, synth_seed, test_fraction, split_seed, synth_out))
                std::cout << "wrote " << f.string() << "\n";
        } else if (pretrain_cmd->parsed()) {
            const ExperimentConfig c = pretrain_flags.resolve();
            PretrainControls controls;
            controls.resume = resume;
            if (stop_after >= 0) controls.stop_after_steps = stop_after;
            for (const auto& run : cmd_pretrain(c, controls))
                std::cout << to_string(run.stream) << ": " << run.steps << " steps, final loss "
                          << run.final_loss.total << " (info_nce " << run.final_loss.info_nce << ", hierarchical "
                          << run.final_loss.hierarchical << ")\n  checkpoint " << run.checkpoint.string() << "\n";
        } else if (eval_cmd->parsed()) {
            EvalInputs inputs;
            std::optional<ExperimentConfig> base;
            if (!run_dir.empty()) {
                inputs.run_dir = run_dir;
                base = experiment_config_from_json(read_json(fs::path(run_dir) / "config.json"));
                base->output_dir = run_dir;
            } else {
                require(!checkpoint.empty(), ErrorKind::config, "eval needs --run or --checkpoint");
                inputs.checkpoint = checkpoint;
                ExperimentConfig c = eval_flags.benchmark ? synthetic_benchmark_config() : ExperimentConfig{};
                if (!eval_flags.given("--streams")) c.streams = {load_checkpoint(checkpoint).config.stream};
                c.output_dir = fs::path(checkpoint).parent_path();
                base = c;
            }
            const EvalOutput out = cmd_eval(eval_flags.resolve(base), inputs);
            for (const auto& r : out.reports) print_report_line(r);
            for (const auto& f : out.files) std::cout << "wrote " << f.string() << "\n";
        } else if (ablate_cmd->parsed()) {
            AblationConfig matrix;
            if (!matrix_file.empty()) {
                matrix = ablation_config_from_json(load_config_file(matrix_file));
                matrix.base = ablate_flags.resolve(matrix.base);
            } else {
                require(!preset.empty(), ErrorKind::config, "ablate needs --preset or --matrix");
                const ExperimentConfig base = ablate_flags.resolve();
                matrix = preset == "arrangement" ? arrangement_ablation(base, {base.seed})
                                                 : sim_ablation(base, {base.seed});
            }
            if (!seeds.empty()) matrix.seeds = seeds;
            for (const auto& row : cmd_ablate(matrix)) {
                std::cout << row.name << " (" << row.objective << "): median " << row.median << " over";
                for (double a : row.accuracy) std::cout << " " << a;
                std::cout << "\n";
            }
            std::cout << "wrote " << (matrix.base.output_dir / "table.md").string() << "\n";
        } else if (plot_cmd->parsed()) {
            std::vector<fs::path> dirs(plot_dirs.begin(), plot_dirs.end());
            const fs::path out = plot_out.empty() ? dirs.front() / "loss.svg" : fs::path(plot_out);
            std::cout << "wrote " << cmd_plot(dirs, out).string() << "\n";
        }
    } catch (const Error& e) {
        std::cerr << "hiclr: " << e.what() << "\n";
        return exit_code(e.kind());
    } catch (const std::exception& e) {
        std::cerr << "hiclr: internal error: " << e.what() << "\n";
        return exit_code(ErrorKind::internal);
    }
    return 0;
}
