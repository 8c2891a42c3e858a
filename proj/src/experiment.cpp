#include "hiclr/experiment.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hiclr/error.hpp"
#include "hiclr/plot.hpp"
#include "json_reader.hpp"

namespace hiclr {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
    require(!name.empty(), ErrorKind::config, "experiment name must not be empty");
    train.validate();
    require(!streams.empty(), ErrorKind::config, "at least one stream is required");
    require(std::set<Stream>(streams.begin(), streams.end()).size() == streams.size(), ErrorKind::config,
            "streams must not repeat");
    require(!protocols.empty(), ErrorKind::config, "at least one evaluation protocol is required");
    require(std::set<Protocol>(protocols.begin(), protocols.end()).size() == protocols.size(), ErrorKind::config,
            "protocols must not repeat");
    require(knn_k >= 1, ErrorKind::config, "knn_k must be positive");
    require(semi_fraction > 0.0 && semi_fraction <= 1.0, ErrorKind::config, "semi_fraction must lie in (0, 1]");
    require(!fuse || streams.size() >= 2, ErrorKind::config, "fusion needs at least two streams");
    require(fusion_weights.empty() || fusion_weights.size() == streams.size(), ErrorKind::config,
            "fusion_weights needs one weight per stream");
    for (double w : fusion_weights) require(w >= 0.0, ErrorKind::config, "fusion weights must be nonnegative");

    const auto& d = dataset;
    if (d.kind == "synthetic") {
        require(d.test_fraction > 0.0 && d.test_fraction < 1.0, ErrorKind::config,
                "dataset.test_fraction must lie in (0, 1)");
    } else if (d.kind == "cache") {
        require(fs::is_regular_file(d.train_path), ErrorKind::config,
                "dataset.train_path does not exist: " + d.train_path.string());
        require(fs::is_regular_file(d.test_path), ErrorKind::config,
                "dataset.test_path does not exist: " + d.test_path.string());
    } else if (d.kind == "ntu") {
        require(fs::is_directory(d.ntu_dir), ErrorKind::config,
                "dataset.ntu_dir is not a directory: " + d.ntu_dir.string());
    } else {
        fail(ErrorKind::config, "unknown dataset kind '" + d.kind + "' (valid: synthetic, cache, ntu)");
    }
}

json to_json(const SynthSpec& s) {
    return {{"class_count", s.class_count},
            {"sequences_per_class", s.sequences_per_class},
            {"joints", s.joints},
            {"frames", s.frames},
            {"persons", s.persons},
            {"noise_scale", s.noise_scale},
            {"motion_amplitude", s.motion_amplitude},
            {"distractor_ratio", s.distractor_ratio},
            {"yaw_range_degrees", s.yaw_range_degrees},
            {"scale_jitter", s.scale_jitter}};
}

SynthSpec synth_spec_from_json(const json& j) {
    SynthSpec s;
    Reader r(j, "synth");
    r.read("class_count", s.class_count);
    r.read("sequences_per_class", s.sequences_per_class);
    r.read("joints", s.joints);
    r.read("frames", s.frames);
    r.read("persons", s.persons);
    r.read("noise_scale", s.noise_scale);
    r.read("motion_amplitude", s.motion_amplitude);
    r.read("distractor_ratio", s.distractor_ratio);
    r.read("yaw_range_degrees", s.yaw_range_degrees);
    r.read("scale_jitter", s.scale_jitter);
    return s;
}

json to_json(const DatasetSpec& d) {
    return {{"kind", d.kind},
            {"synth", to_json(d.synth)},
            {"synth_seed", d.synth_seed},
            {"test_fraction", d.test_fraction},
            {"split_seed", d.split_seed},
            {"train_path", d.train_path.string()},
            {"test_path", d.test_path.string()},
            {"ntu_dir", d.ntu_dir.string()}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
    DatasetSpec d;
    Reader r(j, "dataset");
    r.read("kind", d.kind);
    if (const json* s = r.child("synth")) d.synth = synth_spec_from_json(*s);
    r.read("synth_seed", d.synth_seed);
    r.read("test_fraction", d.test_fraction);
    r.read("split_seed", d.split_seed);
    std::string train_path, test_path, ntu_dir;
    r.read("train_path", train_path);
    r.read("test_path", test_path);
    r.read("ntu_dir", ntu_dir);
    d.train_path = train_path;
    d.test_path = test_path;
    d.ntu_dir = ntu_dir;
    return d;
}

json to_json(const ExperimentConfig& c) {
    json streams = json::array(), protocols = json::array();
    for (Stream s : c.streams) streams.push_back(to_string(s));
    for (Protocol p : c.protocols) protocols.push_back(to_string(p));
    return {{"name", c.name},
            {"seed", c.seed},
            {"output_dir", c.output_dir.string()},
            {"dataset", to_json(c.dataset)},
            {"train", to_json(c.train)},
            {"streams", streams},
            {"protocols", protocols},
            {"knn_k", c.knn_k},
            {"probe", to_json(c.probe)},
            {"finetune", to_json(c.finetune)},
            {"semi_fraction", c.semi_fraction},
            {"fuse", c.fuse},
            {"fusion_weights", c.fusion_weights}};
}

ExperimentConfig experiment_config_from_json(const json& j) {
    ExperimentConfig c;
    {
        Reader r(j, "experiment");
        r.read("name", c.name);
        r.read("seed", c.seed);
        std::string out = c.output_dir.string();
        r.read("output_dir", out);
        c.output_dir = out;
        if (const json* d = r.child("dataset")) c.dataset = dataset_spec_from_json(*d);
        if (const json* t = r.child("train")) c.train = train_config_from_json(*t);
        std::vector<std::string> names;
        r.read("streams", names);
        if (!names.empty()) {
            c.streams.clear();
            for (const auto& n : names) c.streams.push_back(parse_stream(n));
        }
        names.clear();
        r.read("protocols", names);
        if (!names.empty()) {
            c.protocols.clear();
            for (const auto& n : names) c.protocols.push_back(parse_protocol(n));
        }
        r.read("knn_k", c.knn_k);
        if (const json* p = r.child("probe")) c.probe = probe_config_from_json(*p);
        if (const json* f = r.child("finetune")) c.finetune = finetune_config_from_json(*f);
        r.read("semi_fraction", c.semi_fraction);
        r.read("fuse", c.fuse);
        r.read("fusion_weights", c.fusion_weights);
    }
    return c;
}

ExperimentConfig synthetic_benchmark_config() {
    ExperimentConfig c;
    c.name = "synthetic-benchmark";
    c.dataset.kind = "synthetic";
    c.dataset.synth.class_count = 8;
    c.dataset.synth.sequences_per_class = 125;
    // Narrow view and scale variation with a stronger class motion: at the
    // wider default ranges an encoder this small cannot separate the classes
    // within 50 epochs whatever the objective.
    c.dataset.synth.motion_amplitude = 0.6;
    c.dataset.synth.yaw_range_degrees = 20.0;
    c.dataset.synth.scale_jitter = 0.05;
    c.dataset.test_fraction = 0.2;

    TrainConfig& t = c.train;
    t.epochs = 50;
    t.batch_size = 32;
    t.queue_size = 1024;
    t.target_frames = 32;
    t.learning_rate = 0.01;
    t.momentum = 0.99;
    t.augment.mask_probability = 0.85;
    t.encoder.widths = {8, 16, 32};
    t.encoder.strides = {1, 2, 2};
    t.encoder.temporal_kernel = 3;
    t.encoder.embed_dim = 32;
    c.protocols = {Protocol::knn};
    return c;
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const json& patch) {
    require(patch.is_object(), ErrorKind::config, "overrides must be a mapping");
    json j = to_json(base);
    j.merge_patch(patch);
    return experiment_config_from_json(j);
}

// ---------------------------------------------------------------------------
// Data

const std::vector<int>& ntu_train_subjects() {
    static const std::vector<int> subjects = {1,  2,  4,  5,  8,  9,  13, 14, 15, 16,
                                              17, 18, 19, 25, 27, 28, 31, 34, 35, 38};
    return subjects;
}

NtuFileInfo parse_ntu_file_name(const std::string& stem) {
    NtuFileInfo info;
    char tail = 0;
    const int got = std::sscanf(stem.c_str(), "S%3dC%3dP%3dR%3dA%3d%c", &info.setup, &info.camera, &info.subject,
                                &info.replication, &info.action, &tail);
    require(got == 5 && info.action >= 1, ErrorKind::parse,
            "file name '" + stem + "' does not follow the SsssCcccPpppRrrrAaaa convention");
    return info;
}

namespace {

Dataset load_ntu_directory(const fs::path& dir, bool want_train) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".skeleton") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    require(!files.empty(), ErrorKind::empty_input, "no .skeleton files in " + dir.string());

    const auto& subjects = ntu_train_subjects();
    Dataset d;
    d.graph = ntu25_graph();
    d.split = want_train ? SplitTag::train : SplitTag::test;
    for (const auto& f : files) {
        const NtuFileInfo info = parse_ntu_file_name(f.stem().string());
        d.class_count = std::max(d.class_count, info.action);
        const bool is_train = std::find(subjects.begin(), subjects.end(), info.subject) != subjects.end();
        if (is_train != want_train) continue;
        SkeletonSequence seq = load_ntu_skeleton(f);
        seq.label = info.action - 1;
        seq.subject_id = info.subject;
        seq.view_id = info.camera;
        d.sequences.push_back(std::move(seq));
    }
    require(!d.sequences.empty(), ErrorKind::empty_input,
            std::string("no ") + (want_train ? "training" : "test") + " subjects among the files in " + dir.string());
    d.validate();
    return d;
}

}  // namespace

std::pair<Dataset, Dataset> load_experiment_data(const DatasetSpec& spec) {
    if (spec.kind == "synthetic") {
        auto [train, test] = stratified_split(synth_generate(spec.synth, spec.synth_seed), spec.test_fraction,
                                              spec.split_seed);
        return {std::move(train), std::move(test)};
    }
    if (spec.kind == "cache") {
        Dataset train = read_dataset(spec.train_path);
        Dataset test = read_dataset(spec.test_path);
        require(train.graph.num_joints == test.graph.num_joints, ErrorKind::shape,
                "train and test caches use different skeletons");
        require(train.class_count == test.class_count, ErrorKind::shape,
                "train and test caches disagree on the class count");
        train.split = SplitTag::train;
        test.split = SplitTag::test;
        return {std::move(train), std::move(test)};
    }
    if (spec.kind == "ntu") {
        Dataset train = load_ntu_directory(spec.ntu_dir, true);
        Dataset test = load_ntu_directory(spec.ntu_dir, false);
        return {std::move(train), std::move(test)};
    }
    fail(ErrorKind::config, "unknown dataset kind '" + spec.kind + "' (valid: synthetic, cache, ntu)");
}

// ---------------------------------------------------------------------------
// Files

namespace {

void write_text(const std::string& text, const fs::path& path) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << text;
    out.close();
    require(static_cast<bool>(out), ErrorKind::io, "cannot write " + path.string());
}

void make_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    require(!ec && fs::is_directory(dir), ErrorKind::io, "cannot create directory " + dir.string());
}

}  // namespace

void write_json(const json& j, const fs::path& path) { write_text(j.dump(2) + "\n", path); }

json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, path.string() + ": " + e.what());
    }
}

std::vector<json> read_json_lines(const fs::path& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
    std::vector<json> lines;
    std::string line;
    for (int number = 1; std::getline(in, line); ++number) {
        if (line.empty()) continue;
        try {
            lines.push_back(json::parse(line));
        } catch (const json::exception&) {
            fail(ErrorKind::parse, path.string() + ":" + std::to_string(number) + ": malformed JSON line");
        }
    }
    return lines;
}

double median(std::vector<double> values) {
    require(!values.empty(), ErrorKind::empty_input, "median of an empty list");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    return n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::vector<double> epoch_mean_loss(const std::vector<StepLog>& log) {
    std::map<int, std::pair<double, int>> acc;
    for (const auto& e : log) {
        auto& [sum, count] = acc[e.epoch];
        sum += e.loss.total;
        ++count;
    }
    std::vector<double> out;
    for (const auto& [epoch, sc] : acc) out.push_back(sc.first / sc.second);
    return out;
}

// ---------------------------------------------------------------------------
// Commands

std::vector<fs::path> cmd_synth(const SynthSpec& spec, std::uint64_t seed, double test_fraction,
                                std::uint64_t split_seed, const fs::path& out) {
    require(test_fraction >= 0.0 && test_fraction < 1.0, ErrorKind::config, "test fraction must lie in [0, 1)");
    make_dir(out);
    write_json({{"synth", to_json(spec)}, {"seed", seed}, {"test_fraction", test_fraction}, {"split_seed", split_seed}},
               out / "synth_config.json");
    Dataset all = synth_generate(spec, seed);
    if (test_fraction == 0.0) {
        write_dataset(all, out / "train.bin");
        return {out / "train.bin"};
    }
    auto [train, test] = stratified_split(all, test_fraction, split_seed);
    write_dataset(train, out / "train.bin");
    write_dataset(test, out / "test.bin");
    return {out / "train.bin", out / "test.bin"};
}

std::vector<PretrainRun> cmd_pretrain(const ExperimentConfig& config, const PretrainControls& controls) {
    config.validate();
    make_dir(config.output_dir);
    write_json(to_json(config), config.output_dir / "config.json");

    const Dataset train = load_experiment_data(config.dataset).first;
    std::vector<PretrainRun> runs;
    for (Stream stream : config.streams) {
        TrainConfig tc = config.train;
        tc.stream = stream;
        const fs::path dir = config.output_dir / to_string(stream);
        make_dir(dir);

        PretrainRun run;
        run.stream = stream;
        run.checkpoint = dir / "checkpoint.bin";
        run.log = dir / "log.jsonl";

        PretrainOptions options;
        options.checkpoint_dir = dir;
        options.stop_after_steps = controls.stop_after_steps;
        const bool resuming = controls.resume && fs::exists(run.checkpoint);
        if (resuming) options.resume_from = run.checkpoint;

        std::ofstream log(run.log, resuming ? std::ios::app : std::ios::trunc);
        require(static_cast<bool>(log), ErrorKind::io, "cannot write " + run.log.string());
        const std::string tag = tc.objective_tag();
        options.on_step = [&](const StepLog& entry) { log << to_json(entry, tag).dump() << '\n'; };

        PretrainResult result = pretrain(train, tc, config.seed, options);
        log.close();
        require(static_cast<bool>(log), ErrorKind::io, "cannot write " + run.log.string());
        if (!result.log.empty()) run.final_loss = result.log.back().loss;
        run.steps = result.checkpoint.optimizer.step;
        run.epoch_loss = epoch_mean_loss(result.log);
        runs.push_back(std::move(run));
    }
    return runs;
}

namespace {

double default_fusion_weight(Stream s) {
    switch (s) {
        case Stream::joint: return kDefaultFusionWeights[0];
        case Stream::bone: return kDefaultFusionWeights[1];
        case Stream::motion: return kDefaultFusionWeights[2];
    }
    return 0.0;
}

EvalReport run_protocol(Protocol protocol, const ExperimentConfig& c, const EncoderState& state,
                        const Dataset& train, const Dataset& test, Stream stream) {
    EvalReport report;
    switch (protocol) {
        case Protocol::knn:
            report = knn_eval(extract_features(state, train, stream), extract_features(state, test, stream), c.knn_k);
            break;
        case Protocol::linear: report = linear_eval(state, train, test, stream, c.probe); break;
        case Protocol::semi:
            report = semi_supervised_eval(state, train, c.semi_fraction, test, stream, c.finetune);
            break;
        case Protocol::finetune: report = supervised_eval(state, train, test, stream, c.finetune); break;
    }
    report.stream = to_string(stream);
    return report;
}

}  // namespace

EvalOutput cmd_eval(const ExperimentConfig& config, const EvalInputs& inputs) {
    config.validate();
    require(inputs.run_dir.empty() != inputs.checkpoint.empty(), ErrorKind::config,
            "give exactly one of a run directory or a checkpoint file");

    std::vector<fs::path> checkpoints;
    if (!inputs.checkpoint.empty()) {
        require(config.streams.size() == 1, ErrorKind::config,
                "a single checkpoint covers one stream; use a run directory for several streams");
        checkpoints.push_back(inputs.checkpoint);
    } else {
        for (Stream s : config.streams) {
            const fs::path p = inputs.run_dir / to_string(s) / "checkpoint.bin";
            require(fs::is_regular_file(p), ErrorKind::config,
                    std::string("run directory has no checkpoint for the ") + to_string(s) + " stream: " + p.string());
            checkpoints.push_back(p);
        }
    }
    std::vector<Checkpoint> loaded;
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        loaded.push_back(load_checkpoint(checkpoints[i]));
        require(loaded.back().config.stream == config.streams[i], ErrorKind::config,
                "checkpoint " + checkpoints[i].string() + " was trained on the " +
                    to_string(loaded.back().config.stream) + " stream, not " + to_string(config.streams[i]));
    }

    make_dir(config.output_dir);
    write_json(to_json(config), config.output_dir / "eval_config.json");
    const auto [train, test] = load_experiment_data(config.dataset);

    std::vector<double> weights = config.fusion_weights;
    if (weights.empty())
        for (Stream s : config.streams) weights.push_back(default_fusion_weight(s));

    EvalOutput out;
    const fs::path report_dir = config.output_dir / "reports";
    for (Protocol protocol : config.protocols) {
        std::vector<EvalReport> per_stream;
        for (std::size_t i = 0; i < config.streams.size(); ++i) {
            per_stream.push_back(run_protocol(protocol, config, loaded[i].state, train, test, config.streams[i]));
            const fs::path file =
                report_dir / (std::string(to_string(protocol)) + "_" + to_string(config.streams[i]) + ".json");
            write_json(to_json(per_stream.back()), file);
            out.files.push_back(file);
        }
        out.reports.insert(out.reports.end(), per_stream.begin(), per_stream.end());
        if (config.fuse) {
            EvalReport fused = ensemble_fuse(per_stream, weights);
            const fs::path file = report_dir / (std::string(to_string(protocol)) + "_fused.json");
            write_json(to_json(fused), file);
            out.files.push_back(file);
            out.reports.push_back(std::move(fused));
        }
    }
    return out;
}

json to_json(const AblationConfig& c) {
    json runs = json::array();
    for (const auto& r : c.runs) runs.push_back({{"name", r.name}, {"overrides", r.overrides}});
    return {{"base", to_json(c.base)}, {"runs", runs}, {"seeds", c.seeds}};
}

AblationConfig ablation_config_from_json(const json& j) {
    AblationConfig c;
    Reader r(j, "ablation");
    if (const json* b = r.child("base")) c.base = experiment_config_from_json(*b);
    r.read("seeds", c.seeds);
    if (const json* runs = r.child("runs")) {
        require(runs->is_array(), ErrorKind::config, "ablation.runs must be a list");
        for (const json& item : *runs) {
            AblationRun run;
            Reader rr(item, "ablation run");
            rr.read("name", run.name);
            if (const json* o = rr.child("overrides")) run.overrides = *o;
            c.runs.push_back(std::move(run));
        }
    }
    return c;
}

AblationConfig arrangement_ablation(const ExperimentConfig& base, std::vector<std::uint64_t> seeds) {
    AblationConfig c;
    c.base = base;
    c.seeds = std::move(seeds);
    const std::vector<std::vector<std::string>> rows = {
        {"BA", "NA", "Mask"}, {"NA", "BA", "Mask"}, {"Mask", "BA", "NA"}, {"BA+NA", "Mask"}, {"BA", "NA+Mask"}};
    for (const auto& arrangement : rows) {
        std::string name;
        for (const auto& g : arrangement) name += (name.empty() ? "" : "-") + g;
        c.runs.push_back({name, {{"train", {{"arrangement", arrangement}}}}});
    }
    return c;
}

AblationConfig sim_ablation(const ExperimentConfig& base, std::vector<std::uint64_t> seeds) {
    AblationConfig c;
    c.base = base;
    c.seeds = std::move(seeds);
    for (const char* sim : {"cosine", "l1", "kl"}) c.runs.push_back({sim, {{"train", {{"sim", sim}}}}});
    return c;
}

std::vector<AblationRow> cmd_ablate(const AblationConfig& config) {
    require(!config.runs.empty(), ErrorKind::config, "ablation matrix is empty");
    require(!config.seeds.empty(), ErrorKind::config, "ablation needs at least one seed");
    std::set<std::string> names;
    std::vector<ExperimentConfig> resolved;
    for (const auto& run : config.runs) {
        require(!run.name.empty(), ErrorKind::config, "ablation run without a name");
        require(run.name.find_first_of("/\\") == std::string::npos && run.name != "." && run.name != "..",
                ErrorKind::config, "ablation run name '" + run.name + "' is not a valid directory name");
        require(names.insert(run.name).second, ErrorKind::config, "duplicate ablation run name '" + run.name + "'");
        ExperimentConfig c = apply_overrides(config.base, run.overrides);
        c.name = run.name;
        c.validate();
        resolved.push_back(std::move(c));
    }

    const fs::path out = config.base.output_dir;
    make_dir(out);
    write_json(to_json(config), out / "ablation_config.json");

    std::vector<AblationRow> rows;
    for (std::size_t r = 0; r < resolved.size(); ++r) {
        AblationRow row;
        row.name = config.runs[r].name;
        row.objective = resolved[r].train.objective_tag();
        for (std::size_t s = 0; s < config.seeds.size(); ++s) {
            ExperimentConfig c = resolved[r];
            c.seed = config.seeds[s];
            c.output_dir = out / row.name / ("seed" + std::to_string(c.seed));
            const auto runs = cmd_pretrain(c);
            if (s == 0) row.loss_curve = runs.front().epoch_loss;
            const EvalOutput eval = cmd_eval(c, EvalInputs{c.output_dir, {}});
            row.accuracy.push_back(eval.reports.front().top1_accuracy);
        }
        row.median = median(row.accuracy);
        rows.push_back(std::move(row));
    }

    std::ostringstream md, csv;
    md << "| run | objective |";
    csv << "run,objective";
    for (auto seed : config.seeds) {
        md << " seed " << seed << " |";
        csv << ",seed" << seed;
    }
    md << " median |\n|---|---|";
    csv << ",median\n";
    for (std::size_t s = 0; s < config.seeds.size(); ++s) md << "---|";
    md << "---|\n";
    md.precision(4);
    csv.precision(6);
    json results = json::array();
    for (const auto& row : rows) {
        md << "| " << row.name << " | " << row.objective << " |";
        csv << row.name << ',' << row.objective;
        for (double a : row.accuracy) {
            md << ' ' << 100.0 * a << " |";
            csv << ',' << a;
        }
        md << ' ' << 100.0 * row.median << " |\n";
        csv << ',' << row.median << '\n';
        results.push_back({{"name", row.name},
                           {"objective", row.objective},
                           {"seeds", config.seeds},
                           {"accuracy", row.accuracy},
                           {"median", row.median},
                           {"loss_curve", row.loss_curve}});
    }
    write_text(md.str(), out / "table.md");
    write_text(csv.str(), out / "table.csv");
    write_json(results, out / "results.json");

    std::vector<std::string> labels;
    std::vector<double> medians;
    std::vector<PlotSeries> curves;
    for (const auto& row : rows) {
        labels.push_back(row.name);
        medians.push_back(100.0 * row.median);
        curves.push_back({row.name, row.loss_curve});
    }
    const std::string protocol = to_string(config.base.protocols.front());
    write_text(bar_chart_svg("median top-1 (" + protocol + ")", "accuracy (%)", labels, medians),
               out / "accuracy.svg");
    write_text(line_chart_svg("pretraining loss", "epoch", "mean total loss", curves), out / "loss.svg");
    return rows;
}

fs::path cmd_plot(const std::vector<fs::path>& run_dirs, const fs::path& out) {
    require(!run_dirs.empty(), ErrorKind::config, "no run directories to plot");
    json dirs = json::array();
    for (const auto& dir : run_dirs) dirs.push_back(dir.string());
    write_json({{"runs", dirs}, {"output", out.string()}},
               out.parent_path() / (out.stem().string() + "_config.json"));
    std::vector<PlotSeries> series;
    for (const auto& dir : run_dirs) {
        require(fs::is_directory(dir), ErrorKind::io, "not a directory: " + dir.string());
        std::vector<fs::path> logs;
        for (const auto& entry : fs::recursive_directory_iterator(dir))
            if (entry.is_regular_file() && entry.path().filename() == "log.jsonl") logs.push_back(entry.path());
        std::sort(logs.begin(), logs.end());
        for (const auto& log : logs) {
            std::map<int, std::pair<double, int>> acc;
            for (const json& line : read_json_lines(log)) {
                try {
                    auto& [sum, count] = acc[line.at("epoch").get<int>()];
                    sum += line.at("total").get<double>();
                    ++count;
                } catch (const json::exception&) {
                    fail(ErrorKind::parse, log.string() + ": log line without epoch/total");
                }
            }
            PlotSeries s;
            s.name = (fs::weakly_canonical(dir).filename() / fs::relative(log.parent_path(), dir)).generic_string();
            for (const auto& [epoch, sc] : acc) s.values.push_back(sc.first / sc.second);
            series.push_back(std::move(s));
        }
    }
    require(!series.empty(), ErrorKind::empty_input, "no log.jsonl found under the given run directories");
    write_text(line_chart_svg("pretraining loss", "epoch", "mean total loss", series), out);
    return out;
}

}  // namespace hiclr
