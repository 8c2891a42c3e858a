#include "hiclr/training.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>

#include "hiclr/error.hpp"
#include "hiclr/random.hpp"
#include "json_reader.hpp"

namespace hiclr {

using Eigen::VectorXd;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

std::string TrainConfig::objective_tag() const {
    return branches() == 1 && lambda_h == 0.0 ? "skeletonclr" : "hiclr";
}

void TrainConfig::validate() const {
    require(temperature > 0.0, ErrorKind::config, "temperature must be positive");
    require(momentum >= 0.0 && momentum < 1.0, ErrorKind::config, "momentum must lie in [0, 1)");
    require(lambda_h >= 0.0, ErrorKind::config, "lambda_h must be nonnegative");
    require(queue_size >= 1, ErrorKind::config, "queue size must be positive");
    require(!arrangement.empty(), ErrorKind::config, "arrangement must list at least one augmentation group");
    for (const auto& g : arrangement) group_strategies(g);
    require(epochs >= 1, ErrorKind::config, "epochs must be positive");
    require(batch_size >= 1, ErrorKind::config, "batch size must be positive");
    require(batch_size <= queue_size, ErrorKind::config, "batch size must not exceed the queue size");
    require(learning_rate > 0.0, ErrorKind::config, "learning rate must be positive");
    require(sgd_momentum >= 0.0 && sgd_momentum < 1.0, ErrorKind::config, "SGD momentum must lie in [0, 1)");
    require(weight_decay >= 0.0, ErrorKind::config, "weight decay must be nonnegative");
    require(target_frames >= 1, ErrorKind::config, "target frame count must be positive");
    require(checkpoint_every >= 0, ErrorKind::config, "checkpoint interval must be nonnegative");
    encoder.validate();
}

bool operator==(const TrainConfig& a, const TrainConfig& b) { return to_json(a) == to_json(b); }

TrainConfig reference_train_config() {
    TrainConfig c;
    c.epochs = 300;
    c.batch_size = 128;
    c.queue_size = 32768;
    c.lambda_h = 0.5;
    c.arrangement = {"BA", "NA", "Mask"};
    c.encoder.embed_dim = 128;
    return c;
}

json to_json(const AugmentOptions& o) {
    return {{"shear_magnitude", o.shear_magnitude},
            {"crop_min_span", o.crop_min_span},
            {"flip_probability", o.flip_probability},
            {"rotation_max_degrees", o.rotation_max_degrees},
            {"noise_sigma", o.noise_sigma},
            {"blur_sigma_min", o.blur_sigma_min},
            {"blur_sigma_max", o.blur_sigma_max},
            {"channel_mask_probability", o.channel_mask_probability},
            {"mask_probability", o.mask_probability},
            {"mask_fill", o.mask_fill},
            {"edge_drop_probability", o.edge_drop_probability},
            {"edge_add_probability", o.edge_add_probability},
            {"edges_per_layer", o.edges_per_layer},
            {"adain_eps", o.adain_eps}};
}

json to_json(const EncoderConfig& c) {
    return {{"in_channels", c.in_channels},         {"frames", c.frames},
            {"joints", c.joints},                   {"persons", c.persons},
            {"widths", c.widths},                   {"strides", c.strides},
            {"temporal_kernel", c.temporal_kernel}, {"projector_hidden", c.projector_hidden},
            {"embed_dim", c.embed_dim}};
}

json to_json(const TrainConfig& c) {
    return {{"temperature", c.temperature},
            {"momentum", c.momentum},
            {"lambda_h", c.lambda_h},
            {"queue_size", c.queue_size},
            {"arrangement", c.arrangement},
            {"sim", to_string(c.sim)},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"sgd_momentum", c.sgd_momentum},
            {"weight_decay", c.weight_decay},
            {"stream", to_string(c.stream)},
            {"target_frames", c.target_frames},
            {"checkpoint_every", c.checkpoint_every},
            {"augment", to_json(c.augment)},
            {"encoder", to_json(c.encoder)}};
}

AugmentOptions augment_options_from_json(const json& j) {
    AugmentOptions o;
    Reader r(j, "augment");
    r.read("shear_magnitude", o.shear_magnitude);
    r.read("crop_min_span", o.crop_min_span);
    r.read("flip_probability", o.flip_probability);
    r.read("rotation_max_degrees", o.rotation_max_degrees);
    r.read("noise_sigma", o.noise_sigma);
    r.read("blur_sigma_min", o.blur_sigma_min);
    r.read("blur_sigma_max", o.blur_sigma_max);
    r.read("channel_mask_probability", o.channel_mask_probability);
    r.read("mask_probability", o.mask_probability);
    r.read("mask_fill", o.mask_fill);
    r.read("edge_drop_probability", o.edge_drop_probability);
    r.read("edge_add_probability", o.edge_add_probability);
    r.read("edges_per_layer", o.edges_per_layer);
    r.read("adain_eps", o.adain_eps);
    return o;
}

EncoderConfig encoder_config_from_json(const json& j) {
    EncoderConfig c;
    Reader r(j, "encoder");
    r.read("in_channels", c.in_channels);
    r.read("frames", c.frames);
    r.read("joints", c.joints);
    r.read("persons", c.persons);
    r.read("widths", c.widths);
    r.read("strides", c.strides);
    r.read("temporal_kernel", c.temporal_kernel);
    r.read("projector_hidden", c.projector_hidden);
    r.read("embed_dim", c.embed_dim);
    return c;
}

TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    {
        Reader r(j, "train");
        r.read("temperature", c.temperature);
        r.read("momentum", c.momentum);
        r.read("lambda_h", c.lambda_h);
        r.read("queue_size", c.queue_size);
        r.read("arrangement", c.arrangement);
        std::string sim = to_string(c.sim), stream = to_string(c.stream);
        r.read("sim", sim);
        r.read("stream", stream);
        c.sim = parse_sim_function(sim);
        c.stream = parse_stream(stream);
        r.read("epochs", c.epochs);
        r.read("batch_size", c.batch_size);
        r.read("learning_rate", c.learning_rate);
        r.read("sgd_momentum", c.sgd_momentum);
        r.read("weight_decay", c.weight_decay);
        r.read("target_frames", c.target_frames);
        r.read("checkpoint_every", c.checkpoint_every);
        if (const json* a = r.child("augment")) c.augment = augment_options_from_json(*a);
        if (const json* e = r.child("encoder")) c.encoder = encoder_config_from_json(*e);
    }
    return c;
}

json to_json(const StepLog& log, const std::string& tag) {
    return {{"step", log.step},
            {"epoch", log.epoch},
            {"info_nce", log.loss.info_nce},
            {"hierarchical", log.loss.hierarchical},
            {"total", log.loss.total},
            {"per_branch_kl", log.loss.per_branch},
            {"lr", log.learning_rate},
            {"queue_warm", log.queue_warm},
            {"objective", tag}};
}

// ---------------------------------------------------------------------------
// Optimization

void sgd_step(std::vector<double>& params, std::span<const double> grad, OptimizerState& opt, double lr,
              double momentum, double weight_decay) {
    require(grad.size() == params.size(), ErrorKind::shape, "gradient size does not match parameters");
    if (opt.velocity.size() != params.size()) opt.velocity.assign(params.size(), 0.0);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grad[i] + weight_decay * params[i];
        opt.velocity[i] = momentum * opt.velocity[i] + g;
        params[i] -= lr * opt.velocity[i];
    }
    ++opt.step;
}

double cosine_learning_rate(double base, std::int64_t step, std::int64_t total_steps) {
    if (total_steps <= 0) return base;
    const double progress = std::min(1.0, static_cast<double>(step) / static_cast<double>(total_steps));
    return 0.5 * base * (1.0 + std::cos(std::numbers::pi * progress));
}

namespace {

struct BranchViews {
    std::vector<SkeletonSequence> sequences;
    std::vector<std::optional<GraphPerturbation>> owned;
    std::vector<const GraphPerturbation*> perturbations;

    void add(AugmentedView view) {
        sequences.push_back(std::move(view.sequence));
        owned.push_back(std::move(view.perturbation));
    }
    void finish() {
        for (const auto& p : owned) perturbations.push_back(p ? &*p : nullptr);
    }
};

}  // namespace

LossBreakdown train_step(EncoderState& state, OptimizerState& optimizer, std::span<const SkeletonSequence> batch,
                         MemoryQueue& queue, const TrainConfig& config, double learning_rate,
                         std::uint64_t step_seed) {
    require(!batch.empty(), ErrorKind::empty_input, "training batch is empty");
    require(static_cast<int>(batch.size()) <= queue.capacity(), ErrorKind::config, "batch exceeds queue capacity");
    require(queue.dim() == state.config.embed_dim, ErrorKind::config, "queue dimension does not match encoder");

    const GraphEncoder encoder = state.encoder();
    const std::size_t B = batch.size();
    const int k = config.branches();
    const bool hierarchical = k >= 2;
    const double inv_batch = 1.0 / static_cast<double>(B);
    const RowMatrix& negatives = queue.buffer();  // pre-enqueue snapshot shared by every branch
    const ApplyContext context{&state.graph, batch, state.config.layers()};

    // Every sample draws its chain T_0..T_{k-1} and an independent key view from its own stream.
    std::vector<BranchViews> views(k);
    BranchViews key_views;
    for (std::size_t s = 0; s < B; ++s) {
        Rng rng(derive_seed(step_seed, {static_cast<std::uint64_t>(s)}));
        const auto chain = build_growing_policy(config.arrangement, rng, config.augment);
        const auto key_set = sample_set(config.arrangement, 0, rng, config.augment);
        for (int i = 0; i < k; ++i) views[i].add(apply_set(chain.sets[i], batch[s], context));
        key_views.add(apply_set(key_set, batch[s], context));
    }
    for (auto& v : views) v.finish();
    key_views.finish();

    // The key twin normalizes with running statistics so batch composition cannot leak into the positives.
    const auto z_key = encoder.embed(state.key, state.buffers, key_views.sequences, key_views.perturbations,
                                     NormMode::running);
    std::vector<GraphEncoder::BatchTrace> traces(k);
    std::vector<std::vector<VectorXd>> z(k);
    for (int i = 0; i < k; ++i)
        z[i] = encoder.embed(state.query, state.buffers, views[i].sequences, views[i].perturbations, NormMode::batch,
                             &traces[i]);

    std::vector<std::vector<VectorXd>> dz(k, std::vector<VectorXd>(B));
    double info_sum = 0.0, h_sum = 0.0;
    std::vector<double> branch_sum(hierarchical ? k - 1 : 0, 0.0);
    std::vector<VectorXd> branch_z(k);
    for (std::size_t s = 0; s < B; ++s) {
        info_sum += info_nce(z[0][s], z_key[s], negatives, config.temperature, &dz[0][s]);
        for (int i = 1; i < k; ++i) dz[i][s] = VectorXd::Zero(state.config.embed_dim);
        if (hierarchical) {
            for (int i = 0; i < k; ++i) branch_z[i] = z[i][s];
            const auto h = hierarchical_loss(branch_z, z_key[s], negatives, config.temperature, config.sim);
            h_sum += h.value;
            for (int i = 0; i + 1 < k; ++i) branch_sum[i] += h.per_branch[i];
            if (config.lambda_h > 0.0)
                for (int i = 0; i < k; ++i) dz[i][s] += config.lambda_h * h.grads[i];
        }
        for (int i = 0; i < k; ++i) dz[i][s] *= inv_batch;
    }

    std::vector<double> grad(encoder.parameter_count(), 0.0);
    for (int i = 0; i < k; ++i) {
        if (i > 0 && config.lambda_h == 0.0) continue;
        encoder.backward_embedding(state.query, traces[i], dz[i], grad);
    }

    sgd_step(state.query, grad, optimizer, learning_rate, config.sgd_momentum, config.weight_decay);
    momentum_update(state, config.momentum);
    encoder.update_buffers(state.buffers, traces[0], kRunningStatsRate);
    queue.enqueue_batch(z_key);

    for (auto& b : branch_sum) b *= inv_batch;
    return total_loss(info_sum * inv_batch, h_sum * inv_batch, std::move(branch_sum), config.lambda_h);
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes a little-endian host");

constexpr char kCheckpointMagic[8] = {'H', 'I', 'C', 'L', 'R', 'C', 'K', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

void put_doubles(std::ostream& out, std::span<const double> values) {
    put<std::uint64_t>(out, values.size());
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size_bytes()));
}

template <typename T>
T get(std::istream& in) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T))) fail(ErrorKind::parse, "truncated checkpoint");
    return value;
}

std::vector<double> get_doubles(std::istream& in) {
    const auto n = get<std::uint64_t>(in);
    require(n < (1ULL << 34), ErrorKind::parse, "implausible array length in checkpoint");
    std::vector<double> out(n);
    if (!in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(n * sizeof(double))))
        fail(ErrorKind::parse, "truncated checkpoint");
    return out;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& path) {
    const json header = {{"config", to_json(ck.config)},
                         {"seed", ck.seed},
                         {"graph", ck.state.graph.name},
                         {"encoder", to_json(ck.state.config)}};
    const std::string text = header.dump();
    const auto tmp = std::filesystem::path(path.string() + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) fail(ErrorKind::io, "cannot write " + tmp.string());
        out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
        put<std::uint32_t>(out, kCheckpointVersion);
        put<std::uint64_t>(out, text.size());
        out.write(text.data(), static_cast<std::streamsize>(text.size()));
        put_doubles(out, ck.state.query);
        put_doubles(out, ck.state.key);
        put_doubles(out, ck.optimizer.velocity);
        put_doubles(out, ck.state.buffers);
        put<std::int64_t>(out, ck.optimizer.step);
        put<std::int32_t>(out, ck.queue.cursor());
        put<std::uint64_t>(out, ck.queue.total_enqueued());
        put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.queue.capacity()));
        put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.queue.dim()));
        out.write(reinterpret_cast<const char*>(ck.queue.buffer().data()),
                  static_cast<std::streamsize>(ck.queue.buffer().size() * sizeof(double)));
        if (!out) fail(ErrorKind::io, "write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open checkpoint " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
        fail(ErrorKind::parse, path.string() + " is not a checkpoint file");
    const auto version = get<std::uint32_t>(in);
    require(version == kCheckpointVersion, ErrorKind::parse, "unsupported checkpoint version " + std::to_string(version));
    const auto len = get<std::uint64_t>(in);
    require(len < (1ULL << 24), ErrorKind::parse, "implausible checkpoint header length");
    std::string text(len, '\0');
    if (!in.read(text.data(), static_cast<std::streamsize>(len))) fail(ErrorKind::parse, "truncated checkpoint");

    Checkpoint ck;
    json header;
    try {
        header = json::parse(text);
        ck.config = train_config_from_json(header.at("config"));
        ck.seed = header.at("seed").get<std::uint64_t>();
        ck.state.config = encoder_config_from_json(header.at("encoder"));
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, std::string("bad checkpoint header: ") + e.what());
    }
    ck.state.graph = builtin_graph(ck.state.config.joints);
    ck.state.query = get_doubles(in);
    ck.state.key = get_doubles(in);
    ck.optimizer.velocity = get_doubles(in);
    ck.state.buffers = get_doubles(in);
    ck.optimizer.step = get<std::int64_t>(in);
    const auto cursor = get<std::int32_t>(in);
    const auto total = get<std::uint64_t>(in);
    const auto rows = get<std::uint32_t>(in);
    const auto cols = get<std::uint32_t>(in);
    RowMatrix buffer(rows, cols);
    if (!in.read(reinterpret_cast<char*>(buffer.data()), static_cast<std::streamsize>(buffer.size() * sizeof(double))))
        fail(ErrorKind::parse, "truncated checkpoint");
    ck.queue = MemoryQueue(static_cast<int>(rows), static_cast<int>(cols));
    ck.queue.restore(std::move(buffer), cursor, total);

    const GraphEncoder enc = ck.state.encoder();
    require(ck.state.query.size() == enc.parameter_count() && ck.state.key.size() == enc.parameter_count() &&
                ck.state.buffers.size() == enc.buffer_count(),
            ErrorKind::parse, "checkpoint parameters do not match the recorded encoder");
    return ck;
}

// ---------------------------------------------------------------------------
// Pretraining

TrainConfig resolve_config(const TrainConfig& config, const Dataset& prepared) {
    TrainConfig c = config;
    require(!prepared.sequences.empty(), ErrorKind::empty_input, "dataset has no sequences");
    const auto& s = prepared.sequences.front();
    c.encoder.in_channels = s.channels;
    c.encoder.frames = s.frames;
    c.encoder.joints = s.joints;
    c.encoder.persons = s.persons;
    c.validate();
    return c;
}

PretrainResult pretrain(const Dataset& dataset, const TrainConfig& requested, std::uint64_t seed,
                        const PretrainOptions& options) {
    const Dataset data = prepare_dataset(dataset, requested.stream, requested.target_frames);
    const TrainConfig config = resolve_config(requested, data);
    const auto n = static_cast<std::int64_t>(data.size());
    require(n >= config.batch_size, ErrorKind::config,
            "dataset of " + std::to_string(n) + " sequences is smaller than one batch");
    const std::int64_t steps_per_epoch = n / config.batch_size;
    const std::int64_t total_steps = steps_per_epoch * config.epochs;

    PretrainResult result;
    Checkpoint& ck = result.checkpoint;
    if (options.resume_from) {
        ck = load_checkpoint(*options.resume_from);
        require(ck.config == config, ErrorKind::config, "checkpoint config differs from the requested config");
        require(ck.seed == seed, ErrorKind::config, "checkpoint seed differs from the requested seed");
    } else {
        ck.config = config;
        ck.seed = seed;
        ck.state = init_state(config.encoder, data.graph, seed);
        ck.queue = MemoryQueue::random(config.queue_size, config.encoder.embed_dim, seed);
    }
    if (options.checkpoint_dir) std::filesystem::create_directories(*options.checkpoint_dir);

    const std::string tag = config.objective_tag();
    std::vector<SkeletonSequence> batch;
    batch.reserve(config.batch_size);
    for (std::int64_t step = ck.optimizer.step; step < total_steps; ++step) {
        if (options.stop_after_steps && step >= *options.stop_after_steps) break;
        const int epoch = static_cast<int>(step / steps_per_epoch);
        const std::int64_t within = step % steps_per_epoch;

        std::vector<std::size_t> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(derive_seed(seed, {0xe90cULL, static_cast<std::uint64_t>(epoch)}));
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        batch.clear();
        for (int b = 0; b < config.batch_size; ++b)
            batch.push_back(data.sequences[order[static_cast<std::size_t>(within * config.batch_size + b)]]);

        StepLog entry;
        entry.step = step;
        entry.epoch = epoch;
        entry.learning_rate = cosine_learning_rate(config.scaled_learning_rate(), step, total_steps);
        entry.queue_warm = ck.queue.total_enqueued() >= static_cast<std::uint64_t>(ck.queue.capacity());
        entry.loss = train_step(ck.state, ck.optimizer, batch, ck.queue, config, entry.learning_rate,
                                derive_seed(seed, {0x57e9ULL, static_cast<std::uint64_t>(step)}));
        require(std::isfinite(entry.loss.total), ErrorKind::internal,
                "training diverged at step " + std::to_string(step));
        if (options.on_step) options.on_step(entry);
        result.log.push_back(std::move(entry));

        const bool epoch_end = (step + 1) % steps_per_epoch == 0;
        if (options.checkpoint_dir && epoch_end && config.checkpoint_every > 0 &&
            (epoch + 1) % config.checkpoint_every == 0)
            save_checkpoint(ck, *options.checkpoint_dir / ("checkpoint_epoch" + std::to_string(epoch + 1) + ".bin"));
    }
    if (options.checkpoint_dir) save_checkpoint(ck, *options.checkpoint_dir / "checkpoint.bin");
    return result;
}

}  // namespace hiclr
