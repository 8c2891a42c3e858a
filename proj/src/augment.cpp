#include "hiclr/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "hiclr/error.hpp"

namespace hiclr {

namespace {

constexpr const char* kStrategyNames[] = {
    "shear",          "crop",         "spatial_flip", "rotation",       "gaussian_noise",
    "gaussian_blur",  "channel_mask", "random_mask",  "drop_add_edges", "skele_adain",
};

void check_probability(double p, const char* what) {
    require(p >= 0.0 && p <= 1.0, ErrorKind::config, std::string(what) + " must lie in [0, 1]");
}

// Stream for randomness consumed while applying an instance; kept apart from
// the stream that produced the instance's parameters.
Rng apply_stream(const AugmentationInstance& instance, std::uint64_t tag) {
    return Rng(derive_seed(instance.rng_seed, {0xa991ULL, tag}));
}

void apply_linear(SkeletonSequence& seq, const std::array<double, 9>& m) {
    require(seq.channels == 3, ErrorKind::shape, "spatial transforms need 3 coordinate channels");
    for (int t = 0; t < seq.frames; ++t)
        for (int v = 0; v < seq.joints; ++v)
            for (int p = 0; p < seq.persons; ++p) {
                const double x = seq.at(0, t, v, p), y = seq.at(1, t, v, p), z = seq.at(2, t, v, p);
                seq.at(0, t, v, p) = static_cast<float>(m[0] * x + m[1] * y + m[2] * z);
                seq.at(1, t, v, p) = static_cast<float>(m[3] * x + m[4] * y + m[5] * z);
                seq.at(2, t, v, p) = static_cast<float>(m[6] * x + m[7] * y + m[8] * z);
            }
}

std::array<double, 9> rotation_matrix(const std::array<double, 3>& a) {
    const double cx = std::cos(a[0]), sx = std::sin(a[0]);
    const double cy = std::cos(a[1]), sy = std::sin(a[1]);
    const double cz = std::cos(a[2]), sz = std::sin(a[2]);
    // Rz * Ry * Rx
    return {cz * cy, cz * sy * sx - sz * cx, cz * sy * cx + sz * sx,
            sz * cy, sz * sy * sx + cz * cx, sz * sy * cx - cz * sx,
            -sy,     cy * sx,                cy * cx};
}

SkeletonSequence crop_resize(const SkeletonSequence& seq, const CropParams& crop) {
    SkeletonSequence out = seq;
    const int T = seq.frames;
    if (T < 2) return out;
    const double first = crop.start * (T - 1);
    const double span = crop.span * (T - 1);
    for (int t = 0; t < T; ++t) {
        const double pos = std::clamp(first + span * t / (T - 1), 0.0, static_cast<double>(T - 1));
        const int lo = static_cast<int>(std::floor(pos));
        const int hi = std::min(lo + 1, T - 1);
        const double w = pos - lo;
        for (int c = 0; c < seq.channels; ++c)
            for (int v = 0; v < seq.joints; ++v)
                for (int p = 0; p < seq.persons; ++p) {
                    const double a = seq.at(c, lo, v, p), b = seq.at(c, hi, v, p);
                    out.at(c, t, v, p) = static_cast<float>(a + w * (b - a));
                }
    }
    return out;
}

SkeletonSequence temporal_blur(const SkeletonSequence& seq, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> kernel(2 * radius + 1);
    double total = 0.0;
    for (int i = -radius; i <= radius; ++i) total += kernel[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& k : kernel) k /= total;

    SkeletonSequence out = seq;
    for (int c = 0; c < seq.channels; ++c)
        for (int v = 0; v < seq.joints; ++v)
            for (int p = 0; p < seq.persons; ++p)
                for (int t = 0; t < seq.frames; ++t) {
                    double acc = 0.0;
                    for (int i = -radius; i <= radius; ++i) {
                        const int src = std::clamp(t + i, 0, seq.frames - 1);
                        acc += kernel[i + radius] * seq.at(c, src, v, p);
                    }
                    out.at(c, t, v, p) = static_cast<float>(acc);
                }
    return out;
}

template <typename P>
const P& params_as(const AugmentationInstance& instance) {
    const P* p = std::get_if<P>(&instance.params);
    if (!p) fail(ErrorKind::internal, std::string("parameters do not match strategy ") + to_string(instance.strategy));
    return *p;
}

}  // namespace

const char* to_string(Strategy s) { return kStrategyNames[static_cast<int>(s)]; }

Strategy parse_strategy(const std::string& name) {
    for (int i = 0; i < static_cast<int>(std::size(kStrategyNames)); ++i)
        if (name == kStrategyNames[i]) return static_cast<Strategy>(i);
    fail(ErrorKind::config, "unknown augmentation strategy '" + name + "'");
}

AugmentationInstance sample_instance(Strategy strategy, Rng& rng, const AugmentOptions& options) {
    AugmentationInstance inst{strategy, ShearParams{}, rng()};
    Rng local(derive_seed(inst.rng_seed, {0x9a7aULL}));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(local); };

    switch (strategy) {
        case Strategy::shear: {
            const double s = options.shear_magnitude;
            ShearParams p{};
            for (int r = 0; r < 3; ++r)
                for (int c = 0; c < 3; ++c) p.matrix[r * 3 + c] = r == c ? 1.0 : uniform(-s, s);
            inst.params = p;
            break;
        }
        case Strategy::crop: {
            require(options.crop_min_span > 0.0 && options.crop_min_span <= 1.0, ErrorKind::config,
                    "crop_min_span must be in (0, 1]");
            const double span = uniform(options.crop_min_span, 1.0);
            inst.params = CropParams{unit(local) * (1.0 - span), span};
            break;
        }
        case Strategy::spatial_flip:
            check_probability(options.flip_probability, "flip probability");
            inst.params = FlipParams{unit(local) < options.flip_probability};
            break;
        case Strategy::rotation: {
            const double max = options.rotation_max_degrees * std::numbers::pi / 180.0;
            inst.params = RotationParams{{uniform(-max, max), uniform(-max, max), uniform(-max, max)}};
            break;
        }
        case Strategy::gaussian_noise:
            require(options.noise_sigma >= 0.0, ErrorKind::config, "noise sigma must be nonnegative");
            inst.params = NoiseParams{options.noise_sigma};
            break;
        case Strategy::gaussian_blur:
            require(options.blur_sigma_min > 0.0 && options.blur_sigma_max >= options.blur_sigma_min,
                    ErrorKind::config, "blur sigma range must be positive and ordered");
            inst.params = BlurParams{uniform(options.blur_sigma_min, options.blur_sigma_max)};
            break;
        case Strategy::channel_mask: {
            check_probability(options.channel_mask_probability, "channel mask probability");
            const bool apply = unit(local) < options.channel_mask_probability;
            inst.params = ChannelMaskParams{apply, std::min(2, static_cast<int>(unit(local) * 3))};
            break;
        }
        case Strategy::random_mask:
            check_probability(options.mask_probability, "mask probability");
            inst.params = RandomMaskParams{options.mask_probability, options.mask_fill};
            break;
        case Strategy::drop_add_edges:
            check_probability(options.edge_drop_probability, "edge drop probability");
            check_probability(options.edge_add_probability, "edge add probability");
            inst.params = DropAddEdgesParams{options.edge_drop_probability, options.edge_add_probability,
                                             options.edges_per_layer};
            break;
        case Strategy::skele_adain:
            require(options.adain_eps > 0.0, ErrorKind::config, "adain eps must be positive");
            inst.params = AdainParams{unit(local), options.adain_eps};
            break;
    }
    return inst;
}

const std::vector<std::string>& known_groups() {
    static const std::vector<std::string> groups = {"BA", "NA", "Mask", "DAE", "AdaIN"};
    return groups;
}

std::vector<Strategy> group_strategies(const std::string& group) {
    std::vector<Strategy> out;
    std::size_t pos = 0;
    while (pos <= group.size()) {
        const std::size_t plus = std::min(group.find('+', pos), group.size());
        const std::string name = group.substr(pos, plus - pos);
        if (name == "BA") {
            out.insert(out.end(), {Strategy::shear, Strategy::crop});
        } else if (name == "NA") {
            out.insert(out.end(), {Strategy::spatial_flip, Strategy::rotation, Strategy::gaussian_noise,
                                   Strategy::gaussian_blur, Strategy::channel_mask});
        } else if (name == "Mask") {
            out.push_back(Strategy::random_mask);
        } else if (name == "DAE") {
            out.push_back(Strategy::drop_add_edges);
        } else if (name == "AdaIN") {
            out.push_back(Strategy::skele_adain);
        } else {
            fail(ErrorKind::config, "unknown augmentation group '" + name + "' (valid groups: BA, NA, Mask, DAE, AdaIN)");
        }
        pos = plus + 1;
    }
    return out;
}

AugmentationSet sample_set(const std::vector<std::string>& arrangement, int last_slot, Rng& rng,
                           const AugmentOptions& options) {
    require(last_slot >= -1 && last_slot < static_cast<int>(arrangement.size()), ErrorKind::config,
            "augmentation set index out of range");
    AugmentationSet set;
    set.set_index = last_slot;
    for (int slot = 0; slot <= last_slot; ++slot) {
        set.groups.push_back(arrangement[slot]);
        for (Strategy s : group_strategies(arrangement[slot])) set.instances.push_back(sample_instance(s, rng, options));
    }
    return set;
}

AugmentationSetChain build_growing_policy(const std::vector<std::string>& arrangement, Rng& rng,
                                          const AugmentOptions& options) {
    require(!arrangement.empty(), ErrorKind::config, "augmentation arrangement must not be empty");
    AugmentationSetChain chain;
    chain.arrangement = arrangement;
    for (int j = 0; j < static_cast<int>(arrangement.size()); ++j)
        chain.sets.push_back(sample_set(arrangement, j, rng, options));
    return chain;
}

// ---------------------------------------------------------------------------

bool GraphPerturbation::empty() const {
    return std::all_of(layers.begin(), layers.end(), [](const EdgeEdit& e) { return e.empty(); });
}

const EdgeEdit& GraphPerturbation::for_layer(int layer) const {
    require(!layers.empty(), ErrorKind::internal, "graph perturbation has no layers");
    if (!per_layer) return layers.front();
    require(layer >= 0 && layer < static_cast<int>(layers.size()), ErrorKind::shape,
            "graph perturbation has fewer layers than the encoder");
    return layers[layer];
}

GraphPerturbation drop_add_edges(const SkeletonGraph& graph, const AugmentationInstance& instance, int layers) {
    const auto& p = params_as<DropAddEdgesParams>(instance);
    check_probability(p.drop_probability, "edge drop probability");
    check_probability(p.add_probability, "edge add probability");
    require(layers >= 1, ErrorKind::config, "drop_add_edges needs at least one layer");

    GraphPerturbation out;
    out.per_layer = p.per_layer;
    const int count = p.per_layer ? layers : 1;
    const int V = graph.num_joints;
    for (int l = 0; l < count; ++l) {
        Rng rng = apply_stream(instance, static_cast<std::uint64_t>(l));
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        EdgeEdit edit;
        for (int i = 0; i < V; ++i)
            for (int j = i + 1; j < V; ++j) {
                const double u = unit(rng);
                if (graph.adjacent(i, j) != 0.0) {
                    if (u < p.drop_probability) edit.dropped.insert({i, j});
                } else if (u < p.add_probability) {
                    edit.added.insert({i, j});
                }
            }
        out.layers.push_back(std::move(edit));
    }
    return out;
}

std::vector<double> effective_adjacency(const SkeletonGraph& graph, const EdgeEdit* edit) {
    const int V = graph.num_joints;
    std::vector<double> a = graph.adjacency;
    auto set = [&](Edge e, double value) {
        require(e.first >= 0 && e.second < V && e.first < e.second, ErrorKind::shape, "edge index out of range");
        a[static_cast<std::size_t>(e.first) * V + e.second] = value;
        a[static_cast<std::size_t>(e.second) * V + e.first] = value;
    };
    if (edit) {
        for (Edge e : edit->dropped) set(e, 0.0);
        for (Edge e : edit->added) set(e, 1.0);
    }
    for (int i = 0; i < V; ++i) a[static_cast<std::size_t>(i) * V + i] = 1.0;
    return a;
}

// ---------------------------------------------------------------------------

SkeletonSequence random_mask(const SkeletonSequence& seq, const AugmentationInstance& instance) {
    const auto& p = params_as<RandomMaskParams>(instance);
    check_probability(p.probability, "mask probability");
    SkeletonSequence out = seq;
    Rng rng = apply_stream(instance, 0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int t = 0; t < seq.frames; ++t)
        for (int v = 0; v < seq.joints; ++v)
            for (int person = 0; person < seq.persons; ++person)
                if (unit(rng) < p.probability)
                    for (int c = 0; c < seq.channels; ++c) out.at(c, t, v, person) = p.fill;
    return out;
}

SkeletonSequence skele_adain(const SkeletonSequence& content, const SkeletonSequence& style,
                             const AugmentationInstance& instance) {
    const auto& p = params_as<AdainParams>(instance);
    require(content.same_shape(style), ErrorKind::shape, "SkeleAdaIN content and style shapes differ");
    SkeletonSequence out = content;
    const std::size_t per_channel = static_cast<std::size_t>(content.frames) * content.joints * content.persons;

    auto moments = [per_channel](const SkeletonSequence& s, int c) {
        const float* x = s.data.data() + c * per_channel;
        double mean = 0.0;
        for (std::size_t i = 0; i < per_channel; ++i) mean += x[i];
        mean /= static_cast<double>(per_channel);
        double var = 0.0;
        for (std::size_t i = 0; i < per_channel; ++i) var += (x[i] - mean) * (x[i] - mean);
        return std::pair{mean, std::sqrt(var / static_cast<double>(per_channel))};
    };

    for (int c = 0; c < content.channels; ++c) {
        const auto [mu_c, sigma_c] = moments(content, c);
        const auto [mu_s, sigma_s] = moments(style, c);
        const double scale = sigma_s / std::max(sigma_c, p.eps);
        float* x = out.data.data() + c * per_channel;
        for (std::size_t i = 0; i < per_channel; ++i) x[i] = static_cast<float>(scale * (x[i] - mu_c) + mu_s);
    }
    return out;
}

SkeletonSequence apply_instance(const SkeletonSequence& seq, const AugmentationInstance& instance,
                                const SkeletonGraph& graph, std::span<const SkeletonSequence> style_pool) {
    switch (instance.strategy) {
        case Strategy::shear: {
            SkeletonSequence out = seq;
            apply_linear(out, params_as<ShearParams>(instance).matrix);
            return out;
        }
        case Strategy::rotation: {
            SkeletonSequence out = seq;
            apply_linear(out, rotation_matrix(params_as<RotationParams>(instance).radians));
            return out;
        }
        case Strategy::crop: return crop_resize(seq, params_as<CropParams>(instance));
        case Strategy::spatial_flip: {
            if (!params_as<FlipParams>(instance).apply) return seq;
            require(seq.joints == graph.num_joints, ErrorKind::shape, "flip needs the sequence's graph");
            SkeletonSequence out = seq;
            for (int c = 0; c < seq.channels; ++c)
                for (int t = 0; t < seq.frames; ++t)
                    for (int v = 0; v < seq.joints; ++v)
                        for (int p = 0; p < seq.persons; ++p) out.at(c, t, v, p) = seq.at(c, t, graph.mirror[v], p);
            return out;
        }
        case Strategy::gaussian_noise: {
            SkeletonSequence out = seq;
            Rng rng = apply_stream(instance, 0);
            std::normal_distribution<double> noise(0.0, params_as<NoiseParams>(instance).sigma);
            for (int p = 0; p < seq.persons; ++p) {
                if (!seq.person_present(p)) continue;
                for (int c = 0; c < seq.channels; ++c)
                    for (int t = 0; t < seq.frames; ++t)
                        for (int v = 0; v < seq.joints; ++v)
                            out.at(c, t, v, p) = static_cast<float>(out.at(c, t, v, p) + noise(rng));
            }
            return out;
        }
        case Strategy::gaussian_blur: return temporal_blur(seq, params_as<BlurParams>(instance).sigma);
        case Strategy::channel_mask: {
            const auto& p = params_as<ChannelMaskParams>(instance);
            if (!p.apply) return seq;
            require(p.channel >= 0 && p.channel < seq.channels, ErrorKind::shape, "channel mask index out of range");
            SkeletonSequence out = seq;
            const std::size_t per_channel = static_cast<std::size_t>(seq.frames) * seq.joints * seq.persons;
            std::fill_n(out.data.begin() + p.channel * per_channel, per_channel, 0.0f);
            return out;
        }
        case Strategy::random_mask: return random_mask(seq, instance);
        case Strategy::drop_add_edges: return seq;
        case Strategy::skele_adain: {
            require(!style_pool.empty(), ErrorKind::config, "SkeleAdaIN needs a non-empty style pool");
            const double draw = params_as<AdainParams>(instance).style_draw;
            const auto idx = std::min(style_pool.size() - 1, static_cast<std::size_t>(draw * style_pool.size()));
            return skele_adain(seq, style_pool[idx], instance);
        }
    }
    fail(ErrorKind::internal, "unhandled strategy");
}

AugmentedView apply_set(const AugmentationSet& set, const SkeletonSequence& seq, const ApplyContext& context) {
    require(context.graph != nullptr, ErrorKind::internal, "apply_set needs a graph");
    AugmentedView view{seq, std::nullopt};
    for (const auto& inst : set.instances) {
        if (inst.strategy == Strategy::drop_add_edges) {
            auto p = drop_add_edges(*context.graph, inst, context.graph_layers);
            if (!view.perturbation) {
                view.perturbation = std::move(p);
                continue;
            }
            // Several DAE instances in one set compose per layer. Drops only
            // touch tree edges and adds only non-edges, so a union is enough.
            auto& merged = *view.perturbation;
            if (p.per_layer && !merged.per_layer) {
                const EdgeEdit shared = merged.layers.front();
                merged.layers.assign(p.layers.size(), shared);
                merged.per_layer = true;
            }
            for (std::size_t l = 0; l < merged.layers.size(); ++l) {
                const auto& extra = p.for_layer(static_cast<int>(l));
                merged.layers[l].dropped.insert(extra.dropped.begin(), extra.dropped.end());
                merged.layers[l].added.insert(extra.added.begin(), extra.added.end());
            }
            continue;
        }
        view.sequence = apply_instance(view.sequence, inst, *context.graph, context.style_pool);
        require(view.sequence.same_shape(seq), ErrorKind::internal, "augmentation changed the sequence shape");
    }
    return view;
}

}  // namespace hiclr
