#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "hiclr/random.hpp"
#include "hiclr/skeleton.hpp"

namespace hiclr {

enum class Strategy {
    shear,
    crop,
    spatial_flip,
    rotation,
    gaussian_noise,
    gaussian_blur,
    channel_mask,
    random_mask,
    drop_add_edges,
    skele_adain,
};

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& name);

// Distribution knobs for every strategy. Overridable per experiment.
struct AugmentOptions {
    double shear_magnitude = 0.5;
    double crop_min_span = 0.5;
    double flip_probability = 0.5;
    double rotation_max_degrees = 30.0;
    double noise_sigma = 0.01;
    double blur_sigma_min = 0.1;
    double blur_sigma_max = 2.0;
    double channel_mask_probability = 0.5;
    double mask_probability = 0.5;
    float mask_fill = 0.0f;
    double edge_drop_probability = 0.1;
    double edge_add_probability = 0.1;
    bool edges_per_layer = true;
    double adain_eps = 1e-5;
};

struct ShearParams {
    std::array<double, 9> matrix;  // row-major, unit diagonal
};
struct CropParams {
    double start;  // first retained frame, as a fraction of (T - 1)
    double span;   // retained span, as a fraction of (T - 1)
};
struct FlipParams {
    bool apply;
};
struct RotationParams {
    std::array<double, 3> radians;  // about x, y, z
};
struct NoiseParams {
    double sigma;
};
struct BlurParams {
    double sigma;
};
struct ChannelMaskParams {
    bool apply;
    int channel;
};
struct RandomMaskParams {
    double probability;
    float fill;
};
struct DropAddEdgesParams {
    double drop_probability;
    double add_probability;
    bool per_layer;
};
struct AdainParams {
    double style_draw;  // in [0, 1); picks the style sample from the pool
    double eps;
};

using AugmentParams = std::variant<ShearParams, CropParams, FlipParams, RotationParams, NoiseParams, BlurParams,
                                   ChannelMaskParams, RandomMaskParams, DropAddEdgesParams, AdainParams>;

// One sampled transform. Any randomness needed while applying it (noise,
// mask cells, edge flips) is drawn from rng_seed, so the instance alone
// determines the output.
struct AugmentationInstance {
    Strategy strategy;
    AugmentParams params;
    std::uint64_t rng_seed = 0;
};

AugmentationInstance sample_instance(Strategy strategy, Rng& rng, const AugmentOptions& options = {});

// Group names: BA, NA, Mask, DAE, AdaIN; "+" joins groups into one
// arrangement slot (e.g. "BA+NA").
std::vector<Strategy> group_strategies(const std::string& group);
const std::vector<std::string>& known_groups();

struct AugmentationSet {
    int set_index = 0;
    std::vector<std::string> groups;
    std::vector<AugmentationInstance> instances;
};

struct AugmentationSetChain {
    std::vector<std::string> arrangement;
    std::vector<AugmentationSet> sets;
};

// Set j gets fresh instances for arrangement slots 0..j, in arrangement order.
AugmentationSetChain build_growing_policy(const std::vector<std::string>& arrangement, Rng& rng,
                                          const AugmentOptions& options = {});
// A standalone set covering arrangement slots 0..last_slot.
AugmentationSet sample_set(const std::vector<std::string>& arrangement, int last_slot, Rng& rng,
                           const AugmentOptions& options = {});

// ---------------------------------------------------------------------------
// Structural perturbation

using Edge = std::pair<int, int>;  // stored with first < second

struct EdgeEdit {
    std::set<Edge> dropped;
    std::set<Edge> added;
    bool empty() const { return dropped.empty() && added.empty(); }
};

struct GraphPerturbation {
    std::vector<EdgeEdit> layers;  // one per encoder layer, or a single shared edit
    bool per_layer = false;

    bool empty() const;
    const EdgeEdit& for_layer(int layer) const;
};

GraphPerturbation drop_add_edges(const SkeletonGraph& graph, const AugmentationInstance& instance, int layers);

// Binary adjacency with self-loops after applying an edit; V x V row-major.
std::vector<double> effective_adjacency(const SkeletonGraph& graph, const EdgeEdit* edit);

// ---------------------------------------------------------------------------
// Coordinate transforms

SkeletonSequence random_mask(const SkeletonSequence& seq, const AugmentationInstance& instance);
SkeletonSequence skele_adain(const SkeletonSequence& content, const SkeletonSequence& style,
                             const AugmentationInstance& instance);
SkeletonSequence apply_instance(const SkeletonSequence& seq, const AugmentationInstance& instance,
                                const SkeletonGraph& graph, std::span<const SkeletonSequence> style_pool = {});

struct ApplyContext {
    const SkeletonGraph* graph = nullptr;
    std::span<const SkeletonSequence> style_pool;
    int graph_layers = 1;
};

struct AugmentedView {
    SkeletonSequence sequence;
    std::optional<GraphPerturbation> perturbation;  // set only when the set holds drop_add_edges
};

AugmentedView apply_set(const AugmentationSet& set, const SkeletonSequence& seq, const ApplyContext& context);

}  // namespace hiclr
