#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace hiclr {

// Dense joint coordinates laid out as (C, T, V, P), row-major, meters.
struct SkeletonSequence {
    int channels = 3;
    int frames = 0;
    int joints = 0;
    int persons = 1;
    std::vector<float> data;
    std::optional<int> label;
    std::optional<int> subject_id;
    std::optional<int> view_id;

    SkeletonSequence() = default;
    SkeletonSequence(int c, int t, int v, int p);

    std::size_t index(int c, int t, int v, int p) const {
        return ((static_cast<std::size_t>(c) * frames + t) * joints + v) * persons + p;
    }
    float& at(int c, int t, int v, int p) { return data[index(c, t, v, p)]; }
    float at(int c, int t, int v, int p) const { return data[index(c, t, v, p)]; }

    bool same_shape(const SkeletonSequence& other) const {
        return channels == other.channels && frames == other.frames && joints == other.joints &&
               persons == other.persons;
    }
    bool person_present(int p) const;

    friend bool operator==(const SkeletonSequence&, const SkeletonSequence&) = default;
};

// Kinematic tree over the joints. edges are (parent, child) and listed so a
// parent always appears before its children.
struct SkeletonGraph {
    std::string name;
    int num_joints = 0;
    int root = 0;
    std::vector<std::pair<int, int>> edges;
    std::vector<int> mirror;           // left/right joint permutation
    std::vector<double> adjacency;     // V x V, symmetric 0/1, no self-loops

    double adjacent(int i, int j) const { return adjacency[static_cast<std::size_t>(i) * num_joints + j]; }
    std::vector<int> parents() const;  // -1 for the root
};

SkeletonGraph make_graph(std::string name, int num_joints, int root,
                         std::vector<std::pair<int, int>> edges, std::vector<int> mirror);

SkeletonGraph ntu25_graph();
SkeletonGraph tree11_graph();
SkeletonGraph micro5_graph();
// Built-in graph selected by joint count (25, 11 or 5).
SkeletonGraph builtin_graph(int num_joints);

enum class SplitTag { train, test };

struct Dataset {
    std::vector<SkeletonSequence> sequences;
    SkeletonGraph graph;
    SplitTag split = SplitTag::train;
    int class_count = 0;
    std::uint64_t seed = 0;

    std::size_t size() const { return sequences.size(); }
    std::vector<int> labels() const;
    void validate() const;
};

// NTU RGB+D raw `.skeleton` text format.
SkeletonSequence load_ntu_skeleton(const std::filesystem::path& path);
SkeletonSequence parse_ntu_skeleton(const std::string& text);
// Writes the layout parse_ntu_skeleton reads; non-coordinate fields are zero.
std::string format_ntu_skeleton(const SkeletonSequence& seq);

struct SynthSpec {
    int class_count = 8;
    int sequences_per_class = 100;
    int joints = 11;
    int frames = 64;
    int persons = 1;
    double noise_scale = 0.02;
    double motion_amplitude = 0.3;   // class motion, before the per-sequence [0.7, 1.3] jitter
    double distractor_ratio = 0.35;  // max distractor amplitude relative to the class motion
    double yaw_range_degrees = 90.0; // full width of the random body yaw
    double scale_jitter = 0.15;      // body scale drawn from 1 +- scale_jitter
};

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed);

// Class-stratified split; the first element is the train split.
std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed);

SkeletonSequence temporal_resample(const SkeletonSequence& seq, int target_frames);

// Subtracts the first frame's root position of person 0 from every present
// person slot. Absent (all-zero) slots stay zero.
SkeletonSequence center_sequence(const SkeletonSequence& seq, const SkeletonGraph& graph);

SkeletonSequence preprocess(const SkeletonSequence& seq, const SkeletonGraph& graph, int target_frames);

enum class Stream { joint, bone, motion };

Stream parse_stream(const std::string& name);
const char* to_string(Stream stream);

SkeletonSequence derive_stream(const SkeletonSequence& seq, const SkeletonGraph& graph, Stream stream);

// Preprocess every sequence, then derive the requested stream.
Dataset prepare_dataset(const Dataset& data, Stream stream, int target_frames);

// Binary dataset cache; layout documented in docs/dataset_format.md.
void write_dataset(const Dataset& data, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

}  // namespace hiclr
