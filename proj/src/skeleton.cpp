#include "hiclr/skeleton.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include "hiclr/error.hpp"
#include "hiclr/random.hpp"

namespace hiclr {

SkeletonSequence::SkeletonSequence(int c, int t, int v, int p)
    : channels(c), frames(t), joints(v), persons(p),
      data(static_cast<std::size_t>(c) * t * v * p, 0.0f) {
    require(c > 0 && t > 0 && v > 0 && p > 0, ErrorKind::shape, "sequence dimensions must be positive");
}

bool SkeletonSequence::person_present(int p) const {
    for (int c = 0; c < channels; ++c)
        for (int t = 0; t < frames; ++t)
            for (int v = 0; v < joints; ++v)
                if (at(c, t, v, p) != 0.0f) return true;
    return false;
}

// ---------------------------------------------------------------------------
// Graphs

std::vector<int> SkeletonGraph::parents() const {
    std::vector<int> parent(num_joints, -1);
    for (auto [p, c] : edges) parent[c] = p;
    return parent;
}

SkeletonGraph make_graph(std::string name, int num_joints, int root,
                         std::vector<std::pair<int, int>> edges, std::vector<int> mirror) {
    SkeletonGraph g;
    g.name = std::move(name);
    g.num_joints = num_joints;
    g.root = root;
    g.edges = std::move(edges);
    g.mirror = std::move(mirror);
    g.adjacency.assign(static_cast<std::size_t>(num_joints) * num_joints, 0.0);

    require(num_joints > 0 && root >= 0 && root < num_joints, ErrorKind::config, "invalid graph root");
    require(static_cast<int>(g.mirror.size()) == num_joints, ErrorKind::config, "mirror must cover every joint");
    std::vector<int> seen(num_joints, 0);
    seen[root] = 1;
    for (auto [p, c] : g.edges) {
        require(p >= 0 && p < num_joints && c >= 0 && c < num_joints, ErrorKind::config,
                "graph edge index out of range");
        require(seen[p] && !seen[c], ErrorKind::config, "graph edges must form a tree listed parent-first");
        seen[c] = 1;
        g.adjacency[static_cast<std::size_t>(p) * num_joints + c] = 1.0;
        g.adjacency[static_cast<std::size_t>(c) * num_joints + p] = 1.0;
    }
    require(std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; }), ErrorKind::config,
            "graph is not connected");
    return g;
}

SkeletonGraph ntu25_graph() {
    // 1-based NTU joint ids converted to 0-based; rooted at the base of the spine.
    const std::vector<std::pair<int, int>> one_based = {
        {1, 2},   {2, 21},  {21, 3},  {3, 4},   {21, 5},  {5, 6},   {6, 7},   {7, 8},
        {8, 23},  {23, 22}, {21, 9},  {9, 10},  {10, 11}, {11, 12}, {12, 25}, {25, 24},
        {1, 13},  {13, 14}, {14, 15}, {15, 16}, {1, 17},  {17, 18}, {18, 19}, {19, 20},
    };
    std::vector<std::pair<int, int>> edges;
    for (auto [p, c] : one_based) edges.emplace_back(p - 1, c - 1);
    std::vector<int> mirror(25);
    for (int i = 0; i < 25; ++i) mirror[i] = i;
    auto swap_pair = [&](int a, int b) {
        mirror[a - 1] = b - 1;
        mirror[b - 1] = a - 1;
    };
    swap_pair(5, 9);
    swap_pair(6, 10);
    swap_pair(7, 11);
    swap_pair(8, 12);
    swap_pair(13, 17);
    swap_pair(14, 18);
    swap_pair(15, 19);
    swap_pair(16, 20);
    swap_pair(22, 24);
    swap_pair(23, 25);
    return make_graph("ntu25", 25, 0, std::move(edges), std::move(mirror));
}

SkeletonGraph tree11_graph() {
    // pelvis, chest, head, l-elbow, l-hand, r-elbow, r-hand, l-knee, l-foot, r-knee, r-foot
    return make_graph("tree11", 11, 0,
                      {{0, 1}, {1, 2}, {1, 3}, {3, 4}, {1, 5}, {5, 6}, {0, 7}, {7, 8}, {0, 9}, {9, 10}},
                      {0, 1, 2, 5, 6, 3, 4, 9, 10, 7, 8});
}

SkeletonGraph micro5_graph() {
    // root with head, left, right and tail limbs
    return make_graph("micro5", 5, 0, {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, {0, 1, 3, 2, 4});
}

SkeletonGraph builtin_graph(int num_joints) {
    switch (num_joints) {
        case 25: return ntu25_graph();
        case 11: return tree11_graph();
        case 5: return micro5_graph();
        default:
            fail(ErrorKind::config, "no built-in graph with " + std::to_string(num_joints) +
                                        " joints (expected 25, 11 or 5)");
    }
}

// ---------------------------------------------------------------------------
// Dataset

std::vector<int> Dataset::labels() const {
    std::vector<int> out;
    out.reserve(sequences.size());
    for (const auto& s : sequences) out.push_back(s.label.value_or(-1));
    return out;
}

void Dataset::validate() const {
    require(class_count >= 1, ErrorKind::config, "dataset class_count must be positive");
    if (sequences.empty()) return;
    const auto& first = sequences.front();
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        const auto& s = sequences[i];
        require(s.joints == first.joints && s.persons == first.persons && s.channels == first.channels,
                ErrorKind::shape, "sequence " + std::to_string(i) + " has inconsistent (C, V, P)");
        require(s.joints == graph.num_joints, ErrorKind::shape, "sequence joints do not match dataset graph");
        if (s.label)
            require(*s.label >= 0 && *s.label < class_count, ErrorKind::config,
                    "label of sequence " + std::to_string(i) + " outside [0, class_count)");
    }
}

// ---------------------------------------------------------------------------
// NTU raw format

namespace {

constexpr int kNtuJoints = 25;
constexpr int kMaxBodies = 2;

class LineReader {
public:
    explicit LineReader(const std::string& text) : in_(text) {}

    std::vector<std::string_view> next(const char* what) {
        if (!std::getline(in_, current_)) fail(ErrorKind::parse, "truncated file: expected " + std::string(what) +
                                                                    " at line " + std::to_string(line_ + 1));
        ++line_;
        tokens_.clear();
        std::string_view view(current_);
        std::size_t pos = 0;
        while (pos < view.size()) {
            while (pos < view.size() && std::isspace(static_cast<unsigned char>(view[pos]))) ++pos;
            std::size_t end = pos;
            while (end < view.size() && !std::isspace(static_cast<unsigned char>(view[end]))) ++end;
            if (end > pos) tokens_.push_back(view.substr(pos, end - pos));
            pos = end;
        }
        return tokens_;
    }

    int line() const { return line_; }

    long parse_int(std::string_view token) const {
        long value = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size())
            fail(ErrorKind::parse, "line " + std::to_string(line_) + ": expected integer, got '" +
                                       std::string(token) + "'");
        return value;
    }

    float parse_float(std::string_view token) const {
        float value = 0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size() || !std::isfinite(value))
            fail(ErrorKind::parse, "line " + std::to_string(line_) + ": expected number, got '" +
                                       std::string(token) + "'");
        return value;
    }

    long single_int(const char* what) {
        auto tok = next(what);
        if (tok.size() != 1)
            fail(ErrorKind::parse, "line " + std::to_string(line_) + ": expected a single " + what);
        return parse_int(tok[0]);
    }

private:
    std::istringstream in_;
    std::string current_;
    std::vector<std::string_view> tokens_;
    int line_ = 0;
};

}  // namespace

SkeletonSequence parse_ntu_skeleton(const std::string& text) {
    LineReader reader(text);
    const long frame_count = reader.single_int("frame count");
    if (frame_count == 0) fail(ErrorKind::empty_input, "skeleton file has zero frames");
    require(frame_count > 0, ErrorKind::parse, "line 1: negative frame count");

    SkeletonSequence seq(3, static_cast<int>(frame_count), kNtuJoints, kMaxBodies);
    for (int t = 0; t < frame_count; ++t) {
        const long bodies = reader.single_int("body count");
        require(bodies >= 0, ErrorKind::parse, "line " + std::to_string(reader.line()) + ": negative body count");
        for (int b = 0; b < bodies; ++b) {
            auto info = reader.next("body info");
            if (info.size() != 10)
                fail(ErrorKind::parse, "line " + std::to_string(reader.line()) + ": body info needs 10 fields, got " +
                                           std::to_string(info.size()));
            const long joint_count = reader.single_int("joint count");
            if (joint_count != kNtuJoints)
                fail(ErrorKind::parse, "line " + std::to_string(reader.line()) + ": expected 25 joints, got " +
                                           std::to_string(joint_count));
            for (int v = 0; v < kNtuJoints; ++v) {
                auto fields = reader.next("joint record");
                if (fields.size() < 3)
                    fail(ErrorKind::parse, "line " + std::to_string(reader.line()) + ": joint record needs coordinates");
                for (int c = 0; c < 3; ++c) {
                    const float value = reader.parse_float(fields[c]);
                    if (b < kMaxBodies) seq.at(c, t, v, b) = value;
                }
                for (std::size_t i = 3; i < fields.size(); ++i) reader.parse_float(fields[i]);
            }
        }
    }
    return seq;
}

SkeletonSequence load_ntu_skeleton(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_ntu_skeleton(buffer.str());
}

std::string format_ntu_skeleton(const SkeletonSequence& seq) {
    require(seq.channels == 3 && seq.joints == kNtuJoints, ErrorKind::shape,
            "NTU format needs 3 channels and 25 joints");
    std::ostringstream out;
    char buf[64];
    out << seq.frames << '\n';
    for (int t = 0; t < seq.frames; ++t) {
        int bodies = 0;
        for (int p = 0; p < seq.persons; ++p)
            for (int v = 0; v < seq.joints; ++v)
                for (int c = 0; c < 3; ++c)
                    if (seq.at(c, t, v, p) != 0.0f) bodies = p + 1;
        out << bodies << '\n';
        for (int p = 0; p < bodies; ++p) {
            out << (72057594037930000LL + p) << " 0 0 0 0 0 0 0 0 2\n" << kNtuJoints << '\n';
            for (int v = 0; v < kNtuJoints; ++v) {
                for (int c = 0; c < 3; ++c) {
                    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), seq.at(c, t, v, p));
                    out.write(buf, ptr - buf);
                    out << ' ';
                }
                out << "0 0 0 0 0 0 0 0 2\n";
            }
        }
    }
    return out.str();
}

// ---------------------------------------------------------------------------
// Synthetic data

namespace {

struct Vec3 {
    double x, y, z;
};

std::vector<Vec3> rest_pose(const SkeletonGraph& graph) {
    if (graph.num_joints == 11)
        return {{0, 0, 0},        {0, 0.5, 0},       {0, 0.75, 0},      {0.25, 0.3, 0},
                {0.45, 0.15, 0},  {-0.25, 0.3, 0},   {-0.45, 0.15, 0},  {0.12, -0.45, 0},
                {0.12, -0.9, 0},  {-0.12, -0.45, 0}, {-0.12, -0.9, 0}};
    if (graph.num_joints == 5) return {{0, 0, 0}, {0, 0.6, 0}, {0.4, 0.2, 0}, {-0.4, 0.2, 0}, {0, -0.6, 0}};
    // ntu25, 0-based
    std::vector<Vec3> p(25);
    p[0] = {0, 0, 0};
    p[1] = {0, 0.25, 0};
    p[20] = {0, 0.5, 0};
    p[2] = {0, 0.6, 0};
    p[3] = {0, 0.75, 0};
    p[4] = {0.18, 0.5, 0};
    p[5] = {0.25, 0.25, 0};
    p[6] = {0.3, 0.02, 0};
    p[7] = {0.31, -0.05, 0};
    p[22] = {0.28, -0.07, 0.02};
    p[21] = {0.32, -0.12, 0};
    p[12] = {0.1, -0.02, 0};
    p[13] = {0.11, -0.45, 0};
    p[14] = {0.11, -0.85, 0};
    p[15] = {0.11, -0.9, 0.1};
    for (int i = 0; i < 25; ++i) {
        const int m = graph.mirror[i];
        if (m != i && p[i].x > 0) p[m] = {-p[i].x, p[i].y, p[i].z};
    }
    return p;
}

// Body parts that move for each action group, as (joint, signed weight).
// The groups are unions of mirror pairs so no group is the left/right
// image of another; negative weights give anti-phase motion (walking legs).
std::vector<std::vector<std::pair<int, double>>> motion_groups(const SkeletonGraph& graph) {
    std::vector<std::pair<int, double>> whole;
    for (int v = 0; v < graph.num_joints; ++v) whole.emplace_back(v, 0.6);
    if (graph.num_joints == 11)
        return {{{3, 0.5}, {4, 1.0}, {5, 0.5}, {6, 1.0}},
                {{7, 0.5}, {8, 1.0}, {9, -0.5}, {10, -1.0}},
                {{1, 0.5}, {2, 1.0}, {3, 0.5}, {5, 0.5}},
                whole};
    if (graph.num_joints == 5) return {{{2, 1.0}, {3, 1.0}}, {{4, 1.0}}, {{1, 1.0}}, whole};
    return {{{5, 0.4}, {6, 0.8}, {7, 1.0}, {21, 1.0}, {22, 1.0}, {9, 0.4}, {10, 0.8}, {11, 1.0}, {23, 1.0}, {24, 1.0}},
            {{13, 0.5}, {14, 1.0}, {15, 1.0}, {17, -0.5}, {18, -1.0}, {19, -1.0}},
            {{1, 0.3}, {20, 0.6}, {2, 0.8}, {3, 1.0}, {4, 0.5}, {8, 0.5}},
            whole};
}

}  // namespace

Dataset synth_generate(const SynthSpec& spec, std::uint64_t seed) {
    require(spec.class_count >= 2, ErrorKind::config, "synthetic class_count must be at least 2");
    require(spec.sequences_per_class >= 1, ErrorKind::config, "sequences_per_class must be positive");
    require(spec.frames >= 2, ErrorKind::config, "synthetic frames must be at least 2");
    require(spec.persons >= 1, ErrorKind::config, "persons must be positive");
    require(spec.noise_scale >= 0.0, ErrorKind::config, "noise_scale must be nonnegative");
    require(spec.motion_amplitude > 0.0, ErrorKind::config, "motion_amplitude must be positive");
    require(spec.distractor_ratio >= 0.0 && spec.yaw_range_degrees >= 0.0 && spec.scale_jitter >= 0.0 &&
                spec.scale_jitter < 1.0,
            ErrorKind::config, "distractor_ratio, yaw_range_degrees and scale_jitter must be nonnegative");

    Dataset out;
    out.graph = builtin_graph(spec.joints);
    out.class_count = spec.class_count;
    out.seed = seed;
    out.split = SplitTag::train;

    const auto pose = rest_pose(out.graph);
    const auto groups = motion_groups(out.graph);
    const int group_count = static_cast<int>(groups.size());
    const double two_pi = 2.0 * std::numbers::pi;
    const Vec3 limb_dirs[2] = {{0.0, 0.45, 0.9}, {0.0, 0.9, 0.45}};

    for (int cls = 0; cls < spec.class_count; ++cls) {
        const int group = cls % group_count;
        const int tier = cls / group_count;
        const double cycles = 1.0 + 1.5 * tier;
        const Vec3 dir = limb_dirs[tier % 2];
        for (int n = 0; n < spec.sequences_per_class; ++n) {
            Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(cls), static_cast<std::uint64_t>(n)}));
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            std::normal_distribution<double> noise(0.0, 1.0);

            SkeletonSequence seq(3, spec.frames, spec.joints, spec.persons);
            seq.label = cls;
            seq.subject_id = static_cast<int>(unit(rng) * 10);
            seq.view_id = static_cast<int>(unit(rng) * 3);

            for (int p = 0; p < spec.persons; ++p) {
                // The second performer is absent in most sequences.
                if (p > 0 && unit(rng) < 0.7) continue;
                const double yaw = (unit(rng) - 0.5) * spec.yaw_range_degrees * std::numbers::pi / 180.0;
                const double scale = 1.0 + spec.scale_jitter * (2.0 * unit(rng) - 1.0);
                const Vec3 offset{unit(rng) - 0.5 + p, 0.0, 2.5 + unit(rng)};
                const double amp = spec.motion_amplitude * (0.7 + 0.6 * unit(rng));
                const double phase = two_pi * unit(rng);

                struct Distractor {
                    double cycles, phase, amp;
                };
                std::vector<Distractor> distractors(group_count);
                for (auto& d : distractors) d = {0.5 + 3.5 * unit(rng), two_pi * unit(rng), spec.distractor_ratio * amp * unit(rng)};

                const double cy = std::cos(yaw), sy = std::sin(yaw);
                for (int t = 0; t < spec.frames; ++t) {
                    const double u = static_cast<double>(t) / spec.frames;
                    std::vector<Vec3> joints(pose);
                    for (int g = 0; g < group_count; ++g) {
                        const double a = g == group ? amp * std::sin(two_pi * cycles * u + phase)
                                                    : distractors[g].amp *
                                                          std::sin(two_pi * distractors[g].cycles * u + distractors[g].phase);
                        for (auto [j, w] : groups[g]) {
                            joints[j].x += w * a * dir.x;
                            joints[j].y += w * a * dir.y;
                            joints[j].z += w * a * dir.z;
                        }
                    }
                    for (int v = 0; v < spec.joints; ++v) {
                        const Vec3 j = joints[v];
                        const double x = scale * (cy * j.x + sy * j.z) + offset.x;
                        const double y = scale * j.y + offset.y;
                        const double z = scale * (-sy * j.x + cy * j.z) + offset.z;
                        seq.at(0, t, v, p) = static_cast<float>(x + spec.noise_scale * noise(rng));
                        seq.at(1, t, v, p) = static_cast<float>(y + spec.noise_scale * noise(rng));
                        seq.at(2, t, v, p) = static_cast<float>(z + spec.noise_scale * noise(rng));
                    }
                }
            }
            out.sequences.push_back(std::move(seq));
        }
    }
    return out;
}

std::pair<Dataset, Dataset> stratified_split(const Dataset& data, double test_fraction, std::uint64_t seed) {
    require(test_fraction > 0.0 && test_fraction < 1.0, ErrorKind::config, "test_fraction must be in (0, 1)");
    std::vector<std::vector<std::size_t>> by_class(data.class_count);
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        const int label = data.sequences[i].label.value_or(-1);
        require(label >= 0 && label < data.class_count, ErrorKind::config, "stratified split needs labels");
        by_class[label].push_back(i);
    }
    Dataset train, test;
    for (Dataset* d : {&train, &test}) {
        d->graph = data.graph;
        d->class_count = data.class_count;
        d->seed = data.seed;
    }
    train.split = SplitTag::train;
    test.split = SplitTag::test;
    Rng rng(derive_seed(seed, {0x5917ULL}));
    std::vector<char> is_test(data.sequences.size(), 0);
    for (auto& members : by_class) {
        std::shuffle(members.begin(), members.end(), rng);
        const auto n_test = static_cast<std::size_t>(std::lround(test_fraction * members.size()));
        for (std::size_t i = 0; i < n_test && i < members.size(); ++i) is_test[members[i]] = 1;
    }
    for (std::size_t i = 0; i < data.sequences.size(); ++i)
        (is_test[i] ? test : train).sequences.push_back(data.sequences[i]);
    return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// Preprocessing and streams

SkeletonSequence temporal_resample(const SkeletonSequence& seq, int target_frames) {
    require(seq.frames >= 1, ErrorKind::shape, "temporal_resample needs at least one frame");
    require(target_frames >= 1, ErrorKind::config, "target frame count must be positive");
    if (seq.frames == target_frames) return seq;

    SkeletonSequence out(seq.channels, target_frames, seq.joints, seq.persons);
    out.label = seq.label;
    out.subject_id = seq.subject_id;
    out.view_id = seq.view_id;
    const double step = target_frames > 1 ? static_cast<double>(seq.frames - 1) / (target_frames - 1) : 0.0;
    for (int t = 0; t < target_frames; ++t) {
        const double pos = t * step;
        const int lo = std::min(static_cast<int>(std::floor(pos)), seq.frames - 1);
        const int hi = std::min(lo + 1, seq.frames - 1);
        const double w = pos - lo;
        for (int c = 0; c < seq.channels; ++c)
            for (int v = 0; v < seq.joints; ++v)
                for (int p = 0; p < seq.persons; ++p) {
                    const double a = seq.at(c, lo, v, p);
                    const double b = seq.at(c, hi, v, p);
                    out.at(c, t, v, p) = static_cast<float>(w == 0.0 ? a : a + w * (b - a));
                }
    }
    return out;
}

SkeletonSequence center_sequence(const SkeletonSequence& seq, const SkeletonGraph& graph) {
    require(seq.joints == graph.num_joints, ErrorKind::shape, "sequence joints do not match graph");
    SkeletonSequence out = seq;
    float origin[3] = {0, 0, 0};
    for (int c = 0; c < std::min(seq.channels, 3); ++c) origin[c] = seq.at(c, 0, graph.root, 0);
    for (int p = 0; p < seq.persons; ++p) {
        if (!seq.person_present(p)) continue;
        for (int c = 0; c < std::min(seq.channels, 3); ++c)
            for (int t = 0; t < seq.frames; ++t)
                for (int v = 0; v < seq.joints; ++v) out.at(c, t, v, p) -= origin[c];
    }
    return out;
}

SkeletonSequence preprocess(const SkeletonSequence& seq, const SkeletonGraph& graph, int target_frames) {
    auto out = temporal_resample(center_sequence(seq, graph), target_frames);
    for (float x : out.data)
        require(std::isfinite(x), ErrorKind::shape, "non-finite coordinate after preprocessing");
    return out;
}

Stream parse_stream(const std::string& name) {
    if (name == "joint") return Stream::joint;
    if (name == "bone") return Stream::bone;
    if (name == "motion") return Stream::motion;
    fail(ErrorKind::config, "unknown stream '" + name + "' (expected joint, bone or motion)");
}

const char* to_string(Stream stream) {
    switch (stream) {
        case Stream::joint: return "joint";
        case Stream::bone: return "bone";
        case Stream::motion: return "motion";
    }
    return "?";
}

SkeletonSequence derive_stream(const SkeletonSequence& seq, const SkeletonGraph& graph, Stream stream) {
    switch (stream) {
        case Stream::joint: return seq;
        case Stream::bone: {
            require(seq.joints == graph.num_joints, ErrorKind::shape, "sequence joints do not match graph");
            SkeletonSequence out = seq;
            for (int c = 0; c < seq.channels; ++c)
                for (int t = 0; t < seq.frames; ++t)
                    for (int p = 0; p < seq.persons; ++p) {
                        out.at(c, t, graph.root, p) = 0.0f;
                        for (auto [parent, child] : graph.edges)
                            out.at(c, t, child, p) = seq.at(c, t, child, p) - seq.at(c, t, parent, p);
                    }
            return out;
        }
        case Stream::motion: {
            SkeletonSequence out = seq;
            for (int c = 0; c < seq.channels; ++c)
                for (int t = 0; t < seq.frames; ++t)
                    for (int v = 0; v < seq.joints; ++v)
                        for (int p = 0; p < seq.persons; ++p)
                            out.at(c, t, v, p) =
                                t + 1 < seq.frames ? seq.at(c, t + 1, v, p) - seq.at(c, t, v, p) : 0.0f;
            return out;
        }
    }
    fail(ErrorKind::config, "unknown stream tag");
}

Dataset prepare_dataset(const Dataset& data, Stream stream, int target_frames) {
    Dataset out;
    out.graph = data.graph;
    out.split = data.split;
    out.class_count = data.class_count;
    out.seed = data.seed;
    out.sequences.reserve(data.sequences.size());
    for (const auto& s : data.sequences)
        out.sequences.push_back(derive_stream(preprocess(s, data.graph, target_frames), data.graph, stream));
    return out;
}

// ---------------------------------------------------------------------------
// Dataset cache

namespace {

static_assert(std::endian::native == std::endian::little, "dataset cache assumes a little-endian host");

constexpr char kDatasetMagic[8] = {'H', 'I', 'C', 'L', 'R', 'D', 'S', '1'};
constexpr std::uint32_t kDatasetVersion = 1;

template <typename T>
void put(std::ostream& out, T value) {
    out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T get(std::istream& in, const std::filesystem::path& path) {
    T value{};
    if (!in.read(reinterpret_cast<char*>(&value), sizeof(T)))
        fail(ErrorKind::parse, "truncated dataset file " + path.string());
    return value;
}

}  // namespace

void write_dataset(const Dataset& data, const std::filesystem::path& path) {
    data.validate();
    const SkeletonSequence shape = data.sequences.empty() ? SkeletonSequence(3, 1, data.graph.num_joints, 1)
                                                          : data.sequences.front();
    for (const auto& s : data.sequences)
        require(s.same_shape(shape), ErrorKind::shape, "dataset cache needs a uniform frame count");

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorKind::io, "cannot write " + path.string());
    out.write(kDatasetMagic, sizeof(kDatasetMagic));
    put<std::uint32_t>(out, kDatasetVersion);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.channels));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.frames));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.joints));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(shape.persons));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.class_count));
    put<std::uint64_t>(out, data.seed);
    put<std::uint32_t>(out, data.split == SplitTag::train ? 0u : 1u);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(data.sequences.size()));
    for (const auto& s : data.sequences)
        out.write(reinterpret_cast<const char*>(s.data.data()), static_cast<std::streamsize>(s.data.size() * sizeof(float)));
    for (const auto& s : data.sequences) put<std::int32_t>(out, s.label.value_or(-1));
    for (const auto& s : data.sequences) put<std::int32_t>(out, s.subject_id.value_or(-1));
    for (const auto& s : data.sequences) put<std::int32_t>(out, s.view_id.value_or(-1));
    if (!out) fail(ErrorKind::io, "write failed for " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(ErrorKind::io, "cannot open " + path.string());
    char magic[8];
    if (!in.read(magic, sizeof(magic)) || std::memcmp(magic, kDatasetMagic, sizeof(magic)) != 0)
        fail(ErrorKind::parse, path.string() + " is not a dataset cache file");
    const auto version = get<std::uint32_t>(in, path);
    require(version == kDatasetVersion, ErrorKind::parse, "unsupported dataset cache version " + std::to_string(version));
    const int c = static_cast<int>(get<std::uint32_t>(in, path));
    const int t = static_cast<int>(get<std::uint32_t>(in, path));
    const int v = static_cast<int>(get<std::uint32_t>(in, path));
    const int p = static_cast<int>(get<std::uint32_t>(in, path));
    Dataset data;
    data.class_count = static_cast<int>(get<std::uint32_t>(in, path));
    data.seed = get<std::uint64_t>(in, path);
    data.split = get<std::uint32_t>(in, path) == 0 ? SplitTag::train : SplitTag::test;
    const auto n = get<std::uint32_t>(in, path);
    data.graph = builtin_graph(v);
    data.sequences.reserve(n);
    for (std::uint32_t i = 0; i < n; ++i) {
        SkeletonSequence s(c, t, v, p);
        if (!in.read(reinterpret_cast<char*>(s.data.data()), static_cast<std::streamsize>(s.data.size() * sizeof(float))))
            fail(ErrorKind::parse, "truncated dataset file " + path.string());
        data.sequences.push_back(std::move(s));
    }
    auto optional_id = [](std::int32_t x) { return x < 0 ? std::optional<int>{} : std::optional<int>{x}; };
    for (auto& s : data.sequences) s.label = optional_id(get<std::int32_t>(in, path));
    for (auto& s : data.sequences) s.subject_id = optional_id(get<std::int32_t>(in, path));
    for (auto& s : data.sequences) s.view_id = optional_id(get<std::int32_t>(in, path));
    data.validate();
    return data;
}

}  // namespace hiclr
