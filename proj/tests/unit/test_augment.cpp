#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "helpers.hpp"

#include "hiclr/augment.hpp"

using namespace hiclr;

namespace {

AugmentationInstance make(Strategy s, AugmentParams p, std::uint64_t seed = 1) { return {s, p, seed}; }

// Independent shear: x' = A x per (t, v, p) cell.
SkeletonSequence reference_shear(const SkeletonSequence& s, const std::array<double, 9>& a) {
    SkeletonSequence out = s;
    for (int t = 0; t < s.frames; ++t)
        for (int v = 0; v < s.joints; ++v)
            for (int p = 0; p < s.persons; ++p)
                for (int r = 0; r < 3; ++r) {
                    double acc = 0.0;
                    for (int c = 0; c < 3; ++c) acc += a[r * 3 + c] * s.at(c, t, v, p);
                    out.at(r, t, v, p) = static_cast<float>(acc);
                }
    return out;
}

// Independent crop: linear interpolation at start + span * t / (T - 1) (fractions of T - 1).
SkeletonSequence reference_crop(const SkeletonSequence& s, double start, double span) {
    SkeletonSequence out = s;
    const int T = s.frames;
    for (int t = 0; t < T; ++t) {
        const double pos = std::min((start + span * t / (T - 1.0)) * (T - 1), T - 1.0);
        const int lo = static_cast<int>(pos);
        const int hi = std::min(lo + 1, T - 1);
        const double w = pos - lo;
        for (int c = 0; c < 3; ++c)
            for (int v = 0; v < s.joints; ++v)
                for (int p = 0; p < s.persons; ++p)
                    out.at(c, t, v, p) = static_cast<float>((1 - w) * s.at(c, lo, v, p) + w * s.at(c, hi, v, p));
    }
    return out;
}

double channel_mean(const SkeletonSequence& s, int c) {
    double m = 0.0;
    const std::size_t n = static_cast<std::size_t>(s.frames) * s.joints * s.persons;
    for (std::size_t i = 0; i < n; ++i) m += s.data[c * n + i];
    return m / static_cast<double>(n);
}

double channel_std(const SkeletonSequence& s, int c) {
    const double m = channel_mean(s, c);
    double v = 0.0;
    const std::size_t n = static_cast<std::size_t>(s.frames) * s.joints * s.persons;
    for (std::size_t i = 0; i < n; ++i) v += (s.data[c * n + i] - m) * (s.data[c * n + i] - m);
    return std::sqrt(v / static_cast<double>(n));
}

}  // namespace

TEST_CASE("instance sampling is deterministic and re-samples") {
    for (int k = 0; k <= static_cast<int>(Strategy::skele_adain); ++k) {
        const auto s = static_cast<Strategy>(k);
        CAPTURE(to_string(s));
        Rng a(42), b(42);
        const auto x = sample_instance(s, a), y = sample_instance(s, b);
        CHECK(x.rng_seed == y.rng_seed);
        CHECK(x.params.index() == y.params.index());
        const auto z = sample_instance(s, a);
        CHECK(z.rng_seed != x.rng_seed);
        CHECK(parse_strategy(to_string(s)) == s);
    }
    CHECK_ERROR_KIND(parse_strategy("cutout"), ErrorKind::config);
}

TEST_CASE("shear parameters follow the declared uniform distribution") {
    // off-diagonal entries ~ U[-0.5, 0.5]: mean 0, sd 1/sqrt(12)
    Rng rng(5);
    const int n = 10000;
    std::array<double, 9> sum{};
    for (int i = 0; i < n; ++i) {
        const auto inst = sample_instance(Strategy::shear, rng);
        const auto& m = std::get<ShearParams>(inst.params).matrix;
        for (int j = 0; j < 9; ++j) {
            sum[j] += m[j];
            if (j % 4 == 0) CHECK(m[j] == 1.0);
            else CHECK(std::abs(m[j]) <= 0.5);
        }
    }
    const double se = (1.0 / std::sqrt(12.0)) / std::sqrt(n);
    for (int j = 0; j < 9; ++j)
        if (j % 4 != 0) CHECK(std::abs(sum[j] / n) < 3 * se);
}

TEST_CASE("declared parameter ranges") {
    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        const auto crop = std::get<CropParams>(sample_instance(Strategy::crop, rng).params);
        CHECK(crop.span >= 0.5);
        CHECK(crop.span <= 1.0);
        CHECK(crop.start >= 0.0);
        CHECK(crop.start + crop.span <= 1.0 + 1e-12);
        const auto rot = std::get<RotationParams>(sample_instance(Strategy::rotation, rng).params);
        for (double r : rot.radians) CHECK(std::abs(r) <= 30.0 * M_PI / 180.0 + 1e-12);
        const auto blur = std::get<BlurParams>(sample_instance(Strategy::gaussian_blur, rng).params);
        CHECK(blur.sigma >= 0.1);
        CHECK(blur.sigma <= 2.0);
        const auto cm = std::get<ChannelMaskParams>(sample_instance(Strategy::channel_mask, rng).params);
        CHECK(cm.channel >= 0);
        CHECK(cm.channel <= 2);
    }
    AugmentOptions bad;
    bad.mask_probability = 1.5;
    CHECK_ERROR_KIND(sample_instance(Strategy::random_mask, rng, bad), ErrorKind::config);
    bad = {};
    bad.edge_drop_probability = -0.1;
    CHECK_ERROR_KIND(sample_instance(Strategy::drop_add_edges, rng, bad), ErrorKind::config);
}

TEST_CASE("growing policy") {
    Rng rng(3);
    SUBCASE("[BA, NA, Mask] gives three nested sets") {
        const auto chain = build_growing_policy({"BA", "NA", "Mask"}, rng);
        REQUIRE(chain.sets.size() == 3);
        CHECK(chain.sets[0].instances.size() == 2);
        CHECK(chain.sets[1].instances.size() == 7);
        CHECK(chain.sets[2].instances.size() == 8);
        for (int j = 0; j < 3; ++j) {
            CHECK(chain.sets[j].set_index == j);
            CHECK(chain.sets[j].groups.size() == static_cast<std::size_t>(j + 1));
        }
        CHECK(chain.sets[0].instances[0].strategy == Strategy::shear);
        CHECK(chain.sets[0].instances[1].strategy == Strategy::crop);
        CHECK(chain.sets[2].instances.back().strategy == Strategy::random_mask);
        // re-sampled across sets
        CHECK(chain.sets[1].instances[0].rng_seed != chain.sets[0].instances[0].rng_seed);
        CHECK(chain.sets[2].instances[0].rng_seed != chain.sets[1].instances[0].rng_seed);
    }
    SUBCASE("[BA] degenerates to one set") {
        const auto chain = build_growing_policy({"BA"}, rng);
        CHECK(chain.sets.size() == 1);
    }
    SUBCASE("joined groups fill one slot in arrangement order") {
        const auto chain = build_growing_policy({"BA+NA+Mask"}, rng);
        REQUIRE(chain.sets.size() == 1);
        CHECK(chain.sets[0].instances.size() == 8);
        const auto swapped = build_growing_policy({"Mask", "BA"}, rng);
        CHECK(swapped.sets[1].instances[0].strategy == Strategy::random_mask);
    }
    SUBCASE("errors list the valid groups") {
        CHECK_ERROR_KIND(build_growing_policy({}, rng), ErrorKind::config);
        try {
            build_growing_policy({"BA", "XX"}, rng);
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("BA, NA, Mask") != std::string::npos);
        }
    }
    SUBCASE("strong groups") {
        CHECK(group_strategies("DAE") == std::vector<Strategy>{Strategy::drop_add_edges});
        CHECK(group_strategies("AdaIN") == std::vector<Strategy>{Strategy::skele_adain});
        CHECK(group_strategies("NA").size() == 5);
    }
}

TEST_CASE("apply_set") {
    const auto g = tree11_graph();
    const auto s = testing::random_sequence(20, 11, 1, 17);
    ApplyContext ctx{&g, {}, 3};

    SUBCASE("empty set is the identity") {
        const auto v = apply_set(AugmentationSet{}, s, ctx);
        CHECK(v.sequence == s);
        CHECK_FALSE(v.perturbation.has_value());
    }
    SUBCASE("DAE only touches structure") {
        AugmentationSet set;
        set.instances.push_back(make(Strategy::drop_add_edges, DropAddEdgesParams{0.5, 0.5, true}, 4));
        const auto v = apply_set(set, s, ctx);
        CHECK(v.sequence == s);
        REQUIRE(v.perturbation.has_value());
        CHECK_FALSE(v.perturbation->empty());
        CHECK(v.perturbation->layers.size() == 3);
    }
    SUBCASE("shear then crop equals composing the reference transforms") {
        const std::array<double, 9> a{1, 0.2, -0.3, 0.1, 1, 0.4, -0.5, 0.25, 1};
        AugmentationSet set;
        set.instances.push_back(make(Strategy::shear, ShearParams{a}));
        set.instances.push_back(make(Strategy::crop, CropParams{0.2, 0.6}));
        const auto v = apply_set(set, s, ctx);
        const auto expected = reference_crop(reference_shear(s, a), 0.2, 0.6);
        for (std::size_t i = 0; i < s.data.size(); ++i) CHECK(v.sequence.data[i] == doctest::Approx(expected.data[i]).epsilon(1e-5));
    }
    SUBCASE("every coordinate augmentation preserves shape and is deterministic") {
        Rng rng(8);
        std::vector<SkeletonSequence> pool{testing::random_sequence(20, 11, 1, 1)};
        for (int k = 0; k <= static_cast<int>(Strategy::skele_adain); ++k) {
            const auto inst = sample_instance(static_cast<Strategy>(k), rng);
            const auto a = apply_instance(s, inst, g, pool), b = apply_instance(s, inst, g, pool);
            CHECK(a.same_shape(s));
            CHECK(a == b);
        }
    }
    SUBCASE("flip uses the mirror permutation") {
        const auto f = apply_instance(s, make(Strategy::spatial_flip, FlipParams{true}), g);
        for (int v = 0; v < 11; ++v) CHECK(f.at(1, 3, v, 0) == s.at(1, 3, g.mirror[v], 0));
        CHECK(apply_instance(s, make(Strategy::spatial_flip, FlipParams{false}), g) == s);
    }
    SUBCASE("channel mask zeros exactly one channel") {
        const auto m = apply_instance(s, make(Strategy::channel_mask, ChannelMaskParams{true, 1}), g);
        for (int t = 0; t < 20; ++t)
            for (int v = 0; v < 11; ++v) {
                CHECK(m.at(1, t, v, 0) == 0.0f);
                CHECK(m.at(0, t, v, 0) == s.at(0, t, v, 0));
            }
    }
    SUBCASE("rotation preserves joint distances from the origin") {
        const auto r = apply_instance(s, make(Strategy::rotation, RotationParams{{0.3, -0.2, 0.5}}), g);
        for (int t = 0; t < 20; ++t)
            for (int v = 0; v < 11; ++v) {
                double a = 0, b = 0;
                for (int c = 0; c < 3; ++c) a += s.at(c, t, v, 0) * s.at(c, t, v, 0), b += r.at(c, t, v, 0) * r.at(c, t, v, 0);
                CHECK(a == doctest::Approx(b).epsilon(1e-5));
            }
    }
    SUBCASE("blur keeps a constant sequence constant") {
        const auto flat = temporal_resample(temporal_resample(s, 1), 20);
        const auto b = apply_instance(flat, make(Strategy::gaussian_blur, BlurParams{1.5}), g);
        for (std::size_t i = 0; i < b.data.size(); ++i) CHECK(b.data[i] == doctest::Approx(flat.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("random mask") {
    const auto s = testing::random_sequence(50, 25, 2, 23);
    SUBCASE("p = 0 is the identity") {
        CHECK(random_mask(s, make(Strategy::random_mask, RandomMaskParams{0.0, 0.0f})) == s);
    }
    SUBCASE("p = 1 with fill 0 zeros everything") {
        for (float x : random_mask(s, make(Strategy::random_mask, RandomMaskParams{1.0, 0.0f})).data) CHECK(x == 0.0f);
    }
    SUBCASE("masks whole cells and leaves the rest bit-identical") {
        const auto m = random_mask(s, make(Strategy::random_mask, RandomMaskParams{0.5, 0.0f}, 99));
        for (int t = 0; t < 50; ++t)
            for (int v = 0; v < 25; ++v)
                for (int p = 0; p < 2; ++p) {
                    const bool masked = m.at(0, t, v, p) == 0.0f && m.at(1, t, v, p) == 0.0f && m.at(2, t, v, p) == 0.0f;
                    for (int c = 0; c < 3; ++c) CHECK(m.at(c, t, v, p) == (masked ? 0.0f : s.at(c, t, v, p)));
                }
    }
    SUBCASE("p = 0.3 over 2500 cells stays within [0.25, 0.35]") {
        // Binomial(2500, 0.3): sd = sqrt(2500 * 0.21) = 22.9 cells, the band is
        // +-125 cells = 5.5 sd, so a failure rate per draw below 1e-7.
        int inside = 0;
        for (std::uint64_t seed = 0; seed < 200; ++seed) {
            const auto m = random_mask(s, make(Strategy::random_mask, RandomMaskParams{0.3, 0.0f}, seed));
            int masked = 0;
            for (int t = 0; t < 50; ++t)
                for (int v = 0; v < 25; ++v)
                    for (int p = 0; p < 2; ++p) masked += m.at(0, t, v, p) == 0.0f && m.at(1, t, v, p) == 0.0f;
            const double frac = masked / 2500.0;
            inside += frac >= 0.25 && frac <= 0.35;
        }
        CHECK(inside >= 198);
    }
    SUBCASE("probability outside [0, 1]") {
        CHECK_ERROR_KIND(random_mask(s, make(Strategy::random_mask, RandomMaskParams{-0.1, 0.0f})), ErrorKind::config);
    }
}

TEST_CASE("drop/add edges") {
    const auto g = ntu25_graph();
    SUBCASE("zero probabilities give an empty perturbation") {
        const auto p = drop_add_edges(g, make(Strategy::drop_add_edges, DropAddEdgesParams{0, 0, true}), 3);
        CHECK(p.empty());
        CHECK(effective_adjacency(g, &p.for_layer(0)) == effective_adjacency(g, nullptr));
    }
    SUBCASE("p_drop = 1 leaves self-loops only") {
        const auto p = drop_add_edges(g, make(Strategy::drop_add_edges, DropAddEdgesParams{1, 0, false}), 1);
        const auto a = effective_adjacency(g, &p.for_layer(0));
        for (int i = 0; i < 25; ++i)
            for (int j = 0; j < 25; ++j) CHECK(a[i * 25 + j] == (i == j ? 1.0 : 0.0));
    }
    SUBCASE("effective adjacency is symmetric, drops and adds are disjoint") {
        const auto p = drop_add_edges(g, make(Strategy::drop_add_edges, DropAddEdgesParams{0.3, 0.05, true}, 7), 4);
        CHECK(p.layers.size() == 4);
        for (const auto& e : p.layers) {
            for (const auto& d : e.dropped) CHECK(e.added.count(d) == 0);
            const auto a = effective_adjacency(g, &e);
            for (int i = 0; i < 25; ++i) {
                CHECK(a[i * 25 + i] == 1.0);
                for (int j = 0; j < 25; ++j) CHECK(a[i * 25 + j] == a[j * 25 + i]);
            }
        }
    }
    SUBCASE("p_drop = 0.1 over 24 edges drops 2.4 on average") {
        double total = 0.0;
        const int trials = 10000;
        for (int i = 0; i < trials; ++i)
            total += drop_add_edges(g, make(Strategy::drop_add_edges, DropAddEdgesParams{0.1, 0, false}, 1000 + i), 1)
                         .for_layer(0)
                         .dropped.size();
        const double mean = total / trials;
        CHECK(mean >= 2.25);
        CHECK(mean <= 2.55);
    }
}

TEST_CASE("SkeleAdaIN") {
    const auto content = testing::random_sequence(30, 11, 1, 31);
    auto style = testing::random_sequence(30, 11, 1, 32);
    for (std::size_t i = 0; i < style.data.size(); ++i) style.data[i] = 0.3f * style.data[i] + 0.7f;
    const auto inst = make(Strategy::skele_adain, AdainParams{0.0, 1e-5});

    SUBCASE("style = content is the identity") {
        const auto out = skele_adain(content, content, inst);
        for (std::size_t i = 0; i < out.data.size(); ++i) CHECK(std::abs(out.data[i] - content.data[i]) <= 1e-5);
    }
    SUBCASE("constant content maps to the style mean") {
        SkeletonSequence flat(3, 30, 11, 1);
        std::fill(flat.data.begin(), flat.data.end(), 0.25f);
        const auto out = skele_adain(flat, style, inst);
        for (int c = 0; c < 3; ++c) CHECK(out.at(c, 5, 5, 0) == doctest::Approx(channel_mean(style, c)).epsilon(1e-6));
    }
    SUBCASE("output statistics match the style") {
        const auto out = skele_adain(content, style, inst);
        for (int c = 0; c < 3; ++c) {
            CHECK(std::abs(channel_mean(out, c) - channel_mean(style, c)) <= 1e-4);
            CHECK(std::abs(channel_std(out, c) - channel_std(style, c)) <= 1e-4);
        }
    }
    SUBCASE("rank order within each channel is preserved") {
        const auto out = skele_adain(content, style, inst);
        const std::size_t n = 30 * 11;
        for (int c = 0; c < 3; ++c) {
            std::vector<std::size_t> a(n), b(n);
            std::iota(a.begin(), a.end(), 0);
            std::iota(b.begin(), b.end(), 0);
            std::stable_sort(a.begin(), a.end(), [&](auto i, auto j) { return content.data[c * n + i] < content.data[c * n + j]; });
            std::stable_sort(b.begin(), b.end(), [&](auto i, auto j) { return out.data[c * n + i] < out.data[c * n + j]; });
            CHECK(a == b);
        }
    }
    SUBCASE("shape mismatch") {
        CHECK_ERROR_KIND(skele_adain(content, testing::random_sequence(29, 11, 1, 1), inst), ErrorKind::shape);
    }
}
