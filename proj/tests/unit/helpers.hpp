#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Dense>

#include "hiclr/contrastive.hpp"
#include "hiclr/error.hpp"
#include "hiclr/skeleton.hpp"

namespace testing {

// Uniform coordinates in [-1, 1].
inline hiclr::SkeletonSequence random_sequence(int t, int v, int p, std::uint64_t seed, int c = 3) {
    hiclr::SkeletonSequence s(c, t, v, p);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<float> u(-1.0f, 1.0f);
    for (auto& x : s.data) x = u(rng);
    return s;
}

inline Eigen::VectorXd random_unit(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> n;
    Eigen::VectorXd x(d);
    for (int i = 0; i < d; ++i) x[i] = n(rng);
    return x.normalized();
}

inline hiclr::RowMatrix random_queue(int m, int d, std::mt19937_64& rng) {
    hiclr::RowMatrix q(m, d);
    for (int i = 0; i < m; ++i) q.row(i) = random_unit(d, rng).transpose();
    return q;
}

}  // namespace testing

// Checks that the expression throws hiclr::Error of the given kind.
#define CHECK_ERROR_KIND(expr, expected_kind)                          \
    do {                                                               \
        bool thrown_ = false;                                          \
        try {                                                          \
            (void)(expr);                                              \
        } catch (const hiclr::Error& e_) {                             \
            thrown_ = true;                                            \
            CHECK(e_.kind() == (expected_kind));                       \
        }                                                              \
        CHECK_MESSAGE(thrown_, "expected an error from " #expr);       \
    } while (0)
