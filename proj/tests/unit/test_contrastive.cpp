#include <cmath>
#include <functional>
#include <random>

#include "doctest.h"
#include "helpers.hpp"

#include "hiclr/contrastive.hpp"

using namespace hiclr;
using Eigen::VectorXd;

namespace {

// Plain loops, no log-sum-exp shift (inputs are unit vectors and tau >= 0.1).
std::vector<double> reference_distribution(const VectorXd& z, const VectorXd& key, const RowMatrix& neg, double tau) {
    std::vector<double> e{std::exp(z.dot(key) / tau)};
    for (int j = 0; j < neg.rows(); ++j) e.push_back(std::exp(z.dot(neg.row(j).transpose()) / tau));
    double s = 0.0;
    for (double x : e) s += x;
    for (double& x : e) x /= s;
    return e;
}

double reference_kl(const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
    return s;
}

VectorXd numeric_grad(const std::function<double(const VectorXd&)>& f, VectorXd x, double h = 1e-6) {
    VectorXd g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double x0 = x(i);
        x(i) = x0 + h;
        const double a = f(x);
        x(i) = x0 - h;
        const double b = f(x);
        x(i) = x0;
        g(i) = (a - b) / (2 * h);
    }
    return g;
}

}  // namespace

TEST_CASE("queue FIFO trace") {
    MemoryQueue q(4, 2);
    std::vector<VectorXd> ab{VectorXd::Unit(2, 0), VectorXd::Unit(2, 1)};
    std::vector<VectorXd> cd{-VectorXd::Unit(2, 0), -VectorXd::Unit(2, 1)};
    VectorXd e(2), f(2);
    e << std::sqrt(0.5), std::sqrt(0.5);
    f << std::sqrt(0.5), -std::sqrt(0.5);
    std::vector<VectorXd> ef{e, f};
    q.enqueue_batch(ab);
    CHECK(q.cursor() == 2);
    q.enqueue_batch(cd);
    CHECK(q.cursor() == 0);
    q.enqueue_batch(ef);
    CHECK(q.cursor() == 2);
    CHECK(q.total_enqueued() == 6);
    // rows hold {e, f, c, d}: a and b were evicted
    CHECK(q.buffer().row(0).transpose() == e);
    CHECK(q.buffer().row(1).transpose() == f);
    CHECK(q.buffer().row(2).transpose() == cd[0]);
    CHECK(q.buffer().row(3).transpose() == cd[1]);
}

TEST_CASE("queue errors and random init") {
    CHECK_ERROR_KIND(MemoryQueue(0, 4), ErrorKind::config);
    MemoryQueue q(2, 3);
    std::vector<VectorXd> three(3, VectorXd::Unit(3, 0));
    CHECK_ERROR_KIND(q.enqueue_batch(three), ErrorKind::config);
    std::vector<VectorXd> wrong{VectorXd::Unit(4, 0)};
    CHECK_ERROR_KIND(q.enqueue_batch(wrong), ErrorKind::shape);
    std::vector<VectorXd> unnormalized{VectorXd::Ones(3)};
    CHECK_ERROR_KIND(q.enqueue_batch(unnormalized), ErrorKind::internal);

    const auto r = MemoryQueue::random(64, 8, 3);
    for (int i = 0; i < 64; ++i) CHECK(r.buffer().row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r == MemoryQueue::random(64, 8, 3));
    CHECK_FALSE(r == MemoryQueue::random(64, 8, 4));
}

TEST_CASE("info_nce") {
    std::mt19937_64 rng(11);
    SUBCASE("matches the direct formula and its gradient") {
        for (int trial = 0; trial < 50; ++trial) {
            const VectorXd z = testing::random_unit(8, rng), zp = testing::random_unit(8, rng);
            const RowMatrix neg = testing::random_queue(16, 8, rng);
            const double tau = 0.07 + 0.5 * trial / 50.0;
            VectorXd g;
            const double l = info_nce(z, zp, neg, tau, &g);
            CHECK(l == doctest::Approx(-std::log(reference_distribution(z, zp, neg, tau)[0])).epsilon(1e-9));
            const VectorXd num = numeric_grad([&](const VectorXd& x) { return info_nce(x, zp, neg, tau); }, z);
            CHECK((g - num).norm() <= 1e-5 * (1 + num.norm()));
        }
    }
    SUBCASE("M = 0 gives zero loss") {
        const VectorXd z = testing::random_unit(8, rng);
        CHECK(info_nce(z, z, RowMatrix(0, 8), 0.2) == 0.0);
    }
    SUBCASE("aligned positive beats a far one") {
        const VectorXd z = testing::random_unit(8, rng);
        const RowMatrix neg = testing::random_queue(16, 8, rng);
        CHECK(info_nce(z, z, neg, 0.2) < info_nce(z, -z, neg, 0.2));
    }
    SUBCASE("errors") {
        const VectorXd z = testing::random_unit(8, rng);
        CHECK_ERROR_KIND(info_nce(z, z, RowMatrix(4, 8), 0.0), ErrorKind::config);
        CHECK_ERROR_KIND(info_nce(z, z, RowMatrix(4, 7), 0.2), ErrorKind::shape);
    }
}

TEST_CASE("conditional distribution") {
    std::mt19937_64 rng(12);
    const VectorXd z = testing::random_unit(8, rng), k = testing::random_unit(8, rng);
    const RowMatrix neg = testing::random_queue(16, 8, rng);
    const VectorXd p = conditional_distribution(z, k, neg, 0.2);
    REQUIRE(p.size() == 17);
    CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-12));
    const auto ref = reference_distribution(z, k, neg, 0.2);
    for (int i = 0; i < 17; ++i) CHECK(std::abs(p(i) - ref[i]) <= 1e-12);
    // extreme logits stay finite
    const VectorXd sharp = conditional_distribution(z, z, neg, 1e-3);
    CHECK(sharp.allFinite());
    CHECK(sharp.sum() == doctest::Approx(1.0));
}

TEST_CASE("hierarchical loss") {
    std::mt19937_64 rng(13);
    const int k = 3;
    std::vector<VectorXd> z;
    for (int i = 0; i < k; ++i) z.push_back(testing::random_unit(8, rng));
    const VectorXd key = testing::random_unit(8, rng);
    const RowMatrix neg = testing::random_queue(16, 8, rng);
    const double tau = 0.2;

    SUBCASE("kl matches the sum of adjacent KL terms") {
        const auto h = hierarchical_loss(z, key, neg, tau, SimFunction::kl);
        REQUIRE(h.per_branch.size() == 2);
        double expected = 0.0;
        for (int i = 1; i < k; ++i) {
            const double term = reference_kl(reference_distribution(z[i - 1], key, neg, tau),
                                             reference_distribution(z[i], key, neg, tau));
            CHECK(h.per_branch[i - 1] == doctest::Approx(term).epsilon(1e-9));
            expected += term;
        }
        CHECK(h.value == doctest::Approx(expected).epsilon(1e-9));
    }
    SUBCASE("identical branches give zero") {
        std::vector<VectorXd> same(3, z[0]);
        CHECK(std::abs(hierarchical_loss(same, key, neg, tau, SimFunction::kl).value) <= 1e-12);
        CHECK(hierarchical_loss(same, key, neg, tau, SimFunction::l1).value == 0.0);
        CHECK(hierarchical_loss(same, key, neg, tau, SimFunction::cosine).value == doctest::Approx(-2.0));
    }
    SUBCASE("single branch has no terms") {
        const auto h = hierarchical_loss(std::span(z).first(1), key, neg, tau, SimFunction::kl);
        CHECK(h.value == 0.0);
        CHECK(h.per_branch.empty());
        CHECK(h.grads.size() == 1);
    }
    SUBCASE("gradients flow to the strong side only") {
        for (auto sim : {SimFunction::kl, SimFunction::cosine, SimFunction::l1}) {
            CAPTURE(to_string(sim));
            const auto h = hierarchical_loss(z, key, neg, tau, sim);
            // branch 0 is only ever a target
            CHECK(h.grads[0].norm() == 0.0);
            // branch 2: derivative with z_1 held as a constant target
            auto f = [&](const VectorXd& x) {
                std::vector<VectorXd> pair{z[1], x};
                return hierarchical_loss(pair, key, neg, tau, sim).value;
            };
            const VectorXd num = numeric_grad(f, z[2]);
            CHECK((h.grads[2] - num).norm() <= 1e-5 * (1 + num.norm()));
        }
    }
    SUBCASE("sim names") {
        for (auto sim : {SimFunction::kl, SimFunction::cosine, SimFunction::l1}) CHECK(parse_sim_function(to_string(sim)) == sim);
        CHECK_ERROR_KIND(parse_sim_function("dot"), ErrorKind::config);
    }
}

TEST_CASE("total loss") {
    const auto b = total_loss(2.0, 0.5, {0.2, 0.3}, 0.5);
    CHECK(b.total == 2.25);
    CHECK(total_loss(2.0, 0.5, {}, 0.0).total == 2.0);
    // lambda_h = 0 drops the term even when it is not finite
    CHECK(total_loss(2.0, std::nan(""), {}, 0.0).total == 2.0);
    CHECK_ERROR_KIND(total_loss(1.0, 1.0, {}, -1.0), ErrorKind::config);
}
