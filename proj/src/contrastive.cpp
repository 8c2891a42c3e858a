#include "hiclr/contrastive.hpp"

#include <cmath>

#include "hiclr/error.hpp"
#include "hiclr/random.hpp"

namespace hiclr {

using Eigen::VectorXd;

MemoryQueue::MemoryQueue(int capacity, int dim) : buffer_(RowMatrix::Zero(capacity, dim)) {
    require(capacity >= 1 && dim >= 1, ErrorKind::config, "queue capacity and dimension must be positive");
}

MemoryQueue MemoryQueue::random(int capacity, int dim, std::uint64_t seed) {
    MemoryQueue q(capacity, dim);
    Rng rng(derive_seed(seed, {0x9e0eULL}));
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int i = 0; i < capacity; ++i) {
        for (int j = 0; j < dim; ++j) q.buffer_(i, j) = normal(rng);
        q.buffer_.row(i).normalize();
    }
    return q;
}

void MemoryQueue::enqueue_batch(std::span<const VectorXd> keys) {
    require(static_cast<int>(keys.size()) <= capacity(), ErrorKind::config,
            "batch of " + std::to_string(keys.size()) + " exceeds queue capacity " + std::to_string(capacity()));
    for (const auto& k : keys) {
        require(k.size() == dim(), ErrorKind::shape, "key embedding dimension does not match the queue");
        require(std::abs(k.norm() - 1.0) <= 1e-5, ErrorKind::internal, "queue rows must be L2-normalized");
    }
    for (const auto& k : keys) {
        buffer_.row(cursor_) = k.transpose();
        cursor_ = (cursor_ + 1) % capacity();
        ++total_enqueued_;
    }
}

void MemoryQueue::restore(RowMatrix buffer, int cursor, std::uint64_t total_enqueued) {
    require(buffer.rows() >= 1 && cursor >= 0 && cursor < buffer.rows(), ErrorKind::parse, "invalid queue state");
    buffer_ = std::move(buffer);
    cursor_ = cursor;
    total_enqueued_ = total_enqueued;
}

SimFunction parse_sim_function(const std::string& name) {
    if (name == "kl") return SimFunction::kl;
    if (name == "cosine") return SimFunction::cosine;
    if (name == "l1") return SimFunction::l1;
    fail(ErrorKind::config, "unknown similarity function '" + name + "' (expected kl, cosine or l1)");
}

const char* to_string(SimFunction sim) {
    switch (sim) {
        case SimFunction::kl: return "kl";
        case SimFunction::cosine: return "cosine";
        case SimFunction::l1: return "l1";
    }
    return "?";
}

namespace {

// Logits [z . z_pos, z . m_1, ..., z . m_M] / tau.
VectorXd logits(const VectorXd& z, const VectorXd& z_pos, const RowMatrix& negatives, double tau) {
    require(tau > 0.0, ErrorKind::config, "temperature must be positive");
    require(z.size() == z_pos.size() && z.size() == negatives.cols(), ErrorKind::shape,
            "embedding dimensions do not match");
    VectorXd out(negatives.rows() + 1);
    out(0) = z.dot(z_pos);
    out.tail(negatives.rows()).noalias() = negatives * z;
    return out / tau;
}

VectorXd log_softmax(const VectorXd& x) {
    const double m = x.maxCoeff();
    const double lse = m + std::log((x.array() - m).exp().sum());
    return x.array() - lse;
}

// sum_j w_j k_j with k_0 = z_key and k_j = m_j.
VectorXd weighted_keys(const VectorXd& w, const VectorXd& z_key, const RowMatrix& negatives) {
    VectorXd out = w(0) * z_key;
    out.noalias() += negatives.transpose() * w.tail(negatives.rows());
    return out;
}

}  // namespace

double info_nce(const VectorXd& z, const VectorXd& z_pos, const RowMatrix& negatives, double tau, VectorXd* grad_z) {
    const VectorXd logp = log_softmax(logits(z, z_pos, negatives, tau));
    if (grad_z) {
        VectorXd coeff = logp.array().exp();
        coeff(0) -= 1.0;
        *grad_z = weighted_keys(coeff, z_pos, negatives) / tau;
    }
    return -logp(0);
}

VectorXd conditional_distribution(const VectorXd& z_i, const VectorXd& z_key, const RowMatrix& negatives, double tau) {
    return log_softmax(logits(z_i, z_key, negatives, tau)).array().exp();
}

HierarchicalLoss hierarchical_loss(std::span<const VectorXd> z, const VectorXd& z_key, const RowMatrix& negatives,
                                   double tau, SimFunction sim) {
    require(tau > 0.0, ErrorKind::config, "temperature must be positive");
    HierarchicalLoss out;
    const std::size_t k = z.size();
    for (const auto& zi : z) out.grads.push_back(VectorXd::Zero(zi.size()));
    if (k < 2) return out;

    std::vector<VectorXd> log_p;
    if (sim == SimFunction::kl)
        for (const auto& zi : z) log_p.push_back(log_softmax(logits(zi, z_key, negatives, tau)));

    for (std::size_t i = 1; i < k; ++i) {
        const VectorXd& strong = z[i];
        const VectorXd& weak = z[i - 1];  // stop-gradient target
        require(strong.size() == weak.size(), ErrorKind::shape, "branch embeddings differ in dimension");
        double term = 0.0;
        switch (sim) {
            case SimFunction::kl: {
                // KL(p(z|z_{i-1}) || p(z|z_i)); only log p(z|z_i) depends on a trainable input.
                const VectorXd target = log_p[i - 1].array().exp();
                const VectorXd diff = log_p[i - 1] - log_p[i];
                term = (target.array() * diff.array()).sum();
                const VectorXd p_strong = log_p[i].array().exp();
                out.grads[i] += weighted_keys(p_strong - target, z_key, negatives) / tau;
                break;
            }
            case SimFunction::cosine:
                term = -strong.dot(weak);
                out.grads[i] -= weak;
                break;
            case SimFunction::l1: {
                const VectorXd diff = strong - weak;
                term = diff.cwiseAbs().sum();
                out.grads[i] += diff.unaryExpr([](double d) { return d > 0.0 ? 1.0 : (d < 0.0 ? -1.0 : 0.0); });
                break;
            }
        }
        out.per_branch.push_back(term);
        out.value += term;
    }
    return out;
}

LossBreakdown total_loss(double info_nce_value, double hierarchical_value, std::vector<double> per_branch,
                         double lambda_h) {
    require(lambda_h >= 0.0, ErrorKind::config, "lambda_h must be nonnegative");
    LossBreakdown b;
    b.info_nce = info_nce_value;
    b.hierarchical = hierarchical_value;
    b.total = lambda_h == 0.0 ? info_nce_value : info_nce_value + lambda_h * hierarchical_value;
    b.per_branch = std::move(per_branch);
    return b;
}

}  // namespace hiclr
