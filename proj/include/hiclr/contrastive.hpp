#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace hiclr {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Fixed-capacity FIFO of L2-normalized negative embeddings.
class MemoryQueue {
public:
    MemoryQueue() = default;
    MemoryQueue(int capacity, int dim);

    // Rows drawn from a standard normal and normalized.
    static MemoryQueue random(int capacity, int dim, std::uint64_t seed);

    int capacity() const { return static_cast<int>(buffer_.rows()); }
    int dim() const { return static_cast<int>(buffer_.cols()); }
    int cursor() const { return cursor_; }
    std::uint64_t total_enqueued() const { return total_enqueued_; }
    const RowMatrix& buffer() const { return buffer_; }

    // Overwrites the oldest rows; the cursor advances modulo capacity.
    void enqueue_batch(std::span<const Eigen::VectorXd> keys);

    // Used when restoring a checkpoint.
    void restore(RowMatrix buffer, int cursor, std::uint64_t total_enqueued);

    friend bool operator==(const MemoryQueue& a, const MemoryQueue& b) {
        return a.cursor_ == b.cursor_ && a.total_enqueued_ == b.total_enqueued_ && a.buffer_ == b.buffer_;
    }

private:
    RowMatrix buffer_;
    int cursor_ = 0;
    std::uint64_t total_enqueued_ = 0;
};

enum class SimFunction { kl, cosine, l1 };

SimFunction parse_sim_function(const std::string& name);
const char* to_string(SimFunction sim);

// -log( e^{z.z_pos/tau} / (e^{z.z_pos/tau} + sum_i e^{z.m_i/tau}) ).
// When grad_z is given it receives dLoss/dz; z_pos is treated as a constant.
double info_nce(const Eigen::VectorXd& z, const Eigen::VectorXd& z_pos, const RowMatrix& negatives, double tau,
                Eigen::VectorXd* grad_z = nullptr);

// Softmax over [z_key . z_i, m_1 . z_i, ..., m_M . z_i] / tau.
Eigen::VectorXd conditional_distribution(const Eigen::VectorXd& z_i, const Eigen::VectorXd& z_key,
                                         const RowMatrix& negatives, double tau);

struct HierarchicalLoss {
    double value = 0.0;
    std::vector<double> per_branch;       // k - 1 adjacent-pair terms
    std::vector<Eigen::VectorXd> grads;   // dLoss/dz_i for each of the k branches
};

// Sum over adjacent branches of sim(z_i, stopgrad(z_{i-1})). The weaker
// branch of every pair is a constant target: gradient reaches z_i only
// through the term where it is the stronger view.
HierarchicalLoss hierarchical_loss(std::span<const Eigen::VectorXd> z, const Eigen::VectorXd& z_key,
                                   const RowMatrix& negatives, double tau, SimFunction sim);

struct LossBreakdown {
    double info_nce = 0.0;
    double hierarchical = 0.0;
    double total = 0.0;
    std::vector<double> per_branch;
};

LossBreakdown total_loss(double info_nce_value, double hierarchical_value, std::vector<double> per_branch,
                         double lambda_h);

}  // namespace hiclr
