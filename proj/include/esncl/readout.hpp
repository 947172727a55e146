#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <utility>

namespace esncl {

/// Linear softmax readout over reservoir features. Single head: the output
/// dimension covers the union of all classes and never changes across
/// experiences.
struct Readout {
    Eigen::MatrixXd W; // num_classes_total x feature_dim
    Eigen::VectorXd b; // num_classes_total

    int feature_dim() const { return static_cast<int>(W.cols()); }
    int num_classes() const { return static_cast<int>(W.rows()); }

    Eigen::VectorXd forward(const Eigen::VectorXd& f) const;
    /// Column j of the result holds the logits for feature column j.
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& features) const;

    /// Flattened parameter vector: W row-major, then b.
    Eigen::VectorXd flatten() const;
    void unflatten(const Eigen::VectorXd& theta);
    int param_count() const { return static_cast<int>(W.size() + b.size()); }

    void save(std::ostream& os) const;
    static Readout load(std::istream& is);
};

Readout init_readout(int feature_dim, int num_classes_total, std::uint64_t seed);

/// Stable softmax cross-entropy. Returns (loss, gradient w.r.t. logits).
std::pair<double, Eigen::VectorXd> softmax_xent(const Eigen::VectorXd& logits, int target);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

struct ReadoutGrad {
    Eigen::MatrixXd dW;
    Eigen::VectorXd db;
    Eigen::VectorXd flatten() const;
};

/// dW = grad_logits f^T, db = grad_logits.
ReadoutGrad backward(const Readout& ro, const Eigen::VectorXd& f, const Eigen::VectorXd& grad_logits);

struct AdamState {
    Eigen::VectorXd m;
    Eigen::VectorXd v;
    long t = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(int dim, double lr = 1e-3);
};

/// One Adam update with bias correction; params mutated in place.
void adam_step(AdamState& st, Eigen::VectorXd& params, const Eigen::VectorXd& grads);

/// Closed-form ridge readout (bias via an appended constant column). Offline
/// oracle for joint-training sanity checks; not used by any strategy.
Readout ridge_readout_oracle(const Eigen::MatrixXd& features_rows,
                             const Eigen::MatrixXd& onehot_targets_rows, double lambda);

} // namespace esncl
