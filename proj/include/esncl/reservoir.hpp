#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace esncl {

enum class Pooling { Last, Mean };

struct ReservoirConfig {
    int units = 1000;
    int input_dim = 28;
    double spectral_radius_target = 0.99;
    double input_scale = 1.0;
    double recurrent_density = 0.1;
    double leak_rate = 1.0;
    double bias_scale = 0.1;
    std::uint64_t seed = 0;

    void validate() const; // throws std::invalid_argument on violation
};

/// Largest absolute eigenvalue estimate by power iteration with a two-vector
/// Rayleigh-Ritz extraction (handles complex-conjugate dominant pairs). Falls
/// back to the square root of the dominant eigenvalue of M^T M when the
/// iteration stalls. Deterministic: starts from the normalized all-ones vector.
double spectral_radius(const Eigen::MatrixXd& m, double tol = 1e-12, int max_iter = 10000);
double spectral_radius(const Eigen::SparseMatrix<double>& m, double tol = 1e-12, int max_iter = 10000);

using ReservoirState = Eigen::VectorXd;

/// Fixed random recurrent encoder. Immutable after construction; all encoding
/// entry points are pure and safe to call concurrently.
class Reservoir {
public:
    explicit Reservoir(const ReservoirConfig& cfg);

    const ReservoirConfig& config() const { return cfg_; }
    const Eigen::MatrixXd& input_weights() const { return w_in_; }
    const Eigen::SparseMatrix<double>& recurrent_weights() const { return w_rec_; }
    const Eigen::VectorXd& bias() const { return bias_; }
    double achieved_radius() const { return achieved_radius_; }
    int units() const { return cfg_.units; }

    ReservoirState zero_state() const { return Eigen::VectorXd::Zero(cfg_.units); }

    /// One leaky-tanh update: h' = (1-a) h + a tanh(W_in x + W_rec h + bias).
    ReservoirState step(const ReservoirState& h, const Eigen::VectorXd& x) const;

    /// Runs the sequence from the zero state; returns last state or time-mean.
    Eigen::VectorXd encode_sequence(const Eigen::MatrixXd& seq, Pooling pooling = Pooling::Last) const;

    /// Encodes many equal-or-variable-length sequences; column j is the feature
    /// vector of sequences[j]. Equal-length runs are processed in blocks.
    Eigen::MatrixXd encode_batch(const std::vector<Eigen::MatrixXd>& sequences,
                                 Pooling pooling = Pooling::Last) const;

    void save(std::ostream& os) const;
    static Reservoir load(std::istream& is);

private:
    Reservoir() = default;
    ReservoirConfig cfg_;
    Eigen::MatrixXd w_in_;
    Eigen::SparseMatrix<double> w_rec_;
    Eigen::VectorXd bias_;
    double achieved_radius_ = 0.0;
};

} // namespace esncl
