#pragma once

#include "esncl/encoding.hpp"
#include "esncl/readout.hpp"
#include "esncl/rng.hpp"

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace esncl {

enum class StrategyId { Naive, Joint, EWC, LwF, Replay, SLDA };

StrategyId strategy_from_string(const std::string& name); // throws on unknown id
std::string strategy_to_string(StrategyId id);

enum class LrSchedule { Constant, Linear };

struct TrainingConfig {
    double lr = 1e-3;
    LrSchedule lr_schedule = LrSchedule::Constant; // linear = decay to 0 over the epochs
    int batch_size = 64;
    int epochs_per_exp = 5;
    std::uint64_t seed = 0;
};

// ---------------------------------------------------------------------------
// EWC

struct EWCState {
    std::vector<Eigen::VectorXd> snapshots;   // theta_t per completed experience
    std::vector<Eigen::VectorXd> importances; // Omega_t, componentwise >= 0
    double lambda = 1.0;
};

/// Mean over patterns of the squared per-pattern loss gradient w.r.t. each
/// readout parameter (model frozen).
Eigen::VectorXd ewc_importance(const Readout& ro, const EncodedDataset& exp);

/// loss = lambda sum_t sum_i Omega_ti (theta_ti - theta_now_i)^2;
/// grad = 2 lambda sum_t Omega_t (theta_now - theta_t).
std::pair<double, Eigen::VectorXd> ewc_penalty(const Eigen::VectorXd& theta_now,
                                               const EWCState& ewc);

// ---------------------------------------------------------------------------
// LwF

struct LwFState {
    std::optional<Readout> prev_readout; // frozen, absent before experience 2
    double temperature = 2.0;
    double alpha = 1.0;
};

/// Temperature-scaled distillation: q = softmax(prev/T) held constant,
/// p = softmax(current/T), loss = alpha T^2 KL(q || p), grad w.r.t. current.
std::pair<double, Eigen::VectorXd> lwf_distill(const Eigen::VectorXd& current_logits,
                                               const Eigen::VectorXd& prev_logits,
                                               double temperature, double alpha);

// ---------------------------------------------------------------------------
// Replay

struct ReplaySlot {
    Eigen::VectorXd feature;
    int label = 0;
    int experience_id = 0;
};

struct ReplayMemory {
    int capacity = 200;
    std::vector<std::vector<ReplaySlot>> per_experience;

    std::size_t size() const;
};

struct FeatureBatch {
    Eigen::MatrixXd features; // feature_dim x n (n may be 0)
    std::vector<int> labels;
};

/// Rebalances to equal per-experience quotas (floor(capacity/k), remainder to
/// the earliest experiences): random eviction from over-quota experiences, then
/// a uniform random sample of the new experience fills its quota.
void replay_update(ReplayMemory& mem, const EncodedDataset& exp, int experience_id, Rng& rng);

/// Uniform sample with replacement across all stored patterns; empty memory
/// yields an empty batch.
FeatureBatch replay_sample(const ReplayMemory& mem, int batch_size, Rng& rng);

// ---------------------------------------------------------------------------
// SLDA

struct SLDAState {
    Eigen::MatrixXd means;  // feature_dim x num_classes
    Eigen::VectorXd counts; // per class
    Eigen::MatrixXd sigma;  // shared covariance, feature_dim x feature_dim
    long total_count = 0;
    double shrinkage = 1e-4;
    bool freeze_covariance = false; // set after the first experience when configured

    static SLDAState init(int feature_dim, int num_classes, double shrinkage = 1e-4);

    // cached classifier, rebuilt lazily after fits
    mutable bool cache_valid = false;
    mutable Eigen::MatrixXd cached_w; // feature_dim x num_classes
    mutable Eigen::VectorXd cached_b;
};

/// One streaming update: covariance first (scatter of the incoming pattern
/// against the pre-update class mean, zero for a class's first pattern), then
/// mean and counters.
void slda_fit_one(SLDAState& st, const Eigen::VectorXd& f, int y);

/// Scores via Lambda = inv((1-eps) Sigma + eps I): w_k = Lambda mu_k,
/// b_k = -1/2 mu_k' Lambda mu_k; unseen classes score -inf.
Eigen::VectorXd slda_scores(const SLDAState& st, const Eigen::VectorXd& f);
Eigen::MatrixXd slda_scores_batch(const SLDAState& st, const Eigen::MatrixXd& features);

// ---------------------------------------------------------------------------
// Uniform train-on-experience driver

struct StrategyConfig {
    StrategyId id = StrategyId::Naive;
    double ewc_lambda = 1.0;
    double lwf_alpha = 1.0;
    double lwf_temperature = 2.0;
    int replay_capacity = 200;
    double slda_shrinkage = 1e-4;
    bool slda_freeze_covariance_after_first = false;
};

/// Owns the readout, optimizer and per-strategy state; experiences must be fed
/// in stream order. All strategies leave the reservoir untouched by design:
/// only encoded features enter here.
class ContinualLearner {
public:
    ContinualLearner(int feature_dim, int num_classes_total, StrategyConfig strategy,
                     TrainingConfig training);

    void train_experience(const EncodedExperience& exp);

    /// classes x patterns score matrix for evaluation.
    Eigen::MatrixXd scores(const Eigen::MatrixXd& features) const;

    const Readout& readout() const { return readout_; }
    const EWCState& ewc_state() const { return ewc_; }
    const LwFState& lwf_state() const { return lwf_; }
    const ReplayMemory& replay_memory() const { return replay_; }
    const SLDAState& slda_state() const { return slda_; }
    StrategyId strategy() const { return strategy_.id; }

private:
    struct BatchHooks;
    void train_on(const EncodedDataset& data, bool use_ewc, bool use_lwf, bool use_replay);

    StrategyConfig strategy_;
    TrainingConfig training_;
    int feature_dim_;
    int num_classes_;
    int experiences_seen_ = 0;

    Readout readout_;
    AdamState adam_;
    EWCState ewc_;
    LwFState lwf_;
    ReplayMemory replay_;
    SLDAState slda_;
    std::vector<EncodedDataset> joint_pool_; // Joint keeps all seen training data
};

} // namespace esncl
