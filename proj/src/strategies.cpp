#include "esncl/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace esncl {

StrategyId strategy_from_string(const std::string& name) {
    if (name == "naive") return StrategyId::Naive;
    if (name == "joint") return StrategyId::Joint;
    if (name == "ewc") return StrategyId::EWC;
    if (name == "lwf") return StrategyId::LwF;
    if (name == "replay") return StrategyId::Replay;
    if (name == "slda") return StrategyId::SLDA;
    throw std::invalid_argument("unknown strategy id: " + name);
}

std::string strategy_to_string(StrategyId id) {
    switch (id) {
        case StrategyId::Naive: return "naive";
        case StrategyId::Joint: return "joint";
        case StrategyId::EWC: return "ewc";
        case StrategyId::LwF: return "lwf";
        case StrategyId::Replay: return "replay";
        case StrategyId::SLDA: return "slda";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// EWC

Eigen::VectorXd ewc_importance(const Readout& ro, const EncodedDataset& exp) {
    const Eigen::Index n = exp.features.cols();
    if (n == 0) throw std::invalid_argument("ewc_importance: empty experience");
    const Eigen::MatrixXd logits = ro.forward_batch(exp.features);
    Eigen::MatrixXd g2(ro.num_classes(), n); // squared grad_logits per pattern
    for (Eigen::Index j = 0; j < n; ++j) {
        auto [loss, g] = softmax_xent(logits.col(j), exp.labels[static_cast<std::size_t>(j)]);
        (void)loss;
        g2.col(j) = g.array().square().matrix();
    }
    // (g f^T)^2 = g^2 (f^2)^T elementwise, so the mean factors into a product
    const Eigen::MatrixXd f2 = exp.features.array().square().matrix();
    const Eigen::MatrixXd omega_w = g2 * f2.transpose() / static_cast<double>(n);
    const Eigen::VectorXd omega_b = g2.rowwise().mean();

    Eigen::VectorXd omega(omega_w.size() + omega_b.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < omega_w.rows(); ++i)
        for (Eigen::Index j = 0; j < omega_w.cols(); ++j) omega(k++) = omega_w(i, j);
    omega.tail(omega_b.size()) = omega_b;
    return omega;
}

std::pair<double, Eigen::VectorXd> ewc_penalty(const Eigen::VectorXd& theta_now,
                                               const EWCState& ewc) {
    double loss = 0.0;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(theta_now.size());
    for (std::size_t t = 0; t < ewc.snapshots.size(); ++t) {
        const Eigen::ArrayXd diff = theta_now.array() - ewc.snapshots[t].array();
        const Eigen::ArrayXd& om = ewc.importances[t].array();
        loss += ewc.lambda * (om * diff.square()).sum();
        grad.array() += 2.0 * ewc.lambda * om * diff;
    }
    return {loss, grad};
}

// ---------------------------------------------------------------------------
// LwF

std::pair<double, Eigen::VectorXd> lwf_distill(const Eigen::VectorXd& current_logits,
                                               const Eigen::VectorXd& prev_logits,
                                               double temperature, double alpha) {
    if (current_logits.size() != prev_logits.size())
        throw std::invalid_argument("lwf_distill: dimension mismatch");
    if (!(temperature > 0.0)) throw std::invalid_argument("lwf_distill: temperature must be > 0");
    const double t = temperature;
    const Eigen::VectorXd q = softmax(prev_logits / t);
    const Eigen::VectorXd p = softmax(current_logits / t);
    double kl = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i)
        if (q(i) > 0.0) kl += q(i) * (std::log(q(i)) - std::log(p(i)));
    const double loss = alpha * t * t * kl;
    const Eigen::VectorXd grad = alpha * t * (p - q);
    return {loss, grad};
}

// ---------------------------------------------------------------------------
// Replay

std::size_t ReplayMemory::size() const {
    std::size_t n = 0;
    for (const auto& v : per_experience) n += v.size();
    return n;
}

void replay_update(ReplayMemory& mem, const EncodedDataset& exp, int experience_id, Rng& rng) {
    mem.per_experience.emplace_back();
    const int k = static_cast<int>(mem.per_experience.size());
    const int base = mem.capacity / k;
    const int remainder = mem.capacity % k;
    auto quota = [&](int idx) { return base + (idx < remainder ? 1 : 0); };

    // evict uniformly at random from over-quota old experiences
    for (int e = 0; e + 1 < k; ++e) {
        auto& slots = mem.per_experience[static_cast<std::size_t>(e)];
        while (static_cast<int>(slots.size()) > quota(e)) {
            const std::size_t victim = rng.uniform_int(slots.size());
            slots[victim] = std::move(slots.back());
            slots.pop_back();
        }
    }

    // uniform sample without replacement from the new experience (partial
    // Fisher-Yates over an index vector)
    auto& fresh = mem.per_experience.back();
    const Eigen::Index n = exp.features.cols();
    const int want = std::min<int>(quota(k - 1), static_cast<int>(n));
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    for (int i = 0; i < want; ++i) {
        const std::size_t j =
            static_cast<std::size_t>(i) + rng.uniform_int(static_cast<std::uint64_t>(n - i));
        std::swap(idx[static_cast<std::size_t>(i)], idx[j]);
        fresh.push_back({exp.features.col(idx[static_cast<std::size_t>(i)]),
                         exp.labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])],
                         experience_id});
    }
}

FeatureBatch replay_sample(const ReplayMemory& mem, int batch_size, Rng& rng) {
    FeatureBatch batch;
    const std::size_t total = mem.size();
    if (total == 0 || batch_size <= 0) {
        batch.features.resize(0, 0);
        return batch;
    }
    std::vector<const ReplaySlot*> flat;
    flat.reserve(total);
    for (const auto& v : mem.per_experience)
        for (const auto& s : v) flat.push_back(&s);
    batch.features.resize(flat[0]->feature.size(), batch_size);
    batch.labels.reserve(static_cast<std::size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        const ReplaySlot* s = flat[rng.uniform_int(total)];
        batch.features.col(i) = s->feature;
        batch.labels.push_back(s->label);
    }
    return batch;
}

// ---------------------------------------------------------------------------
// SLDA

SLDAState SLDAState::init(int feature_dim, int num_classes, double shrinkage) {
    SLDAState st;
    st.means = Eigen::MatrixXd::Zero(feature_dim, num_classes);
    st.counts = Eigen::VectorXd::Zero(num_classes);
    st.sigma = Eigen::MatrixXd::Zero(feature_dim, feature_dim);
    st.shrinkage = shrinkage;
    return st;
}

void slda_fit_one(SLDAState& st, const Eigen::VectorXd& f, int y) {
    if (f.size() != st.means.rows()) throw std::invalid_argument("slda_fit_one: dimension mismatch");
    if (y < 0 || y >= st.counts.size()) throw std::invalid_argument("slda_fit_one: label out of range");
    const double n = static_cast<double>(st.total_count);
    const double cy = st.counts(y);

    if (!st.freeze_covariance) {
        // Sigma <- (N Sigma + delta)/(N+1) with delta = c_y/(c_y+1) d d^T against
        // the pre-update class mean. This keeps the streaming state exactly equal
        // to the batch within-class scatter for any arrival order; a class's
        // first pattern contributes no scatter.
        st.sigma *= n / (n + 1.0);
        if (cy > 0.0) {
            const Eigen::VectorXd d = f - st.means.col(y);
            st.sigma.noalias() += (cy / ((cy + 1.0) * (n + 1.0))) * (d * d.transpose());
        }
    }
    st.means.col(y) = (cy * st.means.col(y) + f) / (cy + 1.0);
    st.counts(y) = cy + 1.0;
    st.total_count += 1;
    st.cache_valid = false;
}

namespace {
void slda_build_cache(const SLDAState& st) {
    if (st.cache_valid) return;
    const Eigen::Index d = st.sigma.rows();
    Eigen::MatrixXd a = (1.0 - st.shrinkage) * st.sigma;
    a.diagonal().array() += st.shrinkage;
    Eigen::LLT<Eigen::MatrixXd> llt(a);
    if (llt.info() != Eigen::Success)
        throw std::runtime_error("slda: covariance inversion failed, increase shrinkage");
    st.cached_w = llt.solve(st.means); // Lambda mu_k per column
    st.cached_b.resize(st.means.cols());
    for (Eigen::Index k = 0; k < st.means.cols(); ++k)
        st.cached_b(k) = -0.5 * st.means.col(k).dot(st.cached_w.col(k));
    (void)d;
    st.cache_valid = true;
}
} // namespace

Eigen::MatrixXd slda_scores_batch(const SLDAState& st, const Eigen::MatrixXd& features) {
    if (st.total_count == 0) throw std::invalid_argument("slda_scores: no classes observed yet");
    slda_build_cache(st);
    Eigen::MatrixXd scores = (st.cached_w.transpose() * features).colwise() + st.cached_b;
    for (Eigen::Index k = 0; k < st.counts.size(); ++k)
        if (st.counts(k) == 0.0)
            scores.row(k).setConstant(-std::numeric_limits<double>::infinity());
    return scores;
}

Eigen::VectorXd slda_scores(const SLDAState& st, const Eigen::VectorXd& f) {
    return slda_scores_batch(st, f).col(0);
}

// ---------------------------------------------------------------------------
// ContinualLearner

ContinualLearner::ContinualLearner(int feature_dim, int num_classes_total, StrategyConfig strategy,
                                   TrainingConfig training)
    : strategy_(strategy),
      training_(training),
      feature_dim_(feature_dim),
      num_classes_(num_classes_total),
      readout_(init_readout(feature_dim, num_classes_total, derive_seed(training.seed, "readout"))),
      adam_(AdamState::init(feature_dim * num_classes_total + num_classes_total, training.lr)),
      slda_(SLDAState::init(feature_dim, num_classes_total, strategy.slda_shrinkage)) {
    ewc_.lambda = strategy.ewc_lambda;
    lwf_.alpha = strategy.lwf_alpha;
    lwf_.temperature = strategy.lwf_temperature;
    replay_.capacity = strategy.replay_capacity;
}

void ContinualLearner::train_on(const EncodedDataset& data, bool use_ewc, bool use_lwf,
                                bool use_replay) {
    const Eigen::Index n = data.features.cols();
    Rng batch_rng(derive_seed(training_.seed, "batching." + std::to_string(experiences_seen_)));
    Rng replay_rng(derive_seed(training_.seed, "replay.sample." + std::to_string(experiences_seen_)));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});

    const bool distill = use_lwf && lwf_.prev_readout.has_value() && lwf_.alpha > 0.0;

    for (int epoch = 0; epoch < training_.epochs_per_exp; ++epoch) {
        if (training_.lr_schedule == LrSchedule::Linear)
            adam_.lr = training_.lr *
                       (1.0 - static_cast<double>(epoch) / static_cast<double>(training_.epochs_per_exp));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[batch_rng.uniform_int(i)]);

        for (Eigen::Index start = 0; start < n; start += training_.batch_size) {
            const Eigen::Index b = std::min<Eigen::Index>(training_.batch_size, n - start);
            FeatureBatch aug;
            if (use_replay)
                aug = replay_sample(replay_, static_cast<int>(b), replay_rng);
            const Eigen::Index m = b + aug.features.cols();

            Eigen::MatrixXd fb(feature_dim_, m);
            std::vector<int> labels(static_cast<std::size_t>(m));
            for (Eigen::Index j = 0; j < b; ++j) {
                const Eigen::Index src = order[static_cast<std::size_t>(start + j)];
                fb.col(j) = data.features.col(src);
                labels[static_cast<std::size_t>(j)] = data.labels[static_cast<std::size_t>(src)];
            }
            if (aug.features.cols() > 0) {
                fb.rightCols(aug.features.cols()) = aug.features;
                for (Eigen::Index j = 0; j < aug.features.cols(); ++j)
                    labels[static_cast<std::size_t>(b + j)] = aug.labels[static_cast<std::size_t>(j)];
            }

            const Eigen::MatrixXd logits = readout_.forward_batch(fb);
            Eigen::MatrixXd g(num_classes_, m);
            for (Eigen::Index j = 0; j < m; ++j) {
                auto [loss, gj] = softmax_xent(logits.col(j), labels[static_cast<std::size_t>(j)]);
                (void)loss;
                g.col(j) = gj;
            }
            if (distill) {
                // distillation only on current-experience patterns
                const Eigen::MatrixXd prev_logits =
                    lwf_.prev_readout->forward_batch(fb.leftCols(b));
                for (Eigen::Index j = 0; j < b; ++j) {
                    auto [dl, dg] = lwf_distill(logits.col(j), prev_logits.col(j),
                                                lwf_.temperature, lwf_.alpha);
                    (void)dl;
                    g.col(j) += dg;
                }
            }

            const double inv_m = 1.0 / static_cast<double>(m);
            Eigen::MatrixXd dw = g * fb.transpose() * inv_m;
            Eigen::VectorXd db = g.rowwise().sum() * inv_m;

            ReadoutGrad rg{std::move(dw), std::move(db)};
            Eigen::VectorXd grad = rg.flatten();
            Eigen::VectorXd theta = readout_.flatten();
            if (use_ewc && !ewc_.snapshots.empty()) {
                auto [pl, pg] = ewc_penalty(theta, ewc_);
                (void)pl;
                grad += pg;
            }
            adam_step(adam_, theta, grad);
            readout_.unflatten(theta);
        }
    }
}

void ContinualLearner::train_experience(const EncodedExperience& exp) {
    switch (strategy_.id) {
        case StrategyId::Naive:
            train_on(exp.train, false, false, false);
            break;
        case StrategyId::Joint: {
            // offline upper bound: fresh readout trained on all data seen so far
            joint_pool_.push_back(exp.train);
            Eigen::Index total = 0;
            for (const auto& d : joint_pool_) total += d.features.cols();
            EncodedDataset pooled;
            pooled.num_classes = num_classes_;
            pooled.features.resize(feature_dim_, total);
            pooled.labels.reserve(static_cast<std::size_t>(total));
            Eigen::Index at = 0;
            for (const auto& d : joint_pool_) {
                pooled.features.middleCols(at, d.features.cols()) = d.features;
                pooled.labels.insert(pooled.labels.end(), d.labels.begin(), d.labels.end());
                at += d.features.cols();
            }
            readout_ = init_readout(feature_dim_, num_classes_,
                                    derive_seed(training_.seed, "readout"));
            adam_ = AdamState::init(readout_.param_count(), training_.lr);
            train_on(pooled, false, false, false);
            break;
        }
        case StrategyId::EWC: {
            train_on(exp.train, true, false, false);
            ewc_.snapshots.push_back(readout_.flatten());
            ewc_.importances.push_back(ewc_importance(readout_, exp.train));
            break;
        }
        case StrategyId::LwF: {
            train_on(exp.train, false, true, false);
            lwf_.prev_readout = readout_;
            break;
        }
        case StrategyId::Replay: {
            train_on(exp.train, false, false, true);
            Rng update_rng(
                derive_seed(training_.seed, "replay.update." + std::to_string(experiences_seen_)));
            replay_update(replay_, exp.train, exp.id, update_rng);
            break;
        }
        case StrategyId::SLDA: {
            // one pass, one pattern at a time, no gradient training
            Rng stream_rng(
                derive_seed(training_.seed, "slda.stream." + std::to_string(experiences_seen_)));
            const Eigen::Index n = exp.train.features.cols();
            std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), Eigen::Index{0});
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[stream_rng.uniform_int(i)]);
            for (Eigen::Index j = 0; j < n; ++j) {
                const Eigen::Index src = order[static_cast<std::size_t>(j)];
                slda_fit_one(slda_, exp.train.features.col(src),
                             exp.train.labels[static_cast<std::size_t>(src)]);
            }
            if (strategy_.slda_freeze_covariance_after_first && experiences_seen_ == 0)
                slda_.freeze_covariance = true;
            break;
        }
    }
    ++experiences_seen_;
}

Eigen::MatrixXd ContinualLearner::scores(const Eigen::MatrixXd& features) const {
    if (strategy_.id == StrategyId::SLDA) return slda_scores_batch(slda_, features);
    return readout_.forward_batch(features);
}

} // namespace esncl
