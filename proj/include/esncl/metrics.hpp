#pragma once

#include "esncl/encoding.hpp"

#include <Eigen/Dense>
#include <functional>
#include <vector>

namespace esncl {

/// R(i, j) = test accuracy on experience j after training through experience i.
struct AccuracyMatrix {
    Eigen::MatrixXd R;
    std::vector<int> test_sizes;
};

/// Scores for a feature matrix: classes x patterns.
using BatchScorer = std::function<Eigen::MatrixXd(const Eigen::MatrixXd&)>;

/// Argmax with ties broken by lowest class index.
int argmax_class(const Eigen::VectorXd& scores);

/// Fraction of correct argmax predictions per experience test set, no task hint.
std::vector<double> evaluate(const BatchScorer& scorer,
                             const std::vector<EncodedExperience>& experiences);

/// Test-size-weighted mean of the final row.
double acc_metric(const AccuracyMatrix& m);
/// Plain mean of the final row.
double acc_metric_unweighted(const AccuracyMatrix& m);

/// Mean over j < last of R(j, j) - R(last, j). May be negative.
double avg_forgetting(const AccuracyMatrix& m);

} // namespace esncl
