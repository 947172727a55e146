#include "esncl/metrics.hpp"

#include <stdexcept>

namespace esncl {

int argmax_class(const Eigen::VectorXd& scores) {
    int best = 0;
    for (int i = 1; i < scores.size(); ++i)
        if (scores(i) > scores(best)) best = i;
    return best;
}

std::vector<double> evaluate(const BatchScorer& scorer,
                             const std::vector<EncodedExperience>& experiences) {
    std::vector<double> acc;
    acc.reserve(experiences.size());
    for (const auto& e : experiences) {
        const Eigen::Index n = e.test.features.cols();
        if (n == 0) throw std::invalid_argument("evaluate: empty test set");
        const Eigen::MatrixXd scores = scorer(e.test.features);
        int correct = 0;
        for (Eigen::Index j = 0; j < n; ++j)
            if (argmax_class(scores.col(j)) == e.test.labels[static_cast<std::size_t>(j)])
                ++correct;
        acc.push_back(static_cast<double>(correct) / static_cast<double>(n));
    }
    return acc;
}

double acc_metric(const AccuracyMatrix& m) {
    const Eigen::Index last = m.R.rows() - 1;
    double num = 0.0, den = 0.0;
    for (Eigen::Index j = 0; j < m.R.cols(); ++j) {
        num += m.R(last, j) * m.test_sizes[static_cast<std::size_t>(j)];
        den += m.test_sizes[static_cast<std::size_t>(j)];
    }
    return num / den;
}

double acc_metric_unweighted(const AccuracyMatrix& m) {
    return m.R.row(m.R.rows() - 1).mean();
}

double avg_forgetting(const AccuracyMatrix& m) {
    const Eigen::Index last = m.R.rows() - 1;
    if (last < 1) throw std::invalid_argument("avg_forgetting: needs at least 2 experiences");
    double s = 0.0;
    for (Eigen::Index j = 0; j < last; ++j) s += m.R(j, j) - m.R(last, j);
    return s / static_cast<double>(last);
}

} // namespace esncl
