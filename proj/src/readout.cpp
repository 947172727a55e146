#include "esncl/readout.hpp"
#include "esncl/rng.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace esncl {

Eigen::VectorXd Readout::forward(const Eigen::VectorXd& f) const {
    if (f.size() != W.cols()) throw std::invalid_argument("readout forward: feature dimension mismatch");
    return W * f + b;
}

Eigen::MatrixXd Readout::forward_batch(const Eigen::MatrixXd& features) const {
    if (features.rows() != W.cols())
        throw std::invalid_argument("readout forward: feature dimension mismatch");
    return (W * features).colwise() + b;
}

Eigen::VectorXd Readout::flatten() const {
    Eigen::VectorXd theta(W.size() + b.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) theta(k++) = W(i, j);
    theta.tail(b.size()) = b;
    return theta;
}

void Readout::unflatten(const Eigen::VectorXd& theta) {
    if (theta.size() != W.size() + b.size())
        throw std::invalid_argument("readout unflatten: size mismatch");
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < W.rows(); ++i)
        for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = theta(k++);
    b = theta.tail(b.size());
}

void Readout::save(std::ostream& os) const {
    std::int64_t r = W.rows(), c = W.cols();
    os.write(reinterpret_cast<const char*>(&r), 8);
    os.write(reinterpret_cast<const char*>(&c), 8);
    os.write(reinterpret_cast<const char*>(W.data()), static_cast<std::streamsize>(8 * W.size()));
    os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(8 * b.size()));
}

Readout Readout::load(std::istream& is) {
    std::int64_t r, c;
    if (!is.read(reinterpret_cast<char*>(&r), 8) || !is.read(reinterpret_cast<char*>(&c), 8))
        throw std::runtime_error("readout load: truncated stream");
    Readout ro;
    ro.W.resize(r, c);
    ro.b.resize(r);
    if (!is.read(reinterpret_cast<char*>(ro.W.data()), static_cast<std::streamsize>(8 * ro.W.size())) ||
        !is.read(reinterpret_cast<char*>(ro.b.data()), static_cast<std::streamsize>(8 * ro.b.size())))
        throw std::runtime_error("readout load: truncated stream");
    return ro;
}

Readout init_readout(int feature_dim, int num_classes_total, std::uint64_t seed) {
    if (feature_dim < 1 || num_classes_total < 1)
        throw std::invalid_argument("init_readout: dimensions must be >= 1");
    Readout ro;
    ro.W.resize(num_classes_total, feature_dim);
    ro.b = Eigen::VectorXd::Zero(num_classes_total);
    const double s = 1.0 / std::sqrt(static_cast<double>(feature_dim));
    Rng rng(derive_seed(seed, "readout.init"));
    for (int i = 0; i < num_classes_total; ++i)
        for (int j = 0; j < feature_dim; ++j) ro.W(i, j) = rng.uniform(-s, s);
    return ro;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
    const double mx = logits.maxCoeff();
    Eigen::VectorXd p = (logits.array() - mx).exp();
    return p / p.sum();
}

std::pair<double, Eigen::VectorXd> softmax_xent(const Eigen::VectorXd& logits, int target) {
    if (target < 0 || target >= logits.size())
        throw std::invalid_argument("softmax_xent: target out of range");
    if (!logits.allFinite()) throw std::invalid_argument("softmax_xent: non-finite logits");
    const double mx = logits.maxCoeff();
    const Eigen::ArrayXd shifted = logits.array() - mx;
    const double lse = std::log(shifted.exp().sum());
    const double loss = lse - shifted(target);
    Eigen::VectorXd grad = (shifted - lse).exp().matrix();
    grad(target) -= 1.0;
    return {loss, grad};
}

Eigen::VectorXd ReadoutGrad::flatten() const {
    Eigen::VectorXd g(dW.size() + db.size());
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < dW.rows(); ++i)
        for (Eigen::Index j = 0; j < dW.cols(); ++j) g(k++) = dW(i, j);
    g.tail(db.size()) = db;
    return g;
}

ReadoutGrad backward(const Readout& ro, const Eigen::VectorXd& f, const Eigen::VectorXd& grad_logits) {
    if (f.size() != ro.W.cols() || grad_logits.size() != ro.W.rows())
        throw std::invalid_argument("readout backward: shape mismatch");
    return {grad_logits * f.transpose(), grad_logits};
}

AdamState AdamState::init(int dim, double lr) {
    AdamState st;
    st.m = Eigen::VectorXd::Zero(dim);
    st.v = Eigen::VectorXd::Zero(dim);
    st.lr = lr;
    return st;
}

void adam_step(AdamState& st, Eigen::VectorXd& params, const Eigen::VectorXd& grads) {
    if (params.size() != st.m.size() || grads.size() != st.m.size())
        throw std::invalid_argument("adam_step: shape mismatch");
    st.t += 1;
    st.m = st.beta1 * st.m + (1.0 - st.beta1) * grads;
    st.v = st.beta2 * st.v.array().matrix() + (1.0 - st.beta2) * grads.array().square().matrix();
    const double c1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.t));
    params.array() -=
        st.lr * (st.m.array() / c1) / ((st.v.array() / c2).sqrt() + st.eps);
}

Readout ridge_readout_oracle(const Eigen::MatrixXd& features_rows,
                             const Eigen::MatrixXd& onehot_targets_rows, double lambda) {
    const Eigen::Index n = features_rows.rows();
    if (n < 1) throw std::invalid_argument("ridge_readout_oracle: need at least one sample");
    if (lambda < 0.0) throw std::invalid_argument("ridge_readout_oracle: lambda must be >= 0");
    if (onehot_targets_rows.rows() != n)
        throw std::invalid_argument("ridge_readout_oracle: sample count mismatch");
    const Eigen::Index d = features_rows.cols();

    Eigen::MatrixXd fb(n, d + 1);
    fb.leftCols(d) = features_rows;
    fb.col(d).setOnes();

    Eigen::MatrixXd gram = fb.transpose() * fb;
    gram.diagonal().array() += lambda;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(gram);
    if (ldlt.info() != Eigen::Success)
        throw std::runtime_error("ridge_readout_oracle: singular system, use lambda > 0");
    Eigen::MatrixXd wt = ldlt.solve(fb.transpose() * onehot_targets_rows);
    const double resid = (gram * wt - fb.transpose() * onehot_targets_rows).norm();
    if (lambda == 0.0 && (!wt.allFinite() || resid > 1e-6 * (1.0 + wt.norm())))
        throw std::runtime_error("ridge_readout_oracle: singular system, use lambda > 0");

    Readout ro;
    ro.W = wt.topRows(d).transpose();
    ro.b = wt.row(d).transpose();
    return ro;
}

} // namespace esncl
