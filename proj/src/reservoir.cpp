#include "esncl/reservoir.hpp"
#include "esncl/rng.hpp"

#include <algorithm>
#include <complex>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace esncl {

void ReservoirConfig::validate() const {
    if (units <= 0) throw std::invalid_argument("reservoir: units must be positive");
    if (input_dim <= 0) throw std::invalid_argument("reservoir: input_dim must be positive");
    if (!(spectral_radius_target > 0.0 && spectral_radius_target < 1.0))
        throw std::invalid_argument("reservoir: spectral_radius_target must lie in (0, 1)");
    if (!(input_scale > 0.0)) throw std::invalid_argument("reservoir: input_scale must be positive");
    if (!(recurrent_density > 0.0 && recurrent_density <= 1.0))
        throw std::invalid_argument("reservoir: recurrent_density must lie in (0, 1]");
    if (!(leak_rate > 0.0 && leak_rate <= 1.0))
        throw std::invalid_argument("reservoir: leak_rate must lie in (0, 1]");
    if (bias_scale < 0.0) throw std::invalid_argument("reservoir: bias_scale must be non-negative");
}

namespace {

// Block power (subspace) iteration with Rayleigh-Ritz extraction. A block of
// four vectors tracks the dominant invariant subspace, so complex-conjugate
// dominant pairs, sign flips and near-degenerate moduli all converge where a
// single power vector would oscillate. Deterministic: the starting block is a
// fixed sign pattern over the all-ones vector.
template <typename MatVec>
double power_iteration_radius(int n, const MatVec& apply, double tol, int max_iter,
                              bool* stalled = nullptr) {
    const int block = std::min(n, 4);
    Eigen::MatrixXd v(n, block);
    for (int j = 0; j < block; ++j)
        for (int i = 0; i < n; ++i)
            v(i, j) = ((i / (j + 1)) % 2 == 0) ? 1.0 : -1.0;

    if (stalled) *stalled = true;
    double prev = -1.0;
    int steady = 0;
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
        const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(n, block);
        Eigen::MatrixXd mq(n, block);
        for (int j = 0; j < block; ++j) mq.col(j) = apply(q.col(j));
        if (mq.norm() == 0.0) { if (stalled) *stalled = false; return 0.0; }

        const Eigen::MatrixXd t = q.transpose() * mq;
        const Eigen::EigenSolver<Eigen::MatrixXd> es(t, false);
        const double est = es.eigenvalues().cwiseAbs().maxCoeff();

        if (prev >= 0.0 && std::abs(est - prev) <= tol * std::max(est, 1e-300)) {
            if (++steady >= 3) {
                if (stalled) *stalled = false;
                return est;
            }
        } else {
            steady = 0;
        }
        prev = est;
        v = mq;
    }
    return prev < 0.0 ? 0.0 : prev;
}

template <typename Mat>
double spectral_radius_impl(const Mat& m, double tol, int max_iter) {
    if (m.rows() != m.cols()) throw std::invalid_argument("spectral_radius: matrix must be square");
    if (max_iter < 1) throw std::invalid_argument("spectral_radius: max_iter must be >= 1");
    const int n = static_cast<int>(m.rows());
    bool stalled = false;
    const double est = power_iteration_radius(
        n, [&](const Eigen::VectorXd& v) -> Eigen::VectorXd { return m * v; }, tol, max_iter,
        &stalled);
    if (!stalled) return est;
    // Stalled: iterate on M^T M, whose dominant eigenvalue is sigma_max^2 >= rho^2.
    const double s2 = power_iteration_radius(
        n,
        [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
            return m.transpose() * (m * v).eval();
        },
        tol, max_iter);
    return std::min(est, std::sqrt(s2));
}

} // namespace

double spectral_radius(const Eigen::MatrixXd& m, double tol, int max_iter) {
    if (!m.allFinite()) throw std::invalid_argument("spectral_radius: matrix has non-finite entries");
    return spectral_radius_impl(m, tol, max_iter);
}

double spectral_radius(const Eigen::SparseMatrix<double>& m, double tol, int max_iter) {
    return spectral_radius_impl(m, tol, max_iter);
}

Reservoir::Reservoir(const ReservoirConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const int n = cfg.units;

    Rng rec_rng(derive_seed(cfg.seed, "reservoir.recurrent"));
    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(cfg.recurrent_density * n * n * 1.1) + 16);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            const double u = rec_rng.uniform();
            if (u < cfg.recurrent_density) trips.emplace_back(i, j, rec_rng.uniform(-1.0, 1.0));
        }
    w_rec_.resize(n, n);
    w_rec_.setFromTriplets(trips.begin(), trips.end());
    w_rec_.makeCompressed();

    const double raw_radius = spectral_radius(w_rec_, 1e-10, 20000);
    if (!(raw_radius > 0.0))
        throw std::runtime_error(
            "reservoir: sampled recurrent matrix has zero spectral radius; "
            "use a different seed or a higher recurrent_density");
    w_rec_ *= cfg.spectral_radius_target / raw_radius;
    achieved_radius_ = spectral_radius(w_rec_, 1e-10, 20000);

    Rng in_rng(derive_seed(cfg.seed, "reservoir.input"));
    w_in_.resize(n, cfg.input_dim);
    for (int j = 0; j < cfg.input_dim; ++j)
        for (int i = 0; i < n; ++i) w_in_(i, j) = in_rng.uniform(-cfg.input_scale, cfg.input_scale);

    Rng bias_rng(derive_seed(cfg.seed, "reservoir.bias"));
    bias_.resize(n);
    for (int i = 0; i < n; ++i)
        bias_(i) = cfg.bias_scale == 0.0 ? 0.0 : bias_rng.uniform(-cfg.bias_scale, cfg.bias_scale);
}

ReservoirState Reservoir::step(const ReservoirState& h, const Eigen::VectorXd& x) const {
    if (x.size() != cfg_.input_dim) throw std::invalid_argument("reservoir step: input dimension mismatch");
    if (!x.allFinite()) throw std::invalid_argument("reservoir step: non-finite input");
    const double a = cfg_.leak_rate;
    Eigen::VectorXd pre = w_in_ * x + w_rec_ * h + bias_;
    return (1.0 - a) * h + a * pre.array().tanh().matrix();
}

Eigen::VectorXd Reservoir::encode_sequence(const Eigen::MatrixXd& seq, Pooling pooling) const {
    if (seq.rows() == 0) throw std::invalid_argument("encode_sequence: empty sequence");
    if (seq.cols() != cfg_.input_dim)
        throw std::invalid_argument("encode_sequence: input dimension mismatch");
    ReservoirState h = zero_state();
    Eigen::VectorXd acc = Eigen::VectorXd::Zero(cfg_.units);
    for (Eigen::Index t = 0; t < seq.rows(); ++t) {
        h = step(h, seq.row(t).transpose());
        if (pooling == Pooling::Mean) acc += h;
    }
    if (pooling == Pooling::Mean) return acc / static_cast<double>(seq.rows());
    return h;
}

Eigen::MatrixXd Reservoir::encode_batch(const std::vector<Eigen::MatrixXd>& sequences,
                                        Pooling pooling) const {
    const int n = cfg_.units;
    Eigen::MatrixXd out(n, static_cast<Eigen::Index>(sequences.size()));
    constexpr Eigen::Index kBlock = 256;
    const double a = cfg_.leak_rate;

    // Group contiguous runs of equal-length sequences into dense blocks so the
    // recurrent product is sparse * dense instead of per-pattern matvecs.
    std::size_t i = 0;
    while (i < sequences.size()) {
        const Eigen::Index len = sequences[i].rows();
        std::size_t j = i + 1;
        while (j < sequences.size() && j - i < static_cast<std::size_t>(kBlock) &&
               sequences[j].rows() == len)
            ++j;
        const Eigen::Index b = static_cast<Eigen::Index>(j - i);
        if (len == 0) throw std::invalid_argument("encode_batch: empty sequence");

        Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, b);
        Eigen::MatrixXd acc = pooling == Pooling::Mean ? Eigen::MatrixXd::Zero(n, b)
                                                       : Eigen::MatrixXd();
        Eigen::MatrixXd xt(cfg_.input_dim, b);
        for (Eigen::Index t = 0; t < len; ++t) {
            for (Eigen::Index k = 0; k < b; ++k) {
                const Eigen::MatrixXd& s = sequences[i + static_cast<std::size_t>(k)];
                if (s.cols() != cfg_.input_dim)
                    throw std::invalid_argument("encode_batch: input dimension mismatch");
                xt.col(k) = s.row(t).transpose();
            }
            Eigen::MatrixXd pre = w_in_ * xt + w_rec_ * h;
            pre.colwise() += bias_;
            h = (1.0 - a) * h + a * pre.array().tanh().matrix();
            if (pooling == Pooling::Mean) acc += h;
        }
        out.middleCols(static_cast<Eigen::Index>(i), b) =
            pooling == Pooling::Mean ? (acc / static_cast<double>(len)).eval() : h;
        i = j;
    }
    return out;
}

namespace {
void write_raw(std::ostream& os, const void* p, std::size_t bytes) {
    os.write(static_cast<const char*>(p), static_cast<std::streamsize>(bytes));
}
void read_raw(std::istream& is, void* p, std::size_t bytes) {
    if (!is.read(static_cast<char*>(p), static_cast<std::streamsize>(bytes)))
        throw std::runtime_error("reservoir load: truncated stream");
}
} // namespace

void Reservoir::save(std::ostream& os) const {
    const char magic[8] = {'E', 'S', 'N', 'R', 'S', 'V', '0', '1'};
    write_raw(os, magic, 8);
    std::int64_t units = cfg_.units, input_dim = cfg_.input_dim;
    write_raw(os, &units, 8);
    write_raw(os, &input_dim, 8);
    double d[5] = {cfg_.spectral_radius_target, cfg_.input_scale, cfg_.recurrent_density,
                   cfg_.leak_rate, cfg_.bias_scale};
    write_raw(os, d, sizeof(d));
    std::uint64_t seed = cfg_.seed;
    write_raw(os, &seed, 8);
    write_raw(os, &achieved_radius_, 8);
    write_raw(os, w_in_.data(), sizeof(double) * static_cast<std::size_t>(w_in_.size()));
    write_raw(os, bias_.data(), sizeof(double) * static_cast<std::size_t>(bias_.size()));
    Eigen::MatrixXd dense = Eigen::MatrixXd(w_rec_);
    write_raw(os, dense.data(), sizeof(double) * static_cast<std::size_t>(dense.size()));
}

Reservoir Reservoir::load(std::istream& is) {
    char magic[8];
    read_raw(is, magic, 8);
    if (std::string_view(magic, 8) != "ESNRSV01")
        throw std::runtime_error("reservoir load: bad magic");
    Reservoir r;
    std::int64_t units, input_dim;
    read_raw(is, &units, 8);
    read_raw(is, &input_dim, 8);
    r.cfg_.units = static_cast<int>(units);
    r.cfg_.input_dim = static_cast<int>(input_dim);
    double d[5];
    read_raw(is, d, sizeof(d));
    r.cfg_.spectral_radius_target = d[0];
    r.cfg_.input_scale = d[1];
    r.cfg_.recurrent_density = d[2];
    r.cfg_.leak_rate = d[3];
    r.cfg_.bias_scale = d[4];
    std::uint64_t seed;
    read_raw(is, &seed, 8);
    r.cfg_.seed = seed;
    read_raw(is, &r.achieved_radius_, 8);
    r.w_in_.resize(units, input_dim);
    read_raw(is, r.w_in_.data(), sizeof(double) * static_cast<std::size_t>(r.w_in_.size()));
    r.bias_.resize(units);
    read_raw(is, r.bias_.data(), sizeof(double) * static_cast<std::size_t>(r.bias_.size()));
    Eigen::MatrixXd dense(units, units);
    read_raw(is, dense.data(), sizeof(double) * static_cast<std::size_t>(dense.size()));
    r.w_rec_ = dense.sparseView();
    r.w_rec_.makeCompressed();
    return r;
}

} // namespace esncl
