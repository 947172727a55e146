#include "esncl/data.hpp"
#include "esncl/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

namespace esncl {

namespace {
[[noreturn]] void idx_error(const std::string& path, std::size_t offset, const std::string& what) {
    throw std::runtime_error("IDX format error in " + path + " at byte offset " +
                             std::to_string(offset) + ": " + what);
}
} // namespace

IdxTensor load_idx(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("load_idx: cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                     std::istreambuf_iterator<char>());
    auto read_u32 = [&](std::size_t off) -> std::uint32_t {
        if (off + 4 > bytes.size()) idx_error(path, off, "truncated header");
        return (std::uint32_t(bytes[off]) << 24) | (std::uint32_t(bytes[off + 1]) << 16) |
               (std::uint32_t(bytes[off + 2]) << 8) | std::uint32_t(bytes[off + 3]);
    };
    const std::uint32_t magic = read_u32(0);
    int ndims;
    if (magic == 0x00000803u) ndims = 3;
    else if (magic == 0x00000801u) ndims = 1;
    else idx_error(path, 0, "unexpected magic " + std::to_string(magic));

    IdxTensor t;
    std::size_t count = 1;
    for (int d = 0; d < ndims; ++d) {
        const std::uint32_t n = read_u32(4 + 4 * static_cast<std::size_t>(d));
        t.dims.push_back(static_cast<int>(n));
        count *= n;
    }
    const std::size_t payload = 4 + 4 * static_cast<std::size_t>(ndims);
    if (bytes.size() < payload + count)
        idx_error(path, bytes.size(), "truncated payload, expected " +
                                          std::to_string(payload + count) + " bytes");
    t.data.resize(count);
    for (std::size_t i = 0; i < count; ++i) t.data[i] = bytes[payload + i] / 255.0;
    return t;
}

Eigen::MatrixXd image_to_row_sequence(const Eigen::MatrixXd& img) {
    if (img.rows() != 28 || img.cols() != 28)
        throw std::invalid_argument("image_to_row_sequence: expected 28x28 image");
    return img; // row t already is the 28-dim input at step t
}

SequenceDataset load_mnist_split(const std::string& images_path, const std::string& labels_path) {
    IdxTensor images = load_idx(images_path);
    IdxTensor labels = load_idx(labels_path);
    if (images.dims.size() != 3 || images.dims[1] != 28 || images.dims[2] != 28)
        throw std::runtime_error("load_mnist_split: " + images_path + " is not a 28x28 image file");
    if (labels.dims.size() != 1 || labels.dims[0] != images.dims[0])
        throw std::runtime_error("load_mnist_split: image/label count mismatch");

    SequenceDataset ds;
    ds.num_classes = 10;
    ds.input_dim = 28;
    const int n = images.dims[0];
    ds.patterns.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Eigen::MatrixXd img(28, 28);
        for (int r = 0; r < 28; ++r)
            for (int c = 0; c < 28; ++c)
                img(r, c) = images.data[(static_cast<std::size_t>(i) * 28 + r) * 28 + c];
        const int label = static_cast<int>(labels.data[static_cast<std::size_t>(i)] * 255.0 + 0.5);
        if (label < 0 || label > 9)
            throw std::runtime_error("load_mnist_split: label out of range");
        ds.patterns.push_back({image_to_row_sequence(img), label});
    }
    return ds;
}

std::vector<Experience> make_class_incremental(const SequenceDataset& train,
                                               const SequenceDataset& test,
                                               int classes_per_exp,
                                               const std::vector<int>& class_order) {
    const int nc = train.num_classes;
    if (classes_per_exp <= 0 || nc % classes_per_exp != 0)
        throw std::invalid_argument(
            "make_class_incremental: num_classes must be divisible by classes_per_exp");
    std::vector<int> order = class_order;
    if (order.empty()) {
        order.resize(static_cast<std::size_t>(nc));
        std::iota(order.begin(), order.end(), 0);
    }
    if (static_cast<int>(order.size()) != nc ||
        std::set<int>(order.begin(), order.end()).size() != order.size())
        throw std::invalid_argument("make_class_incremental: class_order must be a permutation");

    const int n_exp = nc / classes_per_exp;
    std::vector<Experience> exps(static_cast<std::size_t>(n_exp));
    std::vector<int> class_to_exp(static_cast<std::size_t>(nc));
    for (int e = 0; e < n_exp; ++e) {
        exps[static_cast<std::size_t>(e)].id = e;
        for (int k = 0; k < classes_per_exp; ++k) {
            const int cls = order[static_cast<std::size_t>(e * classes_per_exp + k)];
            exps[static_cast<std::size_t>(e)].class_set.push_back(cls);
            class_to_exp[static_cast<std::size_t>(cls)] = e;
        }
    }
    for (auto& e : exps) {
        e.train.num_classes = nc;
        e.train.input_dim = train.input_dim;
        e.test.num_classes = nc;
        e.test.input_dim = test.input_dim;
    }
    for (const auto& p : train.patterns)
        exps[static_cast<std::size_t>(class_to_exp[static_cast<std::size_t>(p.label)])]
            .train.patterns.push_back(p);
    for (const auto& p : test.patterns)
        exps[static_cast<std::size_t>(class_to_exp[static_cast<std::size_t>(p.label)])]
            .test.patterns.push_back(p);
    return exps;
}

namespace {

// random-walk trajectory rescaled to unit amplitude
Eigen::MatrixXd walk_template(int steps, int input_dim, Rng& rng) {
    Eigen::MatrixXd m(steps, input_dim);
    for (int j = 0; j < input_dim; ++j) {
        double acc = 0.0;
        for (int t = 0; t < steps; ++t) {
            acc += rng.normal();
            m(t, j) = acc;
        }
    }
    const double amp = m.cwiseAbs().maxCoeff();
    if (amp > 0.0) m /= amp;
    return m;
}

} // namespace

SequenceDataset synthetic_benchmark(int num_classes, int per_class, int steps, int input_dim,
                                    double noise, std::uint64_t seed, double separation) {
    if (num_classes < 2) throw std::invalid_argument("synthetic_benchmark: need >= 2 classes");
    if (per_class < 1 || steps < 1 || input_dim < 1)
        throw std::invalid_argument("synthetic_benchmark: bad dimensions");
    if (separation <= 0.0)
        throw std::invalid_argument("synthetic_benchmark: separation must be positive");

    SequenceDataset ds;
    ds.num_classes = num_classes;
    ds.input_dim = input_dim;
    ds.patterns.reserve(static_cast<std::size_t>(num_classes) * static_cast<std::size_t>(per_class));

    Rng brng(derive_seed(seed, "synthetic.base"));
    const Eigen::MatrixXd base = walk_template(steps, input_dim, brng);

    for (int k = 0; k < num_classes; ++k) {
        Rng trng(derive_seed(seed, "synthetic.template." + std::to_string(k)));
        Eigen::MatrixXd tmpl = base + separation * walk_template(steps, input_dim, trng);
        const double amp = tmpl.cwiseAbs().maxCoeff();
        if (amp > 0.0) tmpl /= amp;

        Rng nrng(derive_seed(seed, "synthetic.noise." + std::to_string(k)));
        for (int i = 0; i < per_class; ++i) {
            SequencePattern p;
            p.label = k;
            p.seq = tmpl;
            if (noise > 0.0)
                for (int t = 0; t < steps; ++t)
                    for (int j = 0; j < input_dim; ++j) p.seq(t, j) += noise * nrng.normal();
            ds.patterns.push_back(std::move(p));
        }
    }
    return ds;
}

std::pair<SequenceDataset, SequenceDataset> split_per_class(const SequenceDataset& ds,
                                                            int train_per_class) {
    SequenceDataset train, test;
    train.num_classes = test.num_classes = ds.num_classes;
    train.input_dim = test.input_dim = ds.input_dim;
    std::vector<int> seen(static_cast<std::size_t>(ds.num_classes), 0);
    for (const auto& p : ds.patterns) {
        if (seen[static_cast<std::size_t>(p.label)]++ < train_per_class)
            train.patterns.push_back(p);
        else
            test.patterns.push_back(p);
    }
    return {train, test};
}

} // namespace esncl
