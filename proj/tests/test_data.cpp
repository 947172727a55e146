#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "esncl/data.hpp"
#include "esncl/rng.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

using namespace esncl;

namespace {

const char* mnist_dir() {
    if (const char* env = std::getenv("ESNCL_DATA_DIR")) return env;
    return "/root/data/mnist";
}

bool mnist_available() {
    return std::filesystem::exists(std::string(mnist_dir()) + "/train-images-idx3-ubyte");
}

std::string write_temp(const std::vector<unsigned char>& bytes) {
    const std::string path =
        (std::filesystem::temp_directory_path() / "esncl_idx_test.bin").string();
    std::ofstream os(path, std::ios::binary);
    os.write(reinterpret_cast<const char*>(bytes.data()),
             static_cast<std::streamsize>(bytes.size()));
    return path;
}

} // namespace

TEST_CASE("idx loader on the standard MNIST files") {
    if (!mnist_available()) {
        MESSAGE("MNIST files not found, skipping");
        return;
    }
    const std::string dir = mnist_dir();
    const IdxTensor images = load_idx(dir + "/train-images-idx3-ubyte");
    REQUIRE(images.dims == std::vector<int>{60000, 28, 28});
    double lo = 1e9, hi = -1e9;
    for (double v : images.data) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);

    const IdxTensor labels = load_idx(dir + "/train-labels-idx1-ubyte");
    REQUIRE(labels.dims == std::vector<int>{60000});
    // first training label of the canonical file
    CHECK(static_cast<int>(labels.data[0] * 255.0 + 0.5) == 5);
    for (std::size_t i = 0; i < 200; ++i) {
        const int l = static_cast<int>(labels.data[i] * 255.0 + 0.5);
        CHECK(l >= 0);
        CHECK(l <= 9);
    }
}

TEST_CASE("idx loader error paths") {
    SUBCASE("truncated image file") {
        std::vector<unsigned char> bytes = {0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 28, 0, 0, 0, 28};
        CHECK_THROWS_WITH_AS(load_idx(write_temp(bytes)),
                             doctest::Contains("byte offset"), std::runtime_error);
    }
    SUBCASE("wrong magic") {
        std::vector<unsigned char> bytes = {0, 0, 9, 9, 0, 0, 0, 0};
        CHECK_THROWS_AS(load_idx(write_temp(bytes)), std::runtime_error);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(load_idx("/nonexistent/file"), std::runtime_error); }
}

TEST_CASE("image to row sequence") {
    SUBCASE("zero image gives zero steps") {
        CHECK(image_to_row_sequence(Eigen::MatrixXd::Zero(28, 28)).isZero(0.0));
    }
    SUBCASE("single nonzero row maps to a single nonzero step") {
        Eigen::MatrixXd img = Eigen::MatrixXd::Zero(28, 28);
        img.row(0).setConstant(0.5);
        const Eigen::MatrixXd seq = image_to_row_sequence(img);
        CHECK(seq.row(0).isConstant(0.5));
        CHECK(seq.bottomRows(27).isZero(0.0));
    }
    SUBCASE("round trip is the identity") {
        Rng rng(5);
        Eigen::MatrixXd img(28, 28);
        for (int i = 0; i < 28; ++i)
            for (int j = 0; j < 28; ++j) img(i, j) = rng.uniform();
        CHECK(image_to_row_sequence(img) == img);
    }
    SUBCASE("wrong shape is rejected") {
        CHECK_THROWS_AS(image_to_row_sequence(Eigen::MatrixXd::Zero(27, 28)),
                        std::invalid_argument);
    }
}

namespace {
SequenceDataset tiny_dataset(int num_classes, int per_class, std::uint64_t seed) {
    Rng rng(seed);
    SequenceDataset ds;
    ds.num_classes = num_classes;
    ds.input_dim = 2;
    for (int k = 0; k < num_classes; ++k)
        for (int i = 0; i < per_class; ++i) {
            SequencePattern p;
            p.label = k;
            p.seq.resize(4, 2);
            for (int t = 0; t < 4; ++t)
                for (int j = 0; j < 2; ++j) p.seq(t, j) = rng.uniform(-1.0, 1.0);
            ds.patterns.push_back(p);
        }
    return ds;
}
} // namespace

TEST_CASE("class-incremental partition") {
    const SequenceDataset train = tiny_dataset(10, 6, 1);
    const SequenceDataset test = tiny_dataset(10, 3, 2);

    SUBCASE("natural order, 2 classes per experience") {
        const auto exps = make_class_incremental(train, test, 2);
        REQUIRE(exps.size() == 5);
        for (int e = 0; e < 5; ++e) {
            CHECK(exps[static_cast<std::size_t>(e)].class_set ==
                  std::vector<int>{2 * e, 2 * e + 1});
            for (const auto& p : exps[static_cast<std::size_t>(e)].train.patterns)
                CHECK(p.label / 2 == e);
        }
    }
    SUBCASE("all classes in one experience") {
        const auto exps = make_class_incremental(train, test, 10);
        REQUIRE(exps.size() == 1);
        CHECK(exps[0].train.patterns.size() == train.patterns.size());
    }
    SUBCASE("test sets partition the full test set") {
        const auto exps = make_class_incremental(train, test, 2);
        std::size_t total = 0;
        std::set<int> seen_classes;
        for (const auto& e : exps) {
            total += e.test.patterns.size();
            for (int c : e.class_set) CHECK(seen_classes.insert(c).second);
        }
        CHECK(total == test.patterns.size());
        CHECK(seen_classes.size() == 10);
    }
    SUBCASE("non-divisible split is rejected") {
        CHECK_THROWS_AS(make_class_incremental(train, test, 3), std::invalid_argument);
    }
    SUBCASE("shuffled class order respects the permutation") {
        const std::vector<int> order = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
        const auto exps = make_class_incremental(train, test, 2, order);
        CHECK(exps[0].class_set == std::vector<int>{9, 8});
    }
}

TEST_CASE("synthetic benchmark") {
    SUBCASE("zero noise makes all patterns of a class identical") {
        const SequenceDataset ds = synthetic_benchmark(3, 5, 20, 2, 0.0, 7);
        for (int k = 0; k < 3; ++k) {
            const auto& first = ds.patterns[static_cast<std::size_t>(k * 5)].seq;
            for (int i = 1; i < 5; ++i)
                CHECK(ds.patterns[static_cast<std::size_t>(k * 5 + i)].seq == first);
        }
        // nearest-template classification is perfect
        for (const auto& p : ds.patterns) {
            int best = -1;
            double best_dist = 1e18;
            for (int k = 0; k < 3; ++k) {
                const double d =
                    (p.seq - ds.patterns[static_cast<std::size_t>(k * 5)].seq).norm();
                if (d < best_dist) {
                    best_dist = d;
                    best = k;
                }
            }
            CHECK(best == p.label);
        }
    }
    SUBCASE("templates have unit amplitude") {
        const SequenceDataset ds = synthetic_benchmark(4, 1, 50, 3, 0.0, 9);
        for (const auto& p : ds.patterns)
            CHECK(p.seq.cwiseAbs().maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("fixed seed reproduces the dataset bitwise") {
        const SequenceDataset a = synthetic_benchmark(3, 4, 10, 2, 0.3, 11);
        const SequenceDataset b = synthetic_benchmark(3, 4, 10, 2, 0.3, 11);
        REQUIRE(a.patterns.size() == b.patterns.size());
        for (std::size_t i = 0; i < a.patterns.size(); ++i)
            CHECK(a.patterns[i].seq == b.patterns[i].seq);
    }
    SUBCASE("bad arguments are rejected") {
        CHECK_THROWS_AS(synthetic_benchmark(1, 5, 10, 2, 0.0, 1), std::invalid_argument);
    }
}

TEST_CASE("per-class split keeps counts and order") {
    const SequenceDataset ds = tiny_dataset(3, 10, 5);
    auto [train, test] = split_per_class(ds, 7);
    CHECK(train.patterns.size() == 21);
    CHECK(test.patterns.size() == 9);
    std::vector<int> train_counts(3, 0), test_counts(3, 0);
    for (const auto& p : train.patterns) train_counts[static_cast<std::size_t>(p.label)]++;
    for (const auto& p : test.patterns) test_counts[static_cast<std::size_t>(p.label)]++;
    for (int k = 0; k < 3; ++k) {
        CHECK(train_counts[static_cast<std::size_t>(k)] == 7);
        CHECK(test_counts[static_cast<std::size_t>(k)] == 3);
    }
}
