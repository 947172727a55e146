#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace esncl {

/// Raw IDX tensor: dims plus flat row-major payload scaled to [0, 1].
struct IdxTensor {
    std::vector<int> dims;
    std::vector<double> data;
};

/// Parses the big-endian IDX container (magic 0x0803 for u8 images, 0x0801 for
/// u8 labels). Pixel bytes are divided by 255.
IdxTensor load_idx(const std::string& path);

struct SequencePattern {
    Eigen::MatrixXd seq; // steps x input_dim, row t = input at step t
    int label = 0;
};

struct SequenceDataset {
    std::vector<SequencePattern> patterns;
    int num_classes = 0;
    int input_dim = 0;
};

struct Experience {
    int id = 0;
    SequenceDataset train;
    SequenceDataset test;
    std::vector<int> class_set;
};

/// One row per step: a 28x28 image becomes a 28-step sequence of 28-dim inputs.
Eigen::MatrixXd image_to_row_sequence(const Eigen::MatrixXd& img);

/// Loads an images + labels IDX pair into row-sequence patterns.
SequenceDataset load_mnist_split(const std::string& images_path, const std::string& labels_path);

/// Partitions classes into consecutive blocks of class_order and builds the
/// class-incremental experience stream.
std::vector<Experience> make_class_incremental(const SequenceDataset& train,
                                               const SequenceDataset& test,
                                               int classes_per_exp,
                                               const std::vector<int>& class_order = {});

/// Synthetic sequence benchmark: every class shares one random smooth base
/// trajectory (cumulative sum of seeded Gaussian steps) plus a small
/// class-specific trajectory scaled by `separation`; templates are rescaled to
/// unit amplitude and patterns add i.i.d. Gaussian noise. The shared base makes
/// the classes strongly overlapping, so sequential finetuning interferes with
/// every previously learned class, while `separation` above the noise level
/// keeps the classes linearly separable for an offline or generative learner.
SequenceDataset synthetic_benchmark(int num_classes, int per_class, int steps, int input_dim,
                                    double noise, std::uint64_t seed, double separation = 0.3);

/// Splits per-class: the first train_per_class patterns of each class go to
/// train, the rest to test. Preserves within-class order.
std::pair<SequenceDataset, SequenceDataset> split_per_class(const SequenceDataset& ds,
                                                            int train_per_class);

} // namespace esncl
