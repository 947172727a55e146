#pragma once

#include "esncl/data.hpp"
#include "esncl/reservoir.hpp"

#include <string>
#include <vector>

namespace esncl {

/// Reservoir features for one dataset: column j = feature vector of pattern j.
struct EncodedDataset {
    Eigen::MatrixXd features; // feature_dim x num_patterns
    std::vector<int> labels;
    int num_classes = 0;
};

struct EncodedExperience {
    int id = 0;
    EncodedDataset train;
    EncodedDataset test;
    std::vector<int> class_set;
};

EncodedDataset encode_dataset(const Reservoir& r, const SequenceDataset& ds, Pooling pooling);

std::vector<EncodedExperience> encode_experiences(const Reservoir& r,
                                                  const std::vector<Experience>& exps,
                                                  Pooling pooling);

/// Binary feature cache used by the harness to skip re-encoding. The key should
/// capture reservoir config (incl. seed), benchmark identity and pooling.
bool load_encoded_cache(const std::string& path, std::vector<EncodedExperience>& out);
void save_encoded_cache(const std::string& path, const std::vector<EncodedExperience>& exps);

} // namespace esncl
