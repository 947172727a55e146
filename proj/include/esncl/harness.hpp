#pragma once

#include "esncl/metrics.hpp"
#include "esncl/reservoir.hpp"
#include "esncl/strategies.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace esncl {

struct BenchmarkConfig {
    std::string name = "smnist"; // smnist | synthetic
    std::string data_dir = "data/mnist";
    int classes_per_experience = 2;
    std::uint64_t class_order_seed = 0; // 0 = natural order
    int validation_holdout = 5000;      // smnist: tail of the train set held out
    // synthetic benchmark
    int num_classes = 10;
    int train_per_class = 100;
    int test_per_class = 30;
    int steps = 101;
    int input_dim = 3;
    double noise = 0.1;
};

struct RunConfig {
    BenchmarkConfig benchmark;
    ReservoirConfig reservoir; // seed field ignored; per-run seeds drive it
    Pooling pooling = Pooling::Mean;
    TrainingConfig training;
    StrategyConfig strategy;
    std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string output_dir = "runs/out";
    bool write_checkpoints = false;
    bool cache_features = true;
};

/// Aggregated error report; what() lists every violation found.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& all) : std::runtime_error(all) {}
};

/// Parses and strictly validates a JSON config file (unknown keys are errors;
/// every violation is reported, not just the first).
RunConfig validate_config(const std::string& path);
RunConfig parse_config_json(const std::string& json_text); // same, from a string

struct SeedResult {
    std::uint64_t seed = 0;
    AccuracyMatrix matrix;
    double acc = 0.0;            // test-size-weighted
    double acc_unweighted = 0.0;
    double forgetting = 0.0;
    double encode_seconds = 0.0;
    double train_seconds = 0.0;
    Readout final_readout; // zero-sized for SLDA, which has no trained readout
};

struct ResultsRecord {
    RunConfig config;
    std::vector<SeedResult> per_seed;
    double mean_acc = 0.0;
    double std_acc = 0.0; // population std, matching mean +/- std reporting
    double mean_forgetting = 0.0;
    double std_forgetting = 0.0;
};

/// End-to-end protocol: per seed, build reservoir, encode (cached), stream
/// experiences through the strategy, evaluate after every experience, compute
/// metrics; writes results.json and results.csv under output_dir.
ResultsRecord run_experiment(const RunConfig& cfg);

/// One run_experiment per memory size; writes replay_sweep.csv
/// (memory_size, mean_acc, std_acc).
std::vector<ResultsRecord> sweep_replay(const RunConfig& cfg, const std::vector<int>& memory_sizes);

// Lower-level pieces, shared with the acceptance suite.
std::vector<Experience> load_benchmark(const BenchmarkConfig& cfg);
std::vector<EncodedExperience> encode_benchmark(const RunConfig& cfg, std::uint64_t seed,
                                                const std::vector<Experience>& exps);
SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed,
                    const std::vector<EncodedExperience>& encoded);

std::string results_csv(const ResultsRecord& rec);
std::string results_json(const ResultsRecord& rec);

} // namespace esncl
