#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "esncl/harness.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace esncl;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream is(path);
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

RunConfig small_synthetic_config(const std::string& out) {
    RunConfig cfg = parse_config_json(R"({
        "benchmark": {"name": "synthetic", "num_classes": 4, "train_per_class": 30,
                      "test_per_class": 10, "steps": 30, "input_dim": 2, "noise": 0.1},
        "model": {"units": 100, "pooling": "mean"},
        "training": {"lr": 0.005, "batch_size": 16, "epochs_per_experience": 10},
        "strategy": {"name": "naive"},
        "seeds": [1, 2]
    })");
    cfg.output_dir = out;
    return cfg;
}

} // namespace

TEST_CASE("minimal config gets full defaults") {
    const RunConfig cfg =
        parse_config_json(R"({"benchmark": {"name": "smnist"}, "strategy": {"name": "naive"}})");
    CHECK(cfg.reservoir.units == 1000);
    CHECK(cfg.reservoir.spectral_radius_target == 0.99);
    CHECK(cfg.training.batch_size == 64);
    CHECK(cfg.training.epochs_per_exp == 5);
    CHECK(cfg.seeds.size() == 5);
    CHECK(cfg.strategy.id == StrategyId::Naive);
}

TEST_CASE("config violations are all reported") {
    try {
        parse_config_json(R"({
            "benchmark": {"name": "smnist"},
            "model": {"spectral_radius": 1.5, "leak_rate": 2.0},
            "strategy": {"name": "naive"},
            "bogus_section": {}
        })");
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("spectral_radius") != std::string::npos);
        CHECK(msg.find("echo state") != std::string::npos);
        CHECK(msg.find("leak_rate") != std::string::npos);
        CHECK(msg.find("bogus_section") != std::string::npos);
    }
}

TEST_CASE("cross-strategy parameter tables are rejected") {
    CHECK_THROWS_WITH_AS(parse_config_json(R"({
            "benchmark": {"name": "smnist"},
            "strategy": {"name": "ewc", "lwf": {"alpha": 0.5}}
        })"),
                         doctest::Contains("different strategy"), ConfigError);
}

TEST_CASE("unknown strategy name is rejected") {
    CHECK_THROWS_AS(parse_config_json(R"({
            "benchmark": {"name": "smnist"},
            "strategy": {"name": "gdumb"}
        })"),
                    ConfigError);
}

TEST_CASE("unknown keys inside sections are named") {
    CHECK_THROWS_WITH_AS(parse_config_json(R"({
            "benchmark": {"name": "smnist", "zing": 1},
            "strategy": {"name": "naive"}
        })"),
                         doctest::Contains("zing"), ConfigError);
}

TEST_CASE("synthetic benchmark stream shape") {
    const RunConfig cfg = small_synthetic_config("/tmp/esncl_test_shape");
    const auto exps = load_benchmark(cfg.benchmark);
    REQUIRE(exps.size() == 4); // synthetic defaults to one class per experience
    for (const auto& e : exps) {
        CHECK(e.class_set.size() == 1);
        CHECK(e.train.patterns.size() == 30);
        CHECK(e.test.patterns.size() == 10);
    }
}

TEST_CASE("run_experiment end to end on the synthetic benchmark") {
    const std::string out = "/tmp/esncl_test_run";
    fs::remove_all(out);
    RunConfig cfg = small_synthetic_config(out);
    const ResultsRecord rec = run_experiment(cfg);

    REQUIRE(rec.per_seed.size() == 2);
    for (const auto& s : rec.per_seed) {
        CHECK(s.matrix.R.rows() == 4);
        CHECK(s.matrix.R.minCoeff() >= 0.0);
        CHECK(s.matrix.R.maxCoeff() <= 1.0);
        // final diagonal entry was just trained, should be learnable
        CHECK(s.matrix.R(3, 3) > 0.5);
    }
    CHECK(fs::exists(out + "/results.csv"));
    CHECK(fs::exists(out + "/results.json"));

    SUBCASE("aggregates recompute from per-seed values") {
        double mean = 0.0;
        for (const auto& s : rec.per_seed) mean += s.acc;
        mean /= static_cast<double>(rec.per_seed.size());
        CHECK(rec.mean_acc == doctest::Approx(mean).epsilon(1e-12));
    }
}

TEST_CASE("full-run determinism: identical results.csv across executions") {
    const std::string out_a = "/tmp/esncl_test_det_a";
    const std::string out_b = "/tmp/esncl_test_det_b";
    fs::remove_all(out_a);
    fs::remove_all(out_b);
    RunConfig a = small_synthetic_config(out_a);
    a.strategy.id = StrategyId::Replay;
    a.strategy.replay_capacity = 20;
    RunConfig b = a;
    b.output_dir = out_b;
    b.cache_features = false; // second run must not depend on the first run's cache
    run_experiment(a);
    run_experiment(b);
    const std::string csv_a = slurp(out_a + "/results.csv");
    CHECK(csv_a == slurp(out_b + "/results.csv"));
    CHECK(!csv_a.empty());

    SUBCASE("feature cache round trip changes nothing") {
        fs::remove_all(out_a);
        run_experiment(a); // cold cache
        const std::string cold = slurp(out_a + "/results.csv");
        run_experiment(a); // warm cache
        CHECK(slurp(out_a + "/results.csv") == cold);
    }
}

TEST_CASE("strategies do not mutate the encoded features") {
    RunConfig cfg = small_synthetic_config("/tmp/esncl_test_mut");
    cfg.cache_features = false;
    const auto exps = load_benchmark(cfg.benchmark);
    const auto encoded = encode_benchmark(cfg, 1, exps);
    std::vector<Eigen::MatrixXd> before;
    for (const auto& e : encoded) before.push_back(e.train.features);
    run_seed(cfg, 1, encoded);
    for (std::size_t i = 0; i < encoded.size(); ++i)
        CHECK(encoded[i].train.features == before[i]);
}

TEST_CASE("sweep_replay writes plot data and respects sizes") {
    const std::string out = "/tmp/esncl_test_sweep";
    fs::remove_all(out);
    RunConfig cfg = small_synthetic_config(out);
    cfg.strategy.id = StrategyId::Replay;
    cfg.seeds = {1};
    const auto records = sweep_replay(cfg, {4, 40});
    REQUIRE(records.size() == 2);
    const std::string plot = slurp(out + "/replay_sweep.csv");
    CHECK(plot.find("memory_size,mean_acc,std_acc") == 0);
    CHECK(plot.find("\n4,") != std::string::npos);
    CHECK(plot.find("\n40,") != std::string::npos);

    CHECK_THROWS_AS(sweep_replay(cfg, {}), std::invalid_argument);
    RunConfig bad = cfg;
    bad.strategy.id = StrategyId::Naive;
    CHECK_THROWS_AS(sweep_replay(bad, {10}), std::invalid_argument);
}

TEST_CASE("missing data directory produces actionable instructions") {
    RunConfig cfg = parse_config_json(
        R"({"benchmark": {"name": "smnist", "data_dir": "/nonexistent"}, "strategy": {"name": "naive"}})");
    if (std::getenv("ESNCL_DATA_DIR") != nullptr) {
        MESSAGE("ESNCL_DATA_DIR set, skipping");
        return;
    }
    CHECK_THROWS_WITH_AS(load_benchmark(cfg.benchmark), doctest::Contains("Place the four"),
                         std::runtime_error);
}
