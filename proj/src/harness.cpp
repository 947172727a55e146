#include "esncl/harness.hpp"
#include "esncl/rng.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

namespace esncl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

struct Validator {
    std::vector<std::string> errors;

    void check_known_keys(const json& obj, const std::string& where,
                          std::initializer_list<const char*> known) {
        for (auto it = obj.begin(); it != obj.end(); ++it) {
            bool ok = false;
            for (const char* k : known)
                if (it.key() == k) { ok = true; break; }
            if (!ok) errors.push_back(where + ": unknown key '" + it.key() + "'");
        }
    }

    template <typename T>
    void get(const json& obj, const char* key, T& out, const std::string& where) {
        if (!obj.contains(key)) return;
        try {
            out = obj.at(key).get<T>();
        } catch (const json::exception&) {
            errors.push_back(where + "." + key + ": wrong type");
        }
    }

    void require(bool cond, const std::string& msg) {
        if (!cond) errors.push_back(msg);
    }
};

} // namespace

RunConfig parse_config_json(const std::string& json_text) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config: invalid JSON: ") + e.what());
    }
    Validator v;
    RunConfig cfg;

    v.check_known_keys(root, "config",
                       {"benchmark", "model", "training", "strategy", "seeds", "output"});
    v.require(root.contains("benchmark"), "config: missing required section 'benchmark'");
    v.require(root.contains("strategy"), "config: missing required section 'strategy'");

    if (root.contains("benchmark") && root["benchmark"].is_object()) {
        const json& b = root["benchmark"];
        v.check_known_keys(b, "benchmark",
                           {"name", "data_dir", "classes_per_experience", "class_order_seed",
                            "validation_holdout", "num_classes", "train_per_class",
                            "test_per_class", "steps", "input_dim", "noise"});
        v.get(b, "name", cfg.benchmark.name, "benchmark");
        v.get(b, "data_dir", cfg.benchmark.data_dir, "benchmark");
        v.get(b, "classes_per_experience", cfg.benchmark.classes_per_experience, "benchmark");
        v.get(b, "class_order_seed", cfg.benchmark.class_order_seed, "benchmark");
        v.get(b, "validation_holdout", cfg.benchmark.validation_holdout, "benchmark");
        v.get(b, "num_classes", cfg.benchmark.num_classes, "benchmark");
        v.get(b, "train_per_class", cfg.benchmark.train_per_class, "benchmark");
        v.get(b, "test_per_class", cfg.benchmark.test_per_class, "benchmark");
        v.get(b, "steps", cfg.benchmark.steps, "benchmark");
        v.get(b, "input_dim", cfg.benchmark.input_dim, "benchmark");
        v.get(b, "noise", cfg.benchmark.noise, "benchmark");
        if (cfg.benchmark.name == "synthetic") cfg.benchmark.classes_per_experience = 1;
        v.get(b, "classes_per_experience", cfg.benchmark.classes_per_experience, "benchmark");
        v.require(cfg.benchmark.name == "smnist" || cfg.benchmark.name == "synthetic",
                  "benchmark.name: must be 'smnist' or 'synthetic'");
    }

    if (root.contains("model") && root["model"].is_object()) {
        const json& m = root["model"];
        v.check_known_keys(m, "model",
                           {"units", "spectral_radius", "input_scale", "recurrent_density",
                            "leak_rate", "bias_scale", "pooling"});
        v.get(m, "units", cfg.reservoir.units, "model");
        v.get(m, "spectral_radius", cfg.reservoir.spectral_radius_target, "model");
        v.get(m, "input_scale", cfg.reservoir.input_scale, "model");
        v.get(m, "recurrent_density", cfg.reservoir.recurrent_density, "model");
        v.get(m, "leak_rate", cfg.reservoir.leak_rate, "model");
        v.get(m, "bias_scale", cfg.reservoir.bias_scale, "model");
        std::string pooling = "mean";
        v.get(m, "pooling", pooling, "model");
        if (pooling == "last") cfg.pooling = Pooling::Last;
        else if (pooling == "mean") cfg.pooling = Pooling::Mean;
        else v.errors.push_back("model.pooling: must be 'last' or 'mean'");
        v.require(cfg.reservoir.units > 0, "model.units: must be positive");
        v.require(cfg.reservoir.spectral_radius_target > 0.0 &&
                      cfg.reservoir.spectral_radius_target < 1.0,
                  "model.spectral_radius: must lie in (0, 1), the echo state property "
                  "requires a radius below one");
        v.require(cfg.reservoir.recurrent_density > 0.0 && cfg.reservoir.recurrent_density <= 1.0,
                  "model.recurrent_density: must lie in (0, 1]");
        v.require(cfg.reservoir.leak_rate > 0.0 && cfg.reservoir.leak_rate <= 1.0,
                  "model.leak_rate: must lie in (0, 1]");
        v.require(cfg.reservoir.bias_scale >= 0.0, "model.bias_scale: must be non-negative");
        v.require(cfg.reservoir.input_scale > 0.0, "model.input_scale: must be positive");
    }

    if (root.contains("training") && root["training"].is_object()) {
        const json& t = root["training"];
        v.check_known_keys(t, "training", {"lr", "lr_schedule", "batch_size", "epochs_per_experience"});
        v.get(t, "lr", cfg.training.lr, "training");
        v.get(t, "batch_size", cfg.training.batch_size, "training");
        v.get(t, "epochs_per_experience", cfg.training.epochs_per_exp, "training");
        if (t.contains("lr_schedule")) {
            std::string sched;
            v.get(t, "lr_schedule", sched, "training");
            if (sched == "constant")
                cfg.training.lr_schedule = LrSchedule::Constant;
            else if (sched == "linear")
                cfg.training.lr_schedule = LrSchedule::Linear;
            else
                v.errors.push_back("training.lr_schedule: must be 'constant' or 'linear'");
        }
        v.require(cfg.training.lr > 0.0, "training.lr: must be positive");
        v.require(cfg.training.batch_size > 0, "training.batch_size: must be positive");
        v.require(cfg.training.epochs_per_exp > 0, "training.epochs_per_experience: must be positive");
    }

    if (root.contains("strategy") && root["strategy"].is_object()) {
        const json& s = root["strategy"];
        v.check_known_keys(s, "strategy", {"name", "ewc", "lwf", "replay", "slda"});
        std::string name;
        v.get(s, "name", name, "strategy");
        try {
            cfg.strategy.id = strategy_from_string(name);
        } catch (const std::exception& e) {
            v.errors.push_back(std::string("strategy.name: ") + e.what());
        }
        // strategy-specific tables must match the chosen strategy
        for (const char* sub : {"ewc", "lwf", "replay", "slda"}) {
            if (s.contains(sub) && name != sub)
                v.errors.push_back("strategy." + std::string(sub) +
                                   ": parameters for a different strategy than '" + name + "'");
        }
        if (s.contains("ewc") && s["ewc"].is_object()) {
            v.check_known_keys(s["ewc"], "strategy.ewc", {"lambda"});
            v.get(s["ewc"], "lambda", cfg.strategy.ewc_lambda, "strategy.ewc");
            v.require(cfg.strategy.ewc_lambda > 0.0, "strategy.ewc.lambda: must be positive");
        }
        if (s.contains("lwf") && s["lwf"].is_object()) {
            v.check_known_keys(s["lwf"], "strategy.lwf", {"alpha", "temperature"});
            v.get(s["lwf"], "alpha", cfg.strategy.lwf_alpha, "strategy.lwf");
            v.get(s["lwf"], "temperature", cfg.strategy.lwf_temperature, "strategy.lwf");
            v.require(cfg.strategy.lwf_alpha >= 0.0, "strategy.lwf.alpha: must be non-negative");
            v.require(cfg.strategy.lwf_temperature > 0.0,
                      "strategy.lwf.temperature: must be positive");
        }
        if (s.contains("replay") && s["replay"].is_object()) {
            v.check_known_keys(s["replay"], "strategy.replay", {"capacity"});
            v.get(s["replay"], "capacity", cfg.strategy.replay_capacity, "strategy.replay");
            v.require(cfg.strategy.replay_capacity >= 0, "strategy.replay.capacity: must be >= 0");
        }
        if (s.contains("slda") && s["slda"].is_object()) {
            v.check_known_keys(s["slda"], "strategy.slda",
                               {"shrinkage", "freeze_covariance_after_first"});
            v.get(s["slda"], "shrinkage", cfg.strategy.slda_shrinkage, "strategy.slda");
            v.get(s["slda"], "freeze_covariance_after_first",
                  cfg.strategy.slda_freeze_covariance_after_first, "strategy.slda");
            v.require(cfg.strategy.slda_shrinkage > 0.0 && cfg.strategy.slda_shrinkage < 1.0,
                      "strategy.slda.shrinkage: must lie in (0, 1)");
        }
    }

    if (root.contains("seeds")) {
        try {
            cfg.seeds = root["seeds"].get<std::vector<std::uint64_t>>();
        } catch (const json::exception&) {
            v.errors.push_back("seeds: must be an array of unsigned integers");
        }
        v.require(!cfg.seeds.empty(), "seeds: must be non-empty");
    }

    if (root.contains("output") && root["output"].is_object()) {
        const json& o = root["output"];
        v.check_known_keys(o, "output", {"dir", "checkpoints", "cache_features"});
        v.get(o, "dir", cfg.output_dir, "output");
        v.get(o, "checkpoints", cfg.write_checkpoints, "output");
        v.get(o, "cache_features", cfg.cache_features, "output");
    }

    if (!v.errors.empty()) {
        std::string all = "config validation failed:";
        for (const auto& e : v.errors) all += "\n  - " + e;
        throw ConfigError(all);
    }
    return cfg;
}

RunConfig validate_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("config: cannot read " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_config_json(ss.str());
}

std::vector<Experience> load_benchmark(const BenchmarkConfig& cfg) {
    std::string data_dir = cfg.data_dir;
    if (const char* env = std::getenv("ESNCL_DATA_DIR")) data_dir = env;

    if (cfg.name == "smnist") {
        const std::string train_images = data_dir + "/train-images-idx3-ubyte";
        const std::string train_labels = data_dir + "/train-labels-idx1-ubyte";
        const std::string test_images = data_dir + "/t10k-images-idx3-ubyte";
        const std::string test_labels = data_dir + "/t10k-labels-idx1-ubyte";
        for (const auto& p : {train_images, train_labels, test_images, test_labels})
            if (!fs::exists(p))
                throw std::runtime_error(
                    "missing MNIST file: " + p +
                    "\nPlace the four original MNIST IDX files (train-images-idx3-ubyte, "
                    "train-labels-idx1-ubyte, t10k-images-idx3-ubyte, t10k-labels-idx1-ubyte) "
                    "under " + data_dir + " or point ESNCL_DATA_DIR at them. They are "
                    "available from the usual MNIST mirrors (e.g. the ossci-datasets S3 "
                    "bucket) or the npm package 'mnist-data'.");
        SequenceDataset train = load_mnist_split(train_images, train_labels);
        SequenceDataset test = load_mnist_split(test_images, test_labels);
        if (cfg.validation_holdout > 0 &&
            cfg.validation_holdout < static_cast<int>(train.patterns.size()))
            train.patterns.resize(train.patterns.size() -
                                  static_cast<std::size_t>(cfg.validation_holdout));

        std::vector<int> order;
        if (cfg.class_order_seed != 0) {
            order.resize(10);
            std::iota(order.begin(), order.end(), 0);
            Rng rng(derive_seed(cfg.class_order_seed, "class_order"));
            for (std::size_t i = order.size(); i > 1; --i)
                std::swap(order[i - 1], order[rng.uniform_int(i)]);
        }
        return make_class_incremental(train, test, cfg.classes_per_experience, order);
    }
    if (cfg.name == "synthetic") {
        const SequenceDataset all =
            synthetic_benchmark(cfg.num_classes, cfg.train_per_class + cfg.test_per_class,
                                cfg.steps, cfg.input_dim, cfg.noise,
                                derive_seed(42, "synthetic.benchmark"));
        auto [train, test] = split_per_class(all, cfg.train_per_class);
        return make_class_incremental(train, test, cfg.classes_per_experience);
    }
    throw std::runtime_error("unknown benchmark: " + cfg.name);
}

namespace {

std::string feature_cache_key(const RunConfig& cfg, std::uint64_t seed) {
    std::ostringstream os;
    const auto& r = cfg.reservoir;
    os << cfg.benchmark.name << '|' << cfg.benchmark.classes_per_experience << '|'
       << cfg.benchmark.class_order_seed << '|' << cfg.benchmark.validation_holdout << '|'
       << cfg.benchmark.num_classes << '|' << cfg.benchmark.train_per_class << '|'
       << cfg.benchmark.test_per_class << '|' << cfg.benchmark.steps << '|'
       << cfg.benchmark.input_dim << '|' << cfg.benchmark.noise << '|' << r.units << '|'
       << r.spectral_radius_target << '|' << r.input_scale << '|' << r.recurrent_density << '|'
       << r.leak_rate << '|' << r.bias_scale << '|'
       << (cfg.pooling == Pooling::Mean ? "mean" : "last") << '|' << seed;
    const std::uint64_t h = derive_seed(0x5ca1ab1e, os.str());
    std::ostringstream hex;
    hex << std::hex << h;
    return hex.str();
}

} // namespace

std::vector<EncodedExperience> encode_benchmark(const RunConfig& cfg, std::uint64_t seed,
                                                const std::vector<Experience>& exps) {
    const std::string cache_dir = cfg.output_dir + "/cache";
    const std::string cache_path = cache_dir + "/features_" + feature_cache_key(cfg, seed) + ".bin";
    if (cfg.cache_features) {
        std::vector<EncodedExperience> cached;
        if (load_encoded_cache(cache_path, cached)) return cached;
    }
    ReservoirConfig rc = cfg.reservoir;
    rc.input_dim = exps.empty() ? rc.input_dim : static_cast<int>(exps[0].train.input_dim);
    rc.seed = derive_seed(seed, "reservoir");
    Reservoir reservoir(rc);
    auto encoded = encode_experiences(reservoir, exps, cfg.pooling);
    if (cfg.cache_features) {
        fs::create_directories(cache_dir);
        save_encoded_cache(cache_path, encoded);
    }
    return encoded;
}

SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed,
                    const std::vector<EncodedExperience>& encoded) {
    SeedResult res;
    res.seed = seed;
    const int n_exp = static_cast<int>(encoded.size());
    const int feature_dim = static_cast<int>(encoded[0].train.features.rows());
    const int num_classes = encoded[0].train.num_classes;

    TrainingConfig tc = cfg.training;
    tc.seed = seed;
    ContinualLearner learner(feature_dim, num_classes, cfg.strategy, tc);

    res.matrix.R.resize(n_exp, n_exp);
    res.matrix.test_sizes.clear();
    for (const auto& e : encoded)
        res.matrix.test_sizes.push_back(static_cast<int>(e.test.features.cols()));

    const double t0 = now_seconds();
    for (int i = 0; i < n_exp; ++i) {
        learner.train_experience(encoded[static_cast<std::size_t>(i)]);
        const auto acc = evaluate(
            [&](const Eigen::MatrixXd& f) { return learner.scores(f); }, encoded);
        for (int j = 0; j < n_exp; ++j) res.matrix.R(i, j) = acc[static_cast<std::size_t>(j)];
    }
    res.train_seconds = now_seconds() - t0;
    if (cfg.strategy.id != StrategyId::SLDA) res.final_readout = learner.readout();

    res.acc = acc_metric(res.matrix);
    res.acc_unweighted = acc_metric_unweighted(res.matrix);
    res.forgetting = n_exp >= 2 ? avg_forgetting(res.matrix) : 0.0;
    return res;
}

namespace {

void aggregate(ResultsRecord& rec) {
    const double n = static_cast<double>(rec.per_seed.size());
    double sa = 0.0, sf = 0.0;
    for (const auto& s : rec.per_seed) { sa += s.acc; sf += s.forgetting; }
    rec.mean_acc = sa / n;
    rec.mean_forgetting = sf / n;
    double va = 0.0, vf = 0.0;
    for (const auto& s : rec.per_seed) {
        va += (s.acc - rec.mean_acc) * (s.acc - rec.mean_acc);
        vf += (s.forgetting - rec.mean_forgetting) * (s.forgetting - rec.mean_forgetting);
    }
    rec.std_acc = std::sqrt(va / n);
    rec.std_forgetting = std::sqrt(vf / n);
}

json config_to_json(const RunConfig& cfg) {
    json j;
    j["benchmark"] = {{"name", cfg.benchmark.name},
                      {"data_dir", cfg.benchmark.data_dir},
                      {"classes_per_experience", cfg.benchmark.classes_per_experience},
                      {"class_order_seed", cfg.benchmark.class_order_seed},
                      {"validation_holdout", cfg.benchmark.validation_holdout},
                      {"num_classes", cfg.benchmark.num_classes},
                      {"train_per_class", cfg.benchmark.train_per_class},
                      {"test_per_class", cfg.benchmark.test_per_class},
                      {"steps", cfg.benchmark.steps},
                      {"input_dim", cfg.benchmark.input_dim},
                      {"noise", cfg.benchmark.noise}};
    j["model"] = {{"units", cfg.reservoir.units},
                  {"spectral_radius", cfg.reservoir.spectral_radius_target},
                  {"input_scale", cfg.reservoir.input_scale},
                  {"recurrent_density", cfg.reservoir.recurrent_density},
                  {"leak_rate", cfg.reservoir.leak_rate},
                  {"bias_scale", cfg.reservoir.bias_scale},
                  {"pooling", cfg.pooling == Pooling::Mean ? "mean" : "last"}};
    j["training"] = {{"lr", cfg.training.lr},
                     {"lr_schedule",
                      cfg.training.lr_schedule == LrSchedule::Linear ? "linear" : "constant"},
                     {"batch_size", cfg.training.batch_size},
                     {"epochs_per_experience", cfg.training.epochs_per_exp}};
    j["strategy"] = {{"name", strategy_to_string(cfg.strategy.id)}};
    switch (cfg.strategy.id) {
        case StrategyId::EWC: j["strategy"]["ewc"] = {{"lambda", cfg.strategy.ewc_lambda}}; break;
        case StrategyId::LwF:
            j["strategy"]["lwf"] = {{"alpha", cfg.strategy.lwf_alpha},
                                    {"temperature", cfg.strategy.lwf_temperature}};
            break;
        case StrategyId::Replay:
            j["strategy"]["replay"] = {{"capacity", cfg.strategy.replay_capacity}};
            break;
        case StrategyId::SLDA:
            j["strategy"]["slda"] = {
                {"shrinkage", cfg.strategy.slda_shrinkage},
                {"freeze_covariance_after_first", cfg.strategy.slda_freeze_covariance_after_first}};
            break;
        default: break;
    }
    j["seeds"] = cfg.seeds;
    j["output"] = {{"dir", cfg.output_dir},
                   {"checkpoints", cfg.write_checkpoints},
                   {"cache_features", cfg.cache_features}};
    return j;
}

} // namespace

std::string results_csv(const ResultsRecord& rec) {
    std::ostringstream os;
    os << "seed,strategy,acc,acc_unweighted,forgetting\n";
    os.precision(17);
    for (const auto& s : rec.per_seed)
        os << s.seed << ',' << strategy_to_string(rec.config.strategy.id) << ',' << s.acc << ','
           << s.acc_unweighted << ',' << s.forgetting << '\n';
    return os.str();
}

std::string results_json(const ResultsRecord& rec) {
    json j;
    j["config"] = config_to_json(rec.config);
    j["artifact_version"] = "0.1.0";
    j["per_seed"] = json::array();
    for (const auto& s : rec.per_seed) {
        json sj;
        sj["seed"] = s.seed;
        sj["acc"] = s.acc;
        sj["acc_unweighted"] = s.acc_unweighted;
        sj["forgetting"] = s.forgetting;
        sj["encode_seconds"] = s.encode_seconds;
        sj["train_seconds"] = s.train_seconds;
        sj["accuracy_matrix"] = json::array();
        for (Eigen::Index i = 0; i < s.matrix.R.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index k = 0; k < s.matrix.R.cols(); ++k) row.push_back(s.matrix.R(i, k));
            sj["accuracy_matrix"].push_back(row);
        }
        sj["test_sizes"] = s.matrix.test_sizes;
        j["per_seed"].push_back(sj);
    }
    j["aggregate"] = {{"mean_acc", rec.mean_acc},
                      {"std_acc", rec.std_acc},
                      {"mean_forgetting", rec.mean_forgetting},
                      {"std_forgetting", rec.std_forgetting}};
    return j.dump(2);
}

ResultsRecord run_experiment(const RunConfig& cfg) {
    ResultsRecord rec;
    rec.config = cfg;
    const auto exps = load_benchmark(cfg.benchmark);

    fs::create_directories(cfg.output_dir);
    for (std::uint64_t seed : cfg.seeds) {
        const double t0 = now_seconds();
        const auto encoded = encode_benchmark(cfg, seed, exps);
        const double t1 = now_seconds();
        SeedResult sr = run_seed(cfg, seed, encoded);
        sr.encode_seconds = t1 - t0;
        rec.per_seed.push_back(std::move(sr));

        if (cfg.write_checkpoints) {
            const std::string dir = cfg.output_dir + "/checkpoints/seed_" + std::to_string(seed);
            fs::create_directories(dir);
            ReservoirConfig rc = cfg.reservoir;
            rc.input_dim = static_cast<int>(exps[0].train.input_dim);
            rc.seed = derive_seed(seed, "reservoir");
            Reservoir reservoir(rc);
            std::ofstream rs(dir + "/reservoir.bin", std::ios::binary);
            reservoir.save(rs);
            std::ofstream ro(dir + "/readout.bin", std::ios::binary);
            rec.per_seed.back().final_readout.save(ro);
        }
    }
    aggregate(rec);

    std::ofstream(cfg.output_dir + "/results.csv") << results_csv(rec);
    std::ofstream(cfg.output_dir + "/results.json") << results_json(rec);
    return rec;
}

std::vector<ResultsRecord> sweep_replay(const RunConfig& cfg, const std::vector<int>& memory_sizes) {
    if (cfg.strategy.id != StrategyId::Replay)
        throw std::invalid_argument("sweep_replay: strategy must be 'replay'");
    if (memory_sizes.empty()) throw std::invalid_argument("sweep_replay: empty size list");
    std::vector<ResultsRecord> records;
    std::ostringstream plot;
    plot << "memory_size,mean_acc,std_acc\n";
    plot.precision(17);
    for (int size : memory_sizes) {
        RunConfig c = cfg;
        c.strategy.replay_capacity = size;
        c.output_dir = cfg.output_dir + "/size_" + std::to_string(size);
        ResultsRecord r = run_experiment(c);
        plot << size << ',' << r.mean_acc << ',' << r.std_acc << '\n';
        records.push_back(std::move(r));
    }
    fs::create_directories(cfg.output_dir);
    std::ofstream(cfg.output_dir + "/replay_sweep.csv") << plot.str();
    return records;
}

} // namespace esncl
