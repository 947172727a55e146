#include "esncl/harness.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>

namespace {

std::vector<int> parse_sizes(const std::string& csv) {
    std::vector<int> sizes;
    std::stringstream ss(csv);
    std::string tok;
    while (std::getline(ss, tok, ',')) sizes.push_back(std::stoi(tok));
    return sizes;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"esncl - continual learning with echo state networks"};
    app.require_subcommand(1);

    std::string config_path, strategy_override, out_override, sizes_csv = "10,50,100,200,500";
    std::uint64_t seed_override = 0;
    bool has_seed_override = false;

    auto* run = app.add_subcommand("run", "run an experiment from a config file");
    run->add_option("--config", config_path, "path to JSON config")->required();
    run->add_option("--seed-override", seed_override, "run a single seed instead of config seeds")
        ->each([&](const std::string&) { has_seed_override = true; });
    run->add_option("--strategy", strategy_override, "override strategy name");
    run->add_option("--out", out_override, "override output directory");

    auto* sweep = app.add_subcommand("sweep-replay", "replay memory-size sweep");
    sweep->add_option("--config", config_path, "path to JSON config")->required();
    sweep->add_option("--sizes", sizes_csv, "comma-separated memory sizes");
    sweep->add_option("--out", out_override, "override output directory");

    auto* validate = app.add_subcommand("validate", "validate a config file");
    validate->add_option("--config", config_path, "path to JSON config")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        esncl::RunConfig cfg = esncl::validate_config(config_path);
        if (!strategy_override.empty())
            cfg.strategy.id = esncl::strategy_from_string(strategy_override);
        if (!out_override.empty()) cfg.output_dir = out_override;
        if (has_seed_override) cfg.seeds = {seed_override};

        if (validate->parsed()) {
            std::cout << "config OK: " << config_path << "\n";
            return 0;
        }
        if (run->parsed()) {
            const auto rec = esncl::run_experiment(cfg);
            std::printf("strategy=%s benchmark=%s seeds=%zu\n",
                        esncl::strategy_to_string(cfg.strategy.id).c_str(),
                        cfg.benchmark.name.c_str(), cfg.seeds.size());
            std::printf("ACC = %.4f +/- %.4f   forgetting = %.4f +/- %.4f\n", rec.mean_acc,
                        rec.std_acc, rec.mean_forgetting, rec.std_forgetting);
            std::printf("results written to %s\n", cfg.output_dir.c_str());
            return 0;
        }
        if (sweep->parsed()) {
            const auto sizes = parse_sizes(sizes_csv);
            const auto records = esncl::sweep_replay(cfg, sizes);
            for (std::size_t i = 0; i < sizes.size(); ++i)
                std::printf("memory=%d  ACC = %.4f +/- %.4f\n", sizes[i], records[i].mean_acc,
                            records[i].std_acc);
            std::printf("sweep written to %s/replay_sweep.csv\n", cfg.output_dir.c_str());
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
