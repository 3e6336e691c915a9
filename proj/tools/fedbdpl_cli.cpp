// Experiment runner: sweeps the number of activated clients over seeded
// replications, measuring queries-to-target, and writes CSV + JSON summaries.
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "fedbdpl/experiment.hpp"

namespace {

std::vector<int> parse_sweep(const std::string& spec) {
    std::vector<int> out;
    std::stringstream ss(spec);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) out.push_back(std::stoi(item));
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Federated black-box discrete prompt learning simulator"};

    std::string config_path;
    std::string sweep_override;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int budget = 0;
    bool parallel = false;

    app.add_option("--config", config_path, "experiment config (JSON)")->required();
    app.add_option("--seed", seed, "override the base seed")
        ->each([&](const std::string&) { seed_set = true; });
    app.add_option("--sweep", sweep_override, "override K* sweep, e.g. \"1,5,10\"");
    app.add_option("--out", out_dir, "output directory for metrics.csv / summary.json");
    app.add_option("--budget", budget, "override the round budget");
    app.add_flag("--parallel", parallel, "train selected clients on OpenMP threads");

    CLI11_PARSE(app, argc, argv);

    fedbdpl::ExperimentConfig cfg;
    try {
        cfg = fedbdpl::load_config(config_path);
        if (seed_set) cfg.federation.seed = seed;
        if (!sweep_override.empty()) cfg.sweep = parse_sweep(sweep_override);
        if (budget > 0) cfg.budget_rounds = budget;
        if (!out_dir.empty()) cfg.output_dir = out_dir;
        cfg.validate();
    } catch (const std::exception& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }

    std::ofstream csv_file;
    std::ostream* csv = nullptr;
    if (!cfg.output_dir.empty()) {
        std::filesystem::create_directories(cfg.output_dir);
        csv_file.open(cfg.output_dir + "/metrics.csv");
        csv = &csv_file;
    } else {
        csv = &std::cout;
    }

    try {
        const auto rows = fedbdpl::run_sweep(
            cfg, csv, parallel ? fedbdpl::ExecPolicy::Parallel : fedbdpl::ExecPolicy::Serial);

        std::size_t failures = 0;
        for (const auto& r : rows) failures += r.failed ? 1 : 0;

        const auto groups = fedbdpl::summarize(rows, cfg.outlier_iqr_mult);
        const std::string summary = fedbdpl::summary_json(groups, cfg.outlier_iqr_mult);
        if (!cfg.output_dir.empty()) {
            std::ofstream(cfg.output_dir + "/summary.json") << summary << '\n';
            for (const auto& g : groups) {
                std::cout << "K*=" << g.k_star;
                if (g.reachable)
                    std::cout << "  median queries-to-target " << g.median_queries << "  (mean "
                              << g.mean_queries << " +/- " << g.std_queries << ", dropped "
                              << g.dropped << ")\n";
                else
                    std::cout << "  target unreachable within budget\n";
            }
        } else {
            std::cout << summary << '\n';
        }
        if (failures > 0 && failures == rows.size()) {
            std::cerr << "oracle error: every replication failed\n";
            return 3;
        }
        return 0;
    } catch (const fedbdpl::QueryError& e) {
        std::cerr << "oracle error: " << e.what() << '\n';
        return 3;
    } catch (const fedbdpl::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return 2;
    }
}
