#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedbdpl/federation.hpp"
#include "fedbdpl/oracle.hpp"

namespace fedbdpl {

enum class PartitionKind { Even, KShot, Dirichlet };
enum class OracleKind { HiddenPrompt, LinearSurrogate, RemoteLlm };

struct OracleSpec {
    OracleKind kind = OracleKind::HiddenPrompt;
    double clip_bound = 1.0;   // G
    double noise_std = 0.0;
    // hidden_prompt
    PromptSequence target;      // empty = drawn from the experiment seed
    double offset_scale = 0.0;
    // linear_surrogate
    int num_classes = 2;
    // remote_llm
    RemoteOracleConfig remote;
};

struct PartitionSpec {
    PartitionKind kind = PartitionKind::Even;
    int k_per_class = 1;         // k-shot
    double concentration = 0.5;  // dirichlet
};

struct ExperimentConfig {
    FederationConfig federation;
    OracleSpec oracle;
    PartitionSpec partition;
    std::size_t prompt_length = 4;  // n
    std::size_t vocab_size = 8;     // N
    double tau = 1.0;
    double nu = 0.01;
    int dataset_size = 100;
    int dataset_classes = 2;
    std::vector<int> sweep = {1};   // K* values
    int replications = 1;           // R
    double target_loss = 0.0;
    int budget_rounds = 500;
    double outlier_iqr_mult = 1.5;
    std::string output_dir;

    void validate() const;
};

// Parse + validate a JSON experiment config; errors name the offending field.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);

struct MetricsRow {
    int k_star = 0;
    int replication = 0;
    std::uint64_t seed = 0;
    int rounds_to_target = -1;  // -1 = target not reached within budget
    std::uint64_t queries_to_target = 0;
    double final_loss = 0.0;
    double wall_time_s = 0.0;
    bool reached = false;
    bool failed = false;  // oracle error; sweep continues
};

std::string metrics_csv_header();
std::string metrics_csv_line(const MetricsRow& row);

// Build the oracle / dataset / shards described by the config.
std::unique_ptr<Oracle> make_oracle(const ExperimentConfig& cfg, std::uint64_t seed);
std::vector<Example> make_dataset(const ExperimentConfig& cfg);
std::vector<ClientShard> make_shards(const ExperimentConfig& cfg,
                                     const std::vector<Example>& dataset, std::uint64_t seed);

// One training run for a single (K*, replication) cell.
MetricsRow run_cell(const ExperimentConfig& cfg, int k_star, int replication,
                    ExecPolicy policy = ExecPolicy::Serial);

// Full sweep x replication grid; rows written incrementally to `csv` when set.
std::vector<MetricsRow> run_sweep(const ExperimentConfig& cfg, std::ostream* csv = nullptr,
                                  ExecPolicy policy = ExecPolicy::Serial);

struct GroupSummary {
    int k_star = 0;
    std::size_t rows = 0;
    std::size_t dropped = 0;   // IQR outliers
    std::size_t unreached = 0;
    bool reachable = false;
    double mean_queries = 0.0;
    double std_queries = 0.0;
    double median_queries = 0.0;
};

// Per-K* stats of queries-to-target after dropping points beyond
// iqr_mult * IQR from the quartiles. Permutation-invariant in row order.
std::vector<GroupSummary> summarize(const std::vector<MetricsRow>& rows, double iqr_mult);

std::string summary_json(const std::vector<GroupSummary>& groups, double iqr_mult);

double median(std::vector<double> values);

}  // namespace fedbdpl
