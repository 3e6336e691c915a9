#pragma once

#include <optional>
#include <vector>

#include "fedbdpl/optimizer.hpp"
#include "fedbdpl/oracle.hpp"

namespace fedbdpl {

struct FederationConfig {
    int num_clients = 1;            // K
    int active_clients = 1;         // K*, 1 = single-activated-client mode
    std::vector<double> weights;    // q, length K, sums to 1
    int rounds = 1;                 // S
    LocalTrainConfig local;
    std::uint64_t seed = 0;
    bool with_replacement = true;   // ablation flag: false = unique draws

    void validate() const;
    // Defaults q to shard-size-proportional weights when empty.
    void default_weights(const std::vector<struct ClientShard>& shards);
};

struct ClientShard {
    int client_id = 0;
    std::vector<Example> examples;
    std::size_t size() const { return examples.size(); }
};

struct GlobalState {
    PromptDistribution dist;
    int round = 0;
};

struct RoundRecord {
    int round = 0;
    std::vector<int> selected;
    double global_loss = 0.0;        // diagnostic, metered-off
    double grad_diversity = 1.0;     // Lambda estimate from client deltas
    std::uint64_t cumulative_queries = 0;
    std::uint64_t eval_queries = 0;  // diagnostic evaluations, separate ledger
};

// Exactly k_per_class examples of every class per client, sampled without
// replacement; shards are disjoint by input_id.
std::vector<ClientShard> partition_kshot(const std::vector<Example>& dataset, int num_clients,
                                         int k_per_class, Rng& rng);

// Per-class proportions drawn from Dirichlet(concentration * 1_K); empty
// shards repaired by moving one example from the largest shard.
std::vector<ClientShard> partition_dirichlet(const std::vector<Example>& dataset,
                                             int num_clients, double concentration, Rng& rng);

// Round-robin split preserving class balance as far as sizes allow.
std::vector<ClientShard> partition_even(const std::vector<Example>& dataset, int num_clients);

// K* categorical draws from q, with replacement by default (duplicates allowed).
std::vector<int> sample_clients(const std::vector<double>& weights, int active_clients, Rng& rng,
                                bool with_replacement = true);

// Entrywise mean of the client alpha matrices, then projection to >= nu.
PromptDistribution aggregate(const std::vector<PromptDistribution>& client_dists);

// Weighted gradient diversity Lambda, per row, reported as the max over rows.
// Returns +infinity when the weighted aggregate gradient vanishes.
double gradient_diversity(const std::vector<Matrix>& local_grads,
                          const std::vector<double>& weights);

// One federation round: sample K* clients, broadcast alpha, local-train each
// (serially or with one OpenMP thread per selected client), aggregate.
// Oracle errors abort the round atomically: state is left unchanged.
RoundRecord run_round(GlobalState& state, const std::vector<ClientShard>& shards, Oracle& oracle,
                      const FederationConfig& cfg, ExecPolicy policy = ExecPolicy::Serial);

struct TrainingOptions {
    ExecPolicy policy = ExecPolicy::Serial;
    // Stop once the diagnostic global loss drops to this level.
    std::optional<double> target_loss;
    // Evaluate the diagnostic every `eval_every` rounds (always on the last).
    int eval_every = 1;
};

// S rounds (or until target). The per-round diagnostic expected loss is
// computed with the oracle's metered-off evaluation path; those evaluations
// are tracked in RoundRecord::eval_queries, never in the training ledger.
std::vector<RoundRecord> run_training(GlobalState& state, const std::vector<ClientShard>& shards,
                                      Oracle& oracle, const FederationConfig& cfg,
                                      const TrainingOptions& opts = {});

}  // namespace fedbdpl
