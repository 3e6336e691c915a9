#include "fedbdpl/federation.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <numeric>

namespace fedbdpl {

void FederationConfig::validate() const {
    if (num_clients < 1) throw ConfigError("K must be >= 1");
    if (active_clients < 1 || active_clients > num_clients)
        throw ConfigError("K_star must satisfy 1 <= K_star <= K");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    local.validate();
    if (!weights.empty()) {
        if (weights.size() != static_cast<std::size_t>(num_clients))
            throw ConfigError("weights q must have length K");
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw ConfigError("weights q must be non-negative");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("weights q must sum to 1");
    }
}

void FederationConfig::default_weights(const std::vector<ClientShard>& shards) {
    if (!weights.empty()) return;
    // q_k = M_k / M, the objective's shard-size weighting
    double total = 0.0;
    for (const ClientShard& s : shards) total += static_cast<double>(s.size());
    weights.resize(shards.size());
    for (std::size_t k = 0; k < shards.size(); ++k)
        weights[k] = static_cast<double>(shards[k].size()) / total;
}

namespace {

std::map<int, std::vector<Example>> group_by_label(const std::vector<Example>& dataset) {
    std::map<int, std::vector<Example>> by_label;
    for (const Example& ex : dataset) by_label[ex.label].push_back(ex);
    return by_label;
}

}  // namespace

std::vector<ClientShard> partition_kshot(const std::vector<Example>& dataset, int num_clients,
                                         int k_per_class, Rng& rng) {
    if (num_clients < 1 || k_per_class < 1) throw ConfigError("invalid k-shot partition");
    auto by_label = group_by_label(dataset);
    const std::size_t need = static_cast<std::size_t>(num_clients) *
                             static_cast<std::size_t>(k_per_class);
    for (auto& [label, pool] : by_label) {
        if (pool.size() < need)
            throw ConfigError("not enough samples of class " + std::to_string(label) +
                              " for the k-shot partition");
        std::shuffle(pool.begin(), pool.end(), rng.engine());
    }
    std::vector<ClientShard> shards(static_cast<std::size_t>(num_clients));
    for (int k = 0; k < num_clients; ++k) shards[k].client_id = k;
    for (auto& [label, pool] : by_label) {
        std::size_t cursor = 0;
        for (int k = 0; k < num_clients; ++k)
            for (int s = 0; s < k_per_class; ++s) shards[k].examples.push_back(pool[cursor++]);
    }
    return shards;
}

std::vector<ClientShard> partition_dirichlet(const std::vector<Example>& dataset,
                                             int num_clients, double concentration, Rng& rng) {
    if (dataset.empty()) throw ConfigError("empty dataset");
    if (num_clients < 1 || concentration <= 0.0)
        throw ConfigError("invalid dirichlet partition parameters");
    std::vector<ClientShard> shards(static_cast<std::size_t>(num_clients));
    for (int k = 0; k < num_clients; ++k) shards[k].client_id = k;

    auto by_label = group_by_label(dataset);
    for (auto& [label, pool] : by_label) {
        std::shuffle(pool.begin(), pool.end(), rng.engine());
        // proportions over clients ~ Dirichlet(concentration * 1_K)
        std::vector<double> prop(static_cast<std::size_t>(num_clients));
        double z = 0.0;
        for (double& g : prop) {
            g = rng.gamma(concentration);
            z += g;
        }
        std::vector<double> cum(prop.size());
        double run = 0.0;
        for (std::size_t k = 0; k < prop.size(); ++k) {
            run += prop[k] / z;
            cum[k] = run;
        }
        cum.back() = 1.0;
        for (std::size_t m = 0; m < pool.size(); ++m) {
            // deterministic largest-remainder-style assignment along the CDF
            const double pos = (static_cast<double>(m) + 0.5) / static_cast<double>(pool.size());
            const std::size_t k = static_cast<std::size_t>(
                std::lower_bound(cum.begin(), cum.end(), pos) - cum.begin());
            shards[std::min(k, prop.size() - 1)].examples.push_back(pool[m]);
        }
    }

    // repair: no shard may be empty
    for (ClientShard& s : shards) {
        while (s.examples.empty()) {
            auto largest = std::max_element(
                shards.begin(), shards.end(),
                [](const ClientShard& a, const ClientShard& b) { return a.size() < b.size(); });
            if (largest->examples.empty()) throw ConfigError("dataset smaller than client count");
            s.examples.push_back(largest->examples.back());
            largest->examples.pop_back();
        }
    }
    return shards;
}

std::vector<ClientShard> partition_even(const std::vector<Example>& dataset, int num_clients) {
    if (dataset.empty()) throw ConfigError("empty dataset");
    if (num_clients < 1 || dataset.size() < static_cast<std::size_t>(num_clients))
        throw ConfigError("dataset smaller than client count");
    std::vector<ClientShard> shards(static_cast<std::size_t>(num_clients));
    for (int k = 0; k < num_clients; ++k) shards[k].client_id = k;
    for (std::size_t m = 0; m < dataset.size(); ++m)
        shards[m % static_cast<std::size_t>(num_clients)].examples.push_back(dataset[m]);
    return shards;
}

std::vector<int> sample_clients(const std::vector<double>& weights, int active_clients, Rng& rng,
                                bool with_replacement) {
    if (weights.empty()) throw ConfigError("empty weight vector");
    if (active_clients < 1 || static_cast<std::size_t>(active_clients) > weights.size())
        throw ConfigError("invalid K_star");
    if (with_replacement) {
        std::vector<int> out(static_cast<std::size_t>(active_clients));
        for (int& id : out) id = sample_categorical(weights, rng);
        return out;
    }
    // ablation mode: successive renormalized draws without replacement
    std::vector<double> w = weights;
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(active_clients));
    for (int d = 0; d < active_clients; ++d) {
        double z = std::accumulate(w.begin(), w.end(), 0.0);
        if (z <= 0.0) throw ConfigError("ran out of positive-weight clients");
        std::vector<double> norm(w);
        for (double& v : norm) v /= z;
        const int id = sample_categorical(norm, rng);
        out.push_back(id);
        w[static_cast<std::size_t>(id)] = 0.0;
    }
    return out;
}

PromptDistribution aggregate(const std::vector<PromptDistribution>& client_dists) {
    if (client_dists.empty()) throw ConfigError("nothing to aggregate");
    const PromptDistribution& first = client_dists.front();
    Matrix mean(first.length(), first.vocab());
    for (const PromptDistribution& d : client_dists) {
        d.alpha.require_same_shape(mean);
        mean += d.alpha;
    }
    mean *= 1.0 / static_cast<double>(client_dists.size());
    PromptDistribution out(std::move(mean), first.tau, first.nu);
    project_alpha(out);
    return out;
}

double gradient_diversity(const std::vector<Matrix>& local_grads,
                          const std::vector<double>& weights) {
    if (local_grads.empty() || local_grads.size() != weights.size())
        throw DimensionError("gradients/weights mismatch");
    const std::size_t n = local_grads.front().rows(), N = local_grads.front().cols();
    double max_lambda = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double num = 0.0;
        std::vector<double> agg(N, 0.0);
        for (std::size_t k = 0; k < local_grads.size(); ++k) {
            const Matrix& g = local_grads[k];
            g.require_same_shape(local_grads.front());
            double row_sq = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                row_sq += g(i, j) * g(i, j);
                agg[j] += weights[k] * g(i, j);
            }
            num += weights[k] * row_sq;
        }
        double den = 0.0;
        for (double v : agg) den += v * v;
        if (den == 0.0) {
            if (num == 0.0) continue;  // all-zero row contributes nothing
            return std::numeric_limits<double>::infinity();
        }
        max_lambda = std::max(max_lambda, num / den);
    }
    return max_lambda == 0.0 ? 1.0 : max_lambda;
}

RoundRecord run_round(GlobalState& state, const std::vector<ClientShard>& shards, Oracle& oracle,
                      const FederationConfig& cfg, ExecPolicy policy) {
    cfg.validate();
    if (shards.size() != static_cast<std::size_t>(cfg.num_clients))
        throw ConfigError("shard count must equal K");
    if (cfg.weights.empty()) throw ConfigError("weights q not set");

    const int round = state.round;
    Rng select_rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(round), 0xA11));
    const std::vector<int> selected =
        sample_clients(cfg.weights, cfg.active_clients, select_rng, cfg.with_replacement);

    oracle.ledger().begin_round();

    // every selected slot owns a distribution copy and a derived rng stream,
    // so serial and parallel execution produce identical results
    std::vector<PromptDistribution> locals(selected.size(), state.dist);
    std::vector<std::exception_ptr> errors(selected.size());

    auto train_slot = [&](std::size_t slot) {
        try {
            const int client = selected[slot];
            Rng rng(mix_seed(cfg.seed, static_cast<std::uint64_t>(round), 0xC11,
                             static_cast<std::uint64_t>(slot)));
            local_train(locals[slot], oracle, shards[static_cast<std::size_t>(client)].examples,
                        cfg.local, rng, client);
        } catch (...) {
            errors[slot] = std::current_exception();
        }
    };

    if (policy == ExecPolicy::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (std::int64_t slot = 0; slot < static_cast<std::int64_t>(selected.size()); ++slot)
            train_slot(static_cast<std::size_t>(slot));
    } else {
        for (std::size_t slot = 0; slot < selected.size(); ++slot) train_slot(slot);
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);  // server state untouched

    RoundRecord rec;
    rec.round = round;
    rec.selected = selected;

    // diversity estimate from the per-client parameter deltas of this round
    std::vector<Matrix> deltas;
    std::vector<double> sel_weights(selected.size(),
                                    1.0 / static_cast<double>(selected.size()));
    deltas.reserve(selected.size());
    for (const PromptDistribution& d : locals) {
        Matrix delta = state.dist.alpha;
        delta -= d.alpha;
        deltas.push_back(std::move(delta));
    }
    rec.grad_diversity = gradient_diversity(deltas, sel_weights);

    state.dist = aggregate(locals);
    state.round = round + 1;
    rec.cumulative_queries = oracle.ledger().total();
    return rec;
}

std::vector<RoundRecord> run_training(GlobalState& state, const std::vector<ClientShard>& shards,
                                      Oracle& oracle, const FederationConfig& cfg,
                                      const TrainingOptions& opts) {
    FederationConfig local_cfg = cfg;
    local_cfg.default_weights(shards);
    local_cfg.validate();

    Batch all_examples;
    for (const ClientShard& s : shards)
        all_examples.insert(all_examples.end(), s.examples.begin(), s.examples.end());

    std::vector<RoundRecord> records;
    records.reserve(static_cast<std::size_t>(local_cfg.rounds));
    std::uint64_t eval_queries = 0;

    for (int s = 0; s < local_cfg.rounds; ++s) {
        RoundRecord rec = run_round(state, shards, oracle, local_cfg, opts.policy);

        const bool eval_now =
            (opts.eval_every <= 1) || (s % opts.eval_every == 0) || (s + 1 == local_cfg.rounds);
        if (eval_now) {
            const ProbMatrix p = forward(state.dist, zero_noise(state.dist.length(),
                                                               state.dist.vocab()));
            rec.global_loss = oracle.expected_loss(p, all_examples);
            ++eval_queries;
        } else {
            rec.global_loss = records.empty() ? 0.0 : records.back().global_loss;
        }
        rec.eval_queries = eval_queries;
        records.push_back(rec);

        if (eval_now && opts.target_loss && rec.global_loss <= *opts.target_loss) break;
    }
    return records;
}

}  // namespace fedbdpl
