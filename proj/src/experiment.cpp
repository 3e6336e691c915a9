#include "fedbdpl/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fedbdpl {

void ExperimentConfig::validate() const {
    if (prompt_length < 1) throw ConfigError("prompt_length must be >= 1");
    if (vocab_size < 2) throw ConfigError("vocab_size must be >= 2");
    if (tau <= 0) throw ConfigError("tau must be > 0");
    if (nu <= 0) throw ConfigError("nu must be > 0");
    if (dataset_size < 1) throw ConfigError("dataset_size must be >= 1");
    if (dataset_classes < 1) throw ConfigError("dataset_classes must be >= 1");
    if (replications < 1) throw ConfigError("replications must be >= 1");
    if (budget_rounds < 1) throw ConfigError("budget_rounds must be >= 1");
    if (sweep.empty()) throw ConfigError("sweep must list at least one K_star value");
    for (int k : sweep)
        if (k < 1 || k > federation.num_clients)
            throw ConfigError("sweep K_star values must lie in [1, K]");
    if (oracle.clip_bound <= 0) throw ConfigError("oracle G must be > 0");
    if (oracle.noise_std < 0) throw ConfigError("oracle noise_std must be >= 0");
    if (federation.num_clients < 1) throw ConfigError("K must be >= 1");
    federation.local.validate();
}

namespace {

template <typename T>
T field_or(const nlohmann::json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError(std::string("invalid value for field '") + key + "'");
    }
}

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(json_text);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.prompt_length = field_or<std::size_t>(j, "prompt_length", cfg.prompt_length);
    cfg.vocab_size = field_or<std::size_t>(j, "vocab_size", cfg.vocab_size);
    cfg.tau = field_or<double>(j, "tau", cfg.tau);
    cfg.nu = field_or<double>(j, "nu", cfg.nu);
    cfg.dataset_size = field_or<int>(j, "dataset_size", cfg.dataset_size);
    cfg.dataset_classes = field_or<int>(j, "dataset_classes", cfg.dataset_classes);
    cfg.sweep = field_or<std::vector<int>>(j, "sweep", cfg.sweep);
    cfg.replications = field_or<int>(j, "replications", cfg.replications);
    cfg.target_loss = field_or<double>(j, "target_loss", cfg.target_loss);
    cfg.budget_rounds = field_or<int>(j, "budget_rounds", cfg.budget_rounds);
    cfg.outlier_iqr_mult = field_or<double>(j, "outlier_iqr_mult", cfg.outlier_iqr_mult);
    cfg.output_dir = field_or<std::string>(j, "output_dir", cfg.output_dir);

    if (j.contains("federation")) {
        const auto& f = j.at("federation");
        cfg.federation.num_clients = field_or<int>(f, "clients", 1);
        cfg.federation.active_clients = field_or<int>(f, "active_clients", 1);
        cfg.federation.rounds = field_or<int>(f, "rounds", cfg.budget_rounds);
        cfg.federation.seed = field_or<std::uint64_t>(f, "seed", 0);
        cfg.federation.with_replacement = field_or<bool>(f, "with_replacement", true);
        cfg.federation.weights = field_or<std::vector<double>>(f, "weights", {});
        if (f.contains("local")) {
            const auto& l = f.at("local");
            cfg.federation.local.epochs = field_or<int>(l, "epochs", 1);
            cfg.federation.local.batch_size = field_or<int>(l, "batch_size", 1);
            cfg.federation.local.prompt_samples = field_or<int>(l, "prompt_samples", 4);
            cfg.federation.local.learning_rate = field_or<double>(l, "learning_rate", 0.1);
        }
    }
    if (cfg.federation.active_clients > cfg.federation.num_clients)
        throw ConfigError("field 'federation.active_clients' (K_star) exceeds clients (K)");

    if (j.contains("oracle")) {
        const auto& o = j.at("oracle");
        const std::string kind = field_or<std::string>(o, "kind", "hidden_prompt");
        if (kind == "hidden_prompt")
            cfg.oracle.kind = OracleKind::HiddenPrompt;
        else if (kind == "linear_surrogate")
            cfg.oracle.kind = OracleKind::LinearSurrogate;
        else if (kind == "remote_llm")
            cfg.oracle.kind = OracleKind::RemoteLlm;
        else
            throw ConfigError("unknown oracle kind '" + kind + "'");
        cfg.oracle.clip_bound = field_or<double>(o, "clip_bound", 1.0);
        cfg.oracle.noise_std = field_or<double>(o, "noise_std", 0.0);
        cfg.oracle.offset_scale = field_or<double>(o, "offset_scale", 0.0);
        cfg.oracle.num_classes = field_or<int>(o, "num_classes", cfg.dataset_classes);
        cfg.oracle.target = field_or<PromptSequence>(o, "target", {});
        if (cfg.oracle.kind == OracleKind::RemoteLlm) {
            auto& r = cfg.oracle.remote;
            if (const char* url = std::getenv("REMOTE_API_URL")) r.url = url;
            if (const char* key = std::getenv("REMOTE_API_KEY")) r.api_key = key;
            r.url = field_or<std::string>(o, "url", r.url);
            r.model = field_or<std::string>(o, "model", "gpt-3.5-turbo-instruct");
            r.template_suffix = field_or<std::string>(o, "template", "");
            r.vocabulary = field_or<std::vector<std::string>>(o, "vocabulary", {});
            r.label_tokens = field_or<std::vector<std::string>>(o, "label_tokens", {});
            r.top_k = field_or<std::size_t>(o, "top_k", 20);
        }
    }

    if (j.contains("partition")) {
        const auto& p = j.at("partition");
        const std::string kind = field_or<std::string>(p, "kind", "even");
        if (kind == "even")
            cfg.partition.kind = PartitionKind::Even;
        else if (kind == "kshot")
            cfg.partition.kind = PartitionKind::KShot;
        else if (kind == "dirichlet")
            cfg.partition.kind = PartitionKind::Dirichlet;
        else
            throw ConfigError("unknown partition kind '" + kind + "'");
        cfg.partition.k_per_class = field_or<int>(p, "k_per_class", 1);
        cfg.partition.concentration = field_or<double>(p, "concentration", 0.5);
    }

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::vector<Example> make_dataset(const ExperimentConfig& cfg) {
    std::vector<Example> dataset(static_cast<std::size_t>(cfg.dataset_size));
    for (int m = 0; m < cfg.dataset_size; ++m)
        dataset[static_cast<std::size_t>(m)] = {m, m % cfg.dataset_classes};
    return dataset;
}

std::unique_ptr<Oracle> make_oracle(const ExperimentConfig& cfg, std::uint64_t seed) {
    switch (cfg.oracle.kind) {
        case OracleKind::HiddenPrompt: {
            PromptSequence target = cfg.oracle.target;
            if (target.empty()) {
                Rng rng(mix_seed(seed, 0x7A26));
                target.resize(cfg.prompt_length);
                for (int& t : target) t = static_cast<int>(rng.index(cfg.vocab_size));
            }
            if (target.size() != cfg.prompt_length)
                throw ConfigError("oracle target length must equal prompt_length");
            return std::make_unique<HiddenPromptOracle>(target, cfg.vocab_size,
                                                        cfg.oracle.clip_bound,
                                                        cfg.oracle.noise_std,
                                                        cfg.oracle.offset_scale);
        }
        case OracleKind::LinearSurrogate: {
            // each class prefers its own token block; entries elsewhere carry
            // a seeded perturbation so the objective is not degenerate
            Rng rng(mix_seed(seed, 0x5417));
            std::vector<Matrix> weights;
            weights.reserve(static_cast<std::size_t>(cfg.oracle.num_classes));
            for (int c = 0; c < cfg.oracle.num_classes; ++c) {
                Matrix w(cfg.prompt_length, cfg.vocab_size);
                const std::size_t preferred =
                    static_cast<std::size_t>(c) % cfg.vocab_size;
                for (std::size_t i = 0; i < cfg.prompt_length; ++i)
                    for (std::size_t j = 0; j < cfg.vocab_size; ++j)
                        w(i, j) = (j == preferred) ? 0.0 : 0.8 + 0.2 * rng.uniform01();
                weights.push_back(std::move(w));
            }
            return std::make_unique<LinearSurrogateOracle>(std::move(weights),
                                                           cfg.oracle.clip_bound,
                                                           cfg.oracle.noise_std);
        }
        case OracleKind::RemoteLlm: {
            RemoteOracleConfig remote = cfg.oracle.remote;
            if (remote.texts.empty())
                for (int m = 0; m < cfg.dataset_size; ++m)
                    remote.texts[m] = "input #" + std::to_string(m);
            return std::make_unique<RemoteLlmOracle>(std::move(remote), cfg.oracle.clip_bound);
        }
    }
    throw ConfigError("unreachable oracle kind");
}

std::vector<ClientShard> make_shards(const ExperimentConfig& cfg,
                                     const std::vector<Example>& dataset, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x9A47));
    switch (cfg.partition.kind) {
        case PartitionKind::Even:
            return partition_even(dataset, cfg.federation.num_clients);
        case PartitionKind::KShot:
            return partition_kshot(dataset, cfg.federation.num_clients,
                                   cfg.partition.k_per_class, rng);
        case PartitionKind::Dirichlet:
            return partition_dirichlet(dataset, cfg.federation.num_clients,
                                       cfg.partition.concentration, rng);
    }
    throw ConfigError("unreachable partition kind");
}

std::string metrics_csv_header() {
    return "k_star,replication,seed,rounds_to_target,queries_to_target,final_loss,"
           "wall_time_s,reached,failed";
}

std::string metrics_csv_line(const MetricsRow& r) {
    std::ostringstream os;
    os << r.k_star << ',' << r.replication << ',' << r.seed << ',' << r.rounds_to_target << ','
       << r.queries_to_target << ',' << r.final_loss << ',' << r.wall_time_s << ','
       << (r.reached ? 1 : 0) << ',' << (r.failed ? 1 : 0);
    return os.str();
}

MetricsRow run_cell(const ExperimentConfig& cfg, int k_star, int replication,
                    ExecPolicy policy) {
    MetricsRow row;
    row.k_star = k_star;
    row.replication = replication;
    row.seed = mix_seed(cfg.federation.seed, static_cast<std::uint64_t>(k_star),
                        static_cast<std::uint64_t>(replication));

    const auto t0 = std::chrono::steady_clock::now();
    try {
        FederationConfig fed = cfg.federation;
        fed.active_clients = k_star;
        fed.rounds = cfg.budget_rounds;
        fed.seed = row.seed;
        fed.weights.clear();  // re-derived from shard sizes per replication

        auto dataset = make_dataset(cfg);
        auto shards = make_shards(cfg, dataset, row.seed);
        auto oracle = make_oracle(cfg, cfg.federation.seed);  // task fixed across reps

        GlobalState state{PromptDistribution::uniform(cfg.prompt_length, cfg.vocab_size,
                                                      cfg.tau, cfg.nu),
                          0};
        TrainingOptions opts;
        opts.policy = policy;
        opts.target_loss = cfg.target_loss;
        auto records = run_training(state, shards, *oracle, fed, opts);

        const RoundRecord& last = records.back();
        row.final_loss = last.global_loss;
        if (last.global_loss <= cfg.target_loss) {
            row.reached = true;
            row.rounds_to_target = last.round + 1;
            row.queries_to_target = last.cumulative_queries;
        }
    } catch (const QueryError&) {
        row.failed = true;
    }
    row.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return row;
}

std::vector<MetricsRow> run_sweep(const ExperimentConfig& cfg, std::ostream* csv,
                                  ExecPolicy policy) {
    cfg.validate();
    if (csv) *csv << metrics_csv_header() << '\n' << std::flush;
    std::vector<MetricsRow> rows;
    rows.reserve(cfg.sweep.size() * static_cast<std::size_t>(cfg.replications));
    for (int k_star : cfg.sweep) {
        for (int rep = 0; rep < cfg.replications; ++rep) {
            MetricsRow row = run_cell(cfg, k_star, rep, policy);
            if (csv) *csv << metrics_csv_line(row) << '\n' << std::flush;
            rows.push_back(row);
        }
    }
    return rows;
}

double median(std::vector<double> values) {
    if (values.empty()) throw ConfigError("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t m = values.size() / 2;
    return values.size() % 2 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

namespace {

double quantile_sorted(const std::vector<double>& sorted, double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] * (1.0 - frac) + sorted[hi] * frac;
}

}  // namespace

std::vector<GroupSummary> summarize(const std::vector<MetricsRow>& rows, double iqr_mult) {
    std::vector<int> groups;
    for (const MetricsRow& r : rows)
        if (std::find(groups.begin(), groups.end(), r.k_star) == groups.end())
            groups.push_back(r.k_star);
    std::sort(groups.begin(), groups.end());

    std::vector<GroupSummary> out;
    for (int k : groups) {
        GroupSummary g;
        g.k_star = k;
        std::vector<double> queries;
        for (const MetricsRow& r : rows) {
            if (r.k_star != k) continue;
            ++g.rows;
            if (r.failed || !r.reached) {
                ++g.unreached;
                continue;
            }
            queries.push_back(static_cast<double>(r.queries_to_target));
        }
        if (queries.empty()) {
            g.reachable = false;
            out.push_back(g);
            continue;
        }
        g.reachable = true;
        std::sort(queries.begin(), queries.end());
        const double q1 = quantile_sorted(queries, 0.25);
        const double q3 = quantile_sorted(queries, 0.75);
        const double iqr = q3 - q1;
        std::vector<double> kept;
        for (double v : queries) {
            if (v < q1 - iqr_mult * iqr || v > q3 + iqr_mult * iqr)
                ++g.dropped;
            else
                kept.push_back(v);
        }
        const double n = static_cast<double>(kept.size());
        g.mean_queries = std::accumulate(kept.begin(), kept.end(), 0.0) / n;
        double var = 0.0;
        for (double v : kept) var += (v - g.mean_queries) * (v - g.mean_queries);
        g.std_queries = n > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
        g.median_queries = median(kept);
        out.push_back(g);
    }
    return out;
}

std::string summary_json(const std::vector<GroupSummary>& groups, double iqr_mult) {
    nlohmann::json j;
    j["outlier_rule"] = "IQR x " + std::to_string(iqr_mult);
    j["groups"] = nlohmann::json::array();
    for (const GroupSummary& g : groups) {
        j["groups"].push_back({{"k_star", g.k_star},
                               {"rows", g.rows},
                               {"dropped", g.dropped},
                               {"unreached", g.unreached},
                               {"reachable", g.reachable},
                               {"mean_queries", g.mean_queries},
                               {"std_queries", g.std_queries},
                               {"median_queries", g.median_queries}});
    }
    return j.dump(2);
}

}  // namespace fedbdpl
