#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "fedbdpl/gs_core.hpp"

namespace fedbdpl {

struct Example {
    std::int64_t input_id = 0;
    int label = 0;
};
using Batch = std::vector<Example>;

// Monotone counters of oracle evaluations: the cost currency of the whole
// system. total == sum(per_client) == sum(per_round) at all times.
class QueryLedger {
public:
    void record(int client_id) {
        std::lock_guard lock(mu_);
        ++total_;
        ++per_client_[client_id];
        if (per_round_.empty()) per_round_.push_back(0);
        ++per_round_.back();
    }

    void begin_round() {
        std::lock_guard lock(mu_);
        per_round_.push_back(0);
    }

    std::uint64_t total() const {
        std::lock_guard lock(mu_);
        return total_;
    }
    std::uint64_t for_client(int client_id) const {
        std::lock_guard lock(mu_);
        auto it = per_client_.find(client_id);
        return it == per_client_.end() ? 0 : it->second;
    }
    std::vector<std::uint64_t> per_round() const {
        std::lock_guard lock(mu_);
        return per_round_;
    }

    bool consistent() const {
        std::lock_guard lock(mu_);
        std::uint64_t c = 0, r = 0;
        for (auto& [id, v] : per_client_) c += v;
        for (auto v : per_round_) r += v;
        return c == total_ && (per_round_.empty() ? total_ == 0 : r == total_);
    }

private:
    mutable std::mutex mu_;
    std::uint64_t total_ = 0;
    std::map<int, std::uint64_t> per_client_;
    std::vector<std::uint64_t> per_round_;
};

// Black-box loss oracle. One evaluate() call = one query: it charges the
// ledger, adds Gaussian noise if configured and clips the result to [-G, G].
class Oracle {
public:
    Oracle(double clip_bound, double noise_std) : clip_bound_(clip_bound), noise_std_(noise_std) {
        if (clip_bound_ <= 0.0) throw ConfigError("clip bound G must be > 0");
        if (noise_std_ < 0.0) throw ConfigError("noise_std must be >= 0");
    }
    virtual ~Oracle() = default;

    double evaluate(const PromptSequence& prompt, const Batch& batch, Rng& rng, int client_id);

    // Clipped, noise-free, un-ledgered loss; used only by diagnostics.
    double loss_unmetered(const PromptSequence& prompt, const Batch& batch) const;

    // Exact expected clipped loss under p; generic path enumerates all N^n
    // sequences (guarded), subclasses override with closed forms.
    virtual double expected_loss(const ProbMatrix& p, const Batch& batch) const;

    virtual std::size_t vocab_size() const = 0;

    double clip_bound() const { return clip_bound_; }
    double noise_std() const { return noise_std_; }
    QueryLedger& ledger() { return ledger_; }
    const QueryLedger& ledger() const { return ledger_; }

protected:
    virtual double raw_loss(const PromptSequence& prompt, const Batch& batch) const = 0;

private:
    double clip_bound_;
    double noise_std_;
    QueryLedger ledger_;
};

// Per-example loss: normalized Hamming distance to a hidden target sequence
// plus a fixed offset in [0, offset_scale] keyed by input_id; batch loss is
// the mean. Unique global minimum at the target.
double hidden_prompt_loss(const PromptSequence& prompt, const PromptSequence& target,
                          const Batch& batch, double offset_scale);
double hidden_prompt_offset(std::int64_t input_id, double offset_scale);

class HiddenPromptOracle final : public Oracle {
public:
    HiddenPromptOracle(PromptSequence target, std::size_t vocab, double clip_bound,
                       double noise_std, double offset_scale = 0.0)
        : Oracle(clip_bound, noise_std),
          target_(std::move(target)),
          vocab_(vocab),
          offset_scale_(offset_scale) {
        if (offset_scale_ < 0.0 || offset_scale_ > 0.1)
            throw ConfigError("offset_scale must be in [0, 0.1]");
    }

    double expected_loss(const ProbMatrix& p, const Batch& batch) const override;
    std::size_t vocab_size() const override { return vocab_; }
    const PromptSequence& target() const { return target_; }

protected:
    double raw_loss(const PromptSequence& prompt, const Batch& batch) const override {
        return hidden_prompt_loss(prompt, target_, batch, offset_scale_);
    }

private:
    PromptSequence target_;
    std::size_t vocab_;
    double offset_scale_;
};

// loss = mean over batch of sum_i weights[label][i][j_i] / n. Smooth in p,
// class-dependent, so label-skewed shards induce distinct client optima.
double linear_surrogate_loss(const PromptSequence& prompt, const std::vector<Matrix>& weights,
                             const Batch& batch);

class LinearSurrogateOracle final : public Oracle {
public:
    LinearSurrogateOracle(std::vector<Matrix> per_class_weights, double clip_bound,
                          double noise_std)
        : Oracle(clip_bound, noise_std), weights_(std::move(per_class_weights)) {
        if (weights_.empty()) throw ConfigError("need at least one class weight matrix");
        for (auto& w : weights_) w.require_same_shape(weights_.front());
    }

    double expected_loss(const ProbMatrix& p, const Batch& batch) const override;
    std::size_t vocab_size() const override { return weights_.front().cols(); }
    const std::vector<Matrix>& weights() const { return weights_; }

protected:
    double raw_loss(const PromptSequence& prompt, const Batch& batch) const override {
        return linear_surrogate_loss(prompt, weights_, batch);
    }

private:
    std::vector<Matrix> weights_;
};

// Renormalizes the top-k logprobs over the class-token set and returns the
// negative log-probability of the true class. Class tokens missing from the
// top-k get the floor logprob min(returned) - log(top_k).
double logprob_class_loss(const std::map<std::string, double>& top_logprobs,
                          const std::vector<std::string>& class_tokens, std::size_t true_class,
                          std::size_t top_k);

struct RemoteOracleConfig {
    std::string url;        // e.g. http://localhost:8080
    std::string api_key;
    std::string model;
    std::string template_suffix;                // appended after the input text
    std::vector<std::string> vocabulary;        // prompt token index -> text
    std::vector<std::string> label_tokens;      // class id -> answer token
    std::map<std::int64_t, std::string> texts;  // input_id -> input text
    std::size_t top_k = 20;
    int max_retries = 3;
    int backoff_ms = 1000;
};

// OpenAI-compatible completions client: POST {model, prompt, logprobs} and
// read the top-k token logprobs at the answer position.
class RemoteLlmOracle final : public Oracle {
public:
    RemoteLlmOracle(RemoteOracleConfig cfg, double clip_bound);

    std::size_t vocab_size() const override { return cfg_.vocabulary.size(); }
    const RemoteOracleConfig& config() const { return cfg_; }

    // Single round-trip for one example; exposed for protocol tests.
    double query_example(const PromptSequence& prompt, const Example& ex) const;

protected:
    double raw_loss(const PromptSequence& prompt, const Batch& batch) const override;

private:
    std::map<std::string, double> post_completion(const std::string& prompt_text) const;
    RemoteOracleConfig cfg_;
};

}  // namespace fedbdpl
