#include "fedbdpl/oracle.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "fedbdpl/enumerate.hpp"

namespace fedbdpl {

namespace {
double clip(double v, double bound) { return std::clamp(v, -bound, bound); }
}  // namespace

double Oracle::evaluate(const PromptSequence& prompt, const Batch& batch, Rng& rng,
                        int client_id) {
    if (batch.empty()) throw ConfigError("empty batch");
    for (int j : prompt)
        if (j < 0 || static_cast<std::size_t>(j) >= vocab_size())
            throw DimensionError("prompt index out of oracle vocabulary");
    ledger_.record(client_id);  // the attempt counts even if the query fails
    double loss = raw_loss(prompt, batch);
    if (noise_std_ > 0.0) loss += rng.gaussian(noise_std_);
    return clip(loss, clip_bound_);
}

double Oracle::loss_unmetered(const PromptSequence& prompt, const Batch& batch) const {
    return clip(raw_loss(prompt, batch), clip_bound_);
}

double Oracle::expected_loss(const ProbMatrix& p, const Batch& batch) const {
    const std::size_t n = p.rows(), N = p.cols();
    double total = 1.0;
    bool enumerable = true;
    for (std::size_t i = 0; i < n && enumerable; ++i) {
        total *= static_cast<double>(N);
        if (total > static_cast<double>(kEnumerationLimit)) enumerable = false;
    }
    if (enumerable) {
        double acc = 0.0;
        for_each_prompt(p, [&](const PromptSequence& seq, double prob) {
            acc += prob * loss_unmetered(seq, batch);
        });
        return acc;
    }
    // Monte-Carlo fallback, 256 prompt draws with a fixed evaluation seed.
    Rng rng(mix_seed(0x9e3779b9, n, N));
    double acc = 0.0;
    constexpr int kDraws = 256;
    for (int d = 0; d < kDraws; ++d) acc += loss_unmetered(sample_prompt(p, rng), batch);
    return acc / kDraws;
}

double hidden_prompt_offset(std::int64_t input_id, double offset_scale) {
    const std::uint64_t h = splitmix64(static_cast<std::uint64_t>(input_id));
    return offset_scale * static_cast<double>(h % 1024) / 1023.0;
}

double hidden_prompt_loss(const PromptSequence& prompt, const PromptSequence& target,
                          const Batch& batch, double offset_scale) {
    if (prompt.size() != target.size()) throw DimensionError("prompt/target length mismatch");
    if (batch.empty()) throw ConfigError("empty batch");
    std::size_t mismatches = 0;
    for (std::size_t i = 0; i < prompt.size(); ++i)
        if (prompt[i] != target[i]) ++mismatches;
    const double dist = static_cast<double>(mismatches) / static_cast<double>(prompt.size());
    double acc = 0.0;
    for (const Example& ex : batch) acc += dist + hidden_prompt_offset(ex.input_id, offset_scale);
    return acc / static_cast<double>(batch.size());
}

double HiddenPromptOracle::expected_loss(const ProbMatrix& p, const Batch& batch) const {
    // E[Hamming/n] factorizes over positions: sum_i (1 - p_i[target_i]) / n.
    if (p.rows() != target_.size()) throw DimensionError("prompt length mismatch");
    double dist = 0.0;
    for (std::size_t i = 0; i < target_.size(); ++i) dist += 1.0 - p(i, target_[i]);
    dist /= static_cast<double>(target_.size());
    double off = 0.0;
    for (const Example& ex : batch) off += hidden_prompt_offset(ex.input_id, offset_scale_);
    off /= static_cast<double>(batch.size());
    return std::min(dist + off, clip_bound());
}

double linear_surrogate_loss(const PromptSequence& prompt, const std::vector<Matrix>& weights,
                             const Batch& batch) {
    if (batch.empty()) throw ConfigError("empty batch");
    const std::size_t n = prompt.size();
    if (weights.empty() || weights.front().rows() != n)
        throw DimensionError("weight shape mismatch");
    double acc = 0.0;
    for (const Example& ex : batch) {
        if (ex.label < 0 || static_cast<std::size_t>(ex.label) >= weights.size())
            throw DimensionError("label outside the class set");
        const Matrix& w = weights[ex.label];
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += w(i, prompt[i]);
        acc += s / static_cast<double>(n);
    }
    return acc / static_cast<double>(batch.size());
}

double LinearSurrogateOracle::expected_loss(const ProbMatrix& p, const Batch& batch) const {
    // Linear in p: E[loss] = mean over batch of sum_ij p_ij * w[label](i,j) / n.
    const std::size_t n = p.rows(), N = p.cols();
    double acc = 0.0;
    for (const Example& ex : batch) {
        const Matrix& w = weights_[ex.label];
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < N; ++j) s += p(i, j) * w(i, j);
        acc += s / static_cast<double>(n);
    }
    acc /= static_cast<double>(batch.size());
    return clip(acc, clip_bound());
}

double logprob_class_loss(const std::map<std::string, double>& top_logprobs,
                          const std::vector<std::string>& class_tokens, std::size_t true_class,
                          std::size_t top_k) {
    if (class_tokens.empty() || true_class >= class_tokens.size())
        throw ConfigError("invalid class token table");
    if (top_logprobs.empty()) throw QueryError("empty logprob map in oracle reply");
    double min_lp = std::numeric_limits<double>::infinity();
    for (auto& [tok, lp] : top_logprobs) min_lp = std::min(min_lp, lp);
    const double floor_lp = min_lp - std::log(static_cast<double>(top_k));
    std::vector<double> class_lps;
    class_lps.reserve(class_tokens.size());
    for (const std::string& tok : class_tokens) {
        auto it = top_logprobs.find(tok);
        class_lps.push_back(it == top_logprobs.end() ? floor_lp : it->second);
    }
    // log-sum-exp renormalization over the class set
    const double m = *std::max_element(class_lps.begin(), class_lps.end());
    double z = 0.0;
    for (double lp : class_lps) z += std::exp(lp - m);
    return -(class_lps[true_class] - m - std::log(z));
}

RemoteLlmOracle::RemoteLlmOracle(RemoteOracleConfig cfg, double clip_bound)
    : Oracle(clip_bound, 0.0), cfg_(std::move(cfg)) {
    if (cfg_.url.empty()) throw ConfigError("remote oracle needs an endpoint URL");
    if (cfg_.vocabulary.empty()) throw ConfigError("remote oracle needs a vocabulary");
    if (cfg_.label_tokens.empty()) throw ConfigError("remote oracle needs label tokens");
}

std::map<std::string, double> RemoteLlmOracle::post_completion(
    const std::string& prompt_text) const {
    nlohmann::json body = {
        {"model", cfg_.model},
        {"prompt", prompt_text},
        {"max_tokens", 1},
        {"logprobs", cfg_.top_k},
        {"echo", false},
    };
    httplib::Client client(cfg_.url);
    client.set_read_timeout(30, 0);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) headers.emplace("Authorization", "Bearer " + cfg_.api_key);

    std::string last_error;
    for (int attempt = 0; attempt < cfg_.max_retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(
                std::chrono::milliseconds(cfg_.backoff_ms << (attempt - 1)));
        auto res = client.Post("/v1/completions", headers, body.dump(), "application/json");
        if (!res) {
            last_error = "transport failure";
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        nlohmann::json reply;
        try {
            reply = nlohmann::json::parse(res->body);
            const auto& top = reply.at("choices").at(0).at("logprobs").at("top_logprobs").at(0);
            std::map<std::string, double> out;
            for (auto it = top.begin(); it != top.end(); ++it)
                out[it.key()] = it.value().get<double>();
            if (out.empty()) throw QueryError("empty top_logprobs in oracle reply");
            return out;
        } catch (const nlohmann::json::exception& e) {
            throw QueryError(std::string("malformed oracle reply: ") + e.what());
        }
    }
    throw QueryError("remote oracle failed after " + std::to_string(cfg_.max_retries) +
                     " attempts: " + last_error);
}

double RemoteLlmOracle::query_example(const PromptSequence& prompt, const Example& ex) const {
    std::string text;
    for (int j : prompt) {
        text += cfg_.vocabulary.at(static_cast<std::size_t>(j));
        text += ' ';
    }
    auto it = cfg_.texts.find(ex.input_id);
    if (it == cfg_.texts.end()) throw ConfigError("no input text for example");
    text += it->second;
    text += cfg_.template_suffix;
    const auto top = post_completion(text);
    return logprob_class_loss(top, cfg_.label_tokens, static_cast<std::size_t>(ex.label),
                              cfg_.top_k);
}

double RemoteLlmOracle::raw_loss(const PromptSequence& prompt, const Batch& batch) const {
    double acc = 0.0;
    for (const Example& ex : batch) acc += query_example(prompt, ex);
    return acc / static_cast<double>(batch.size());
}

}  // namespace fedbdpl
