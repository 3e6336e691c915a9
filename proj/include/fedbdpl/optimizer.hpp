#pragma once

#include <functional>
#include <vector>

#include "fedbdpl/gs_core.hpp"
#include "fedbdpl/oracle.hpp"

namespace fedbdpl {

struct LocalTrainConfig {
    int epochs = 1;          // E
    int batch_size = 1;      // B
    int prompt_samples = 4;  // I, must be >= 2
    double learning_rate = 0.1;

    void validate() const {
        if (epochs < 1) throw ConfigError("epochs must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (prompt_samples < 2) throw ConfigError("prompt_samples I must be >= 2");
        if (learning_rate < 0.0) throw ConfigError("learning_rate must be >= 0");
    }
};

struct SampleBundle {
    std::vector<PromptSequence> prompts;
    std::vector<double> losses;
};

using LossFn = std::function<double(const PromptSequence&)>;

// Variance-reduced policy gradient over I prompt samples:
//   grad = 1/(I-1) * sum_r (loss_r - mean(loss)) * log_prob_grad(prompt_r)
Matrix mbsvrp_estimate(const SampleBundle& bundle, const ProbMatrix& p,
                       const PromptDistribution& dist);

// Exhaustive score-function gradient of the expected loss over all N^n prompt
// sequences; the independent oracle the estimator is checked against.
Matrix exact_policy_gradient(const PromptDistribution& dist, const GumbelNoise& noise,
                             const LossFn& loss_fn, ExecPolicy policy = ExecPolicy::Serial);

// Exhaustive expected loss sum_prompt loss(prompt) * P(prompt).
double exact_expected_loss(const ProbMatrix& p, const LossFn& loss_fn,
                           ExecPolicy policy = ExecPolicy::Serial);

// One local iteration: fresh Gumbel noise, I prompt samples sharing the same
// probability matrix, I oracle queries, MB-SVRP estimate, gradient step,
// projection back above the floor.
void local_step(PromptDistribution& dist, Oracle& oracle, const Batch& batch,
                const LocalTrainConfig& cfg, Rng& rng, int client_id);

// E epochs over shuffled mini-batches of size B; the last partial batch is
// kept. Consumes exactly E * ceil(|data|/B) * I oracle queries.
void local_train(PromptDistribution& dist, Oracle& oracle, const std::vector<Example>& data,
                 const LocalTrainConfig& cfg, Rng& rng, int client_id);

}  // namespace fedbdpl
