#include "fedbdpl/optimizer.hpp"

#include <algorithm>
#include <numeric>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedbdpl/enumerate.hpp"

namespace fedbdpl {

Matrix mbsvrp_estimate(const SampleBundle& bundle, const ProbMatrix& p,
                       const PromptDistribution& dist) {
    const std::size_t samples = bundle.prompts.size();
    if (samples < 2) throw ConfigError("MB-SVRP needs I >= 2 prompt samples");
    if (bundle.losses.size() != samples)
        throw DimensionError("bundle prompt/loss count mismatch");

    const double mean_loss =
        std::accumulate(bundle.losses.begin(), bundle.losses.end(), 0.0) /
        static_cast<double>(samples);

    Matrix grad(dist.length(), dist.vocab());
    for (std::size_t r = 0; r < samples; ++r) {
        const double w = bundle.losses[r] - mean_loss;
        if (w == 0.0) continue;
        Matrix g = log_prob_grad(p, dist, bundle.prompts[r]);
        g *= w;
        grad += g;
    }
    grad *= 1.0 / static_cast<double>(samples - 1);
    return grad;
}

Matrix exact_policy_gradient(const PromptDistribution& dist, const GumbelNoise& noise,
                             const LossFn& loss_fn, ExecPolicy policy) {
    const ProbMatrix p = forward(dist, noise);
    const std::size_t n = dist.length(), N = dist.vocab();
    const std::uint64_t total = sequence_count(n, N);
    Matrix grad(n, N);

    if (policy == ExecPolicy::Serial) {
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            const PromptSequence seq = decode_prompt(idx, n, N);
            const double w = loss_fn(seq) * prompt_probability(p, seq);
            Matrix g = log_prob_grad(p, dist, seq);
            g *= w;
            grad += g;
        }
        return grad;
    }

#ifdef _OPENMP
    const int threads = omp_get_max_threads();
#else
    const int threads = 1;
#endif
    std::vector<Matrix> partial(static_cast<std::size_t>(threads), Matrix(n, N));
#pragma omp parallel for schedule(static)
    for (std::int64_t idx = 0; idx < static_cast<std::int64_t>(total); ++idx) {
#ifdef _OPENMP
        Matrix& acc = partial[static_cast<std::size_t>(omp_get_thread_num())];
#else
        Matrix& acc = partial[0];
#endif
        const PromptSequence seq = decode_prompt(static_cast<std::uint64_t>(idx), n, N);
        const double w = loss_fn(seq) * prompt_probability(p, seq);
        Matrix g = log_prob_grad(p, dist, seq);
        g *= w;
        acc += g;
    }
    for (const Matrix& m : partial) grad += m;
    return grad;
}

double exact_expected_loss(const ProbMatrix& p, const LossFn& loss_fn, ExecPolicy policy) {
    const std::size_t n = p.rows(), N = p.cols();
    const std::uint64_t total = sequence_count(n, N);

    if (policy == ExecPolicy::Serial) {
        double acc = 0.0;
        for (std::uint64_t idx = 0; idx < total; ++idx) {
            const PromptSequence seq = decode_prompt(idx, n, N);
            acc += loss_fn(seq) * prompt_probability(p, seq);
        }
        return acc;
    }

    double acc = 0.0;
#pragma omp parallel for schedule(static) reduction(+ : acc)
    for (std::int64_t idx = 0; idx < static_cast<std::int64_t>(total); ++idx) {
        const PromptSequence seq = decode_prompt(static_cast<std::uint64_t>(idx), n, N);
        acc += loss_fn(seq) * prompt_probability(p, seq);
    }
    return acc;
}

void local_step(PromptDistribution& dist, Oracle& oracle, const Batch& batch,
                const LocalTrainConfig& cfg, Rng& rng, int client_id) {
    cfg.validate();
    if (batch.empty()) throw ConfigError("empty mini-batch");

    const GumbelNoise noise = sample_gumbel(dist.length(), dist.vocab(), rng);
    const ProbMatrix p = forward(dist, noise);

    SampleBundle bundle;
    bundle.prompts.reserve(static_cast<std::size_t>(cfg.prompt_samples));
    bundle.losses.reserve(static_cast<std::size_t>(cfg.prompt_samples));
    for (int r = 0; r < cfg.prompt_samples; ++r) {
        PromptSequence prompt = sample_prompt(p, rng);
        const double loss = oracle.evaluate(prompt, batch, rng, client_id);
        bundle.prompts.push_back(std::move(prompt));
        bundle.losses.push_back(loss);
    }

    Matrix grad = mbsvrp_estimate(bundle, p, dist);
    grad *= cfg.learning_rate;
    dist.alpha -= grad;
    project_alpha(dist);
}

void local_train(PromptDistribution& dist, Oracle& oracle, const std::vector<Example>& data,
                 const LocalTrainConfig& cfg, Rng& rng, int client_id) {
    cfg.validate();
    if (data.empty()) throw ConfigError("empty client dataset");

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng.engine());
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end =
                std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            Batch batch;
            batch.reserve(end - start);
            for (std::size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
            local_step(dist, oracle, batch, cfg, rng, client_id);
        }
    }
}

}  // namespace fedbdpl
