#include "fedbdpl/gs_core.hpp"

#include <algorithm>
#include <cmath>

namespace fedbdpl {

PromptDistribution::PromptDistribution(Matrix a, double tau_, double nu_)
    : alpha(std::move(a)), tau(tau_), nu(nu_) {
    if (tau <= 0.0) throw ConfigError("tau must be > 0");
    if (nu <= 0.0) throw ConfigError("nu must be > 0");
    if (alpha.rows() < 1 || alpha.cols() < 2)
        throw ConfigError("need n >= 1 prompt positions and N >= 2 vocabulary entries");
    project_alpha(*this);
}

PromptDistribution PromptDistribution::uniform(std::size_t n, std::size_t N, double tau,
                                               double nu) {
    return PromptDistribution(Matrix(n, N, 1.0 / static_cast<double>(N)), tau, nu);
}

double gumbel_from_uniform(double u) { return -std::log(-std::log(u)); }

GumbelNoise sample_gumbel(std::size_t n, std::size_t N, Rng& rng) {
    if (n < 1 || N < 2) throw ConfigError("need n >= 1 and N >= 2");
    GumbelNoise g(n, N);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < N; ++j) g(i, j) = gumbel_from_uniform(rng.uniform_open01());
    return g;
}

GumbelNoise zero_noise(std::size_t n, std::size_t N) { return GumbelNoise(n, N, 0.0); }

ProbMatrix forward(const PromptDistribution& dist, const GumbelNoise& noise) {
    dist.alpha.require_same_shape(noise);
    const std::size_t n = dist.length(), N = dist.vocab();
    ProbMatrix p(n, N);
    std::vector<double> logits(N);
    for (std::size_t i = 0; i < n; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < N; ++j) {
            logits[j] = (std::log(dist.alpha(i, j)) + noise(i, j)) / dist.tau;
            m = std::max(m, logits[j]);
        }
        double z = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            p(i, j) = std::exp(logits[j] - m);
            z += p(i, j);
        }
        for (std::size_t j = 0; j < N; ++j) p(i, j) /= z;
    }
    return p;
}

int sample_categorical(std::span<const double> row, Rng& rng) {
    const double u = rng.uniform01();
    double cum = 0.0;
    for (std::size_t j = 0; j + 1 < row.size(); ++j) {
        cum += row[j];
        if (u < cum) return static_cast<int>(j);
    }
    return static_cast<int>(row.size() - 1);  // residual mass
}

PromptSequence sample_prompt(const ProbMatrix& p, Rng& rng) {
    PromptSequence seq(p.rows());
    for (std::size_t i = 0; i < p.rows(); ++i) seq[i] = sample_categorical(p.row(i), rng);
    return seq;
}

Matrix log_prob_grad(const ProbMatrix& p, const PromptDistribution& dist,
                     const PromptSequence& prompt) {
    p.require_same_shape(dist.alpha);
    if (prompt.size() != p.rows()) throw DimensionError("prompt length mismatch");
    const std::size_t n = p.rows(), N = p.cols();
    Matrix g(n, N);
    for (std::size_t i = 0; i < n; ++i) {
        const int ji = prompt[i];
        if (ji < 0 || static_cast<std::size_t>(ji) >= N)
            throw DimensionError("prompt index out of vocabulary range");
        for (std::size_t j = 0; j < N; ++j) {
            if (static_cast<int>(j) == ji)
                g(i, j) = (1.0 - p(i, j)) / (dist.tau * dist.alpha(i, j));
            else
                g(i, j) = -p(i, j) / (dist.tau * dist.alpha(i, j));
        }
    }
    return g;
}

void project_alpha(PromptDistribution& dist) {
    for (double& v : dist.alpha.flat()) v = std::max(v, dist.nu);
}

double prompt_probability(const ProbMatrix& p, const PromptSequence& prompt) {
    if (prompt.size() != p.rows()) throw DimensionError("prompt length mismatch");
    double prob = 1.0;
    for (std::size_t i = 0; i < p.rows(); ++i) prob *= p(i, prompt[i]);
    return prob;
}

}  // namespace fedbdpl
