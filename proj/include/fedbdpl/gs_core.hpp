#pragma once

#include <cstddef>
#include <vector>

#include "fedbdpl/matrix.hpp"
#include "fedbdpl/rng.hpp"

namespace fedbdpl {

using GumbelNoise = Matrix;
using ProbMatrix = Matrix;
using PromptSequence = std::vector<int>;

// Gumbel-Softmax categorical distribution over a discrete prompt of length n
// drawn from a vocabulary of size N. alpha is the learnable parameter, tau the
// softmax temperature, nu the positivity floor kept by projection.
struct PromptDistribution {
    Matrix alpha;
    double tau = 1.0;
    double nu = 1e-2;

    PromptDistribution(Matrix a, double tau_, double nu_);

    // All-entries-equal start: alpha = 1/N everywhere (uniform p at zero noise).
    static PromptDistribution uniform(std::size_t n, std::size_t N, double tau, double nu);

    std::size_t length() const { return alpha.rows(); }
    std::size_t vocab() const { return alpha.cols(); }
};

// Inverse-CDF transform of a uniform (0,1) draw to a standard Gumbel variate.
double gumbel_from_uniform(double u);

GumbelNoise sample_gumbel(std::size_t n, std::size_t N, Rng& rng);
GumbelNoise zero_noise(std::size_t n, std::size_t N);

// Softmax of (log alpha + g)/tau per row, with max subtraction.
ProbMatrix forward(const PromptDistribution& dist, const GumbelNoise& noise);

// One categorical index per row by inverse-CDF scan (strict less-than;
// residual rounding mass goes to the last column).
PromptSequence sample_prompt(const ProbMatrix& p, Rng& rng);
int sample_categorical(std::span<const double> row, Rng& rng);

// d log p_{i, j_i} / d alpha_{i,j}:
//   (1 - p[i][j_i]) / (tau * alpha[i][j_i])  at the selected column,
//   -p[i][j] / (tau * alpha[i][j])           elsewhere.
Matrix log_prob_grad(const ProbMatrix& p, const PromptDistribution& dist,
                     const PromptSequence& prompt);

// Clamp every alpha entry up to the floor nu.
void project_alpha(PromptDistribution& dist);

// Probability of drawing exactly `prompt` (product over rows).
double prompt_probability(const ProbMatrix& p, const PromptSequence& prompt);

}  // namespace fedbdpl
