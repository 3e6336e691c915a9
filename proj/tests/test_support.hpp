#pragma once

// Test-only oracles independent of the library's gradient implementations:
// central finite differences and exhaustive enumeration helpers.

#include <cmath>
#include <functional>

#include "fedbdpl/enumerate.hpp"
#include "fedbdpl/gs_core.hpp"

namespace fedbdpl::testing {

// d log p[i][prompt[i]] / d alpha[i][j] by central differences with the
// Gumbel noise held fixed.
inline Matrix finite_diff_log_prob_grad(const PromptDistribution& dist, const GumbelNoise& noise,
                                        const PromptSequence& prompt, double step = 1e-6) {
    Matrix grad(dist.length(), dist.vocab());
    for (std::size_t i = 0; i < dist.length(); ++i) {
        for (std::size_t j = 0; j < dist.vocab(); ++j) {
            PromptDistribution plus = dist, minus = dist;
            plus.alpha(i, j) += step;
            minus.alpha(i, j) -= step;
            const double lp_plus = std::log(forward(plus, noise)(i, prompt[i]));
            const double lp_minus = std::log(forward(minus, noise)(i, prompt[i]));
            grad(i, j) = (lp_plus - lp_minus) / (2.0 * step);
        }
    }
    return grad;
}

// d E[loss] / d alpha by central differences over the enumerated expectation,
// noise fixed. Independent of the score-function route.
inline Matrix finite_diff_expected_loss_grad(const PromptDistribution& dist,
                                             const GumbelNoise& noise,
                                             const std::function<double(const PromptSequence&)>& loss_fn,
                                             double step = 1e-6) {
    auto expected = [&](const PromptDistribution& d) {
        const ProbMatrix p = forward(d, noise);
        double acc = 0.0;
        for_each_prompt(p, [&](const PromptSequence& seq, double prob) {
            acc += prob * loss_fn(seq);
        });
        return acc;
    };
    Matrix grad(dist.length(), dist.vocab());
    for (std::size_t i = 0; i < dist.length(); ++i) {
        for (std::size_t j = 0; j < dist.vocab(); ++j) {
            PromptDistribution plus = dist, minus = dist;
            plus.alpha(i, j) += step;
            minus.alpha(i, j) -= step;
            grad(i, j) = (expected(plus) - expected(minus)) / (2.0 * step);
        }
    }
    return grad;
}

// Worst elementwise relative error; entries far below the matrix scale are
// compared against that scale so FD roundoff on near-zero entries does not
// masquerade as gradient error.
inline double max_rel_err(const Matrix& got, const Matrix& want) {
    double scale = 1e-8;
    for (double v : want.flat()) scale = std::max(scale, std::abs(v));
    const double floor = 1e-3 * scale;
    double worst = 0.0;
    for (std::size_t i = 0; i < got.flat().size(); ++i) {
        const double denom = std::max(std::abs(want.flat()[i]), floor);
        worst = std::max(worst, std::abs(got.flat()[i] - want.flat()[i]) / denom);
    }
    return worst;
}

// Random alpha matrix for property tests; entries kept away from zero so
// central differences at step 1e-6 stay inside their accuracy regime.
inline PromptDistribution random_distribution(std::size_t n, std::size_t N, Rng& rng,
                                              double tau = 1.0, double nu = 1e-3) {
    Matrix alpha(n, N);
    for (double& v : alpha.flat()) v = 0.05 + rng.uniform01() * 2.0;
    return PromptDistribution(std::move(alpha), tau, nu);
}

}  // namespace fedbdpl::testing
