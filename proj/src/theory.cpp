#include "fedbdpl/theory.hpp"

#include <algorithm>

namespace fedbdpl {

double smoothness_L(const TheoryParams& p) {
    p.validate();
    return p.prompt_length * p.loss_bound * p.vocab_size * (p.tau + 1.0) /
           (p.tau * p.tau * p.nu * p.nu);
}

double sigma_alpha_sq(const TheoryParams& p) {
    p.validate();
    return 8.0 * p.loss_bound * p.loss_bound * p.vocab_size / (p.tau * p.tau * p.nu * p.nu);
}

double convergence_bound(const TheoryParams& p, double iterations, bool tight,
                         std::optional<double> sigma_alpha_sq_override) {
    p.validate();
    if (iterations <= 0.0) throw ConfigError("iterations must be > 0");
    const double L = smoothness_L(p);
    const double eta_max = std::min(1.0 / (L * p.heterogeneity_bound), 1.0 / L);
    if (p.learning_rate >= eta_max)
        throw BoundInapplicableError("learning rate must be < min{1/(L*lambda), 1/L}");

    const double n = p.prompt_length, E = p.local_epochs;
    const double s_psi = p.sigma_psi_sq;
    const double s_a = sigma_alpha_sq_override.value_or(sigma_alpha_sq(p));
    const double k_factor = 1.0 + 1.0 / p.active_clients;
    const double first = 4.0 * p.loss_bound / (p.learning_rate * iterations);
    if (tight) {
        const double le = L * p.learning_rate;
        return first +
               (2.0 * (E + 1.0) * le * le * n * s_psi * k_factor + 2.0 * n * le * s_psi) /
                   p.batch_size +
               (2.0 * (E + 1.0) * le * le * n * s_a * k_factor + 2.0 * n * le * s_a) /
                   (p.prompt_samples * p.prompt_samples);
    }
    return first +
           (2.0 * (E + 1.0) * n * s_psi * k_factor + 2.0 * n * s_psi) / p.batch_size +
           (2.0 * (E + 1.0) * n * s_a * k_factor + 2.0 * n * s_a) /
               (p.prompt_samples * p.prompt_samples);
}

QueryCostBreakdown query_cost(const TheoryParams& p, double active_clients) {
    p.validate();
    if (active_clients <= 0.0) throw ConfigError("K* must be > 0");
    const double n = p.prompt_length, E = p.local_epochs;
    const double s_psi = p.sigma_psi_sq, s_a = sigma_alpha_sq(p);
    const double eps_sq = p.epsilon * p.epsilon;
    QueryCostBreakdown out;
    out.c1 = (4.0 * p.loss_bound + 2.0 * (E + 2.0) * n * s_psi + 2.0 * (E + 2.0) * n * s_a) /
             eps_sq;
    out.c2 = (2.0 * (E + 1.0) * n * s_psi + 2.0 * (E + 1.0) * n * s_a) / eps_sq;
    out.k_opt = out.c2 / out.c1;
    const double root = std::sqrt(active_clients);
    const double bracket = out.c1 * root + out.c2 / root;
    out.queries = p.queries_per_iter * bracket * bracket;
    return out;
}

double min_iterations(const TheoryParams& p) {
    p.validate();
    const double n = p.prompt_length, E = p.local_epochs;
    const double s_psi = p.sigma_psi_sq, s_a = sigma_alpha_sq(p);
    const double eps_sq = p.epsilon * p.epsilon;
    const double k_factor = 1.0 + 1.0 / p.active_clients;
    const double bracket =
        4.0 * p.loss_bound / eps_sq +
        (2.0 * (E + 1.0) * n * s_psi * k_factor + 2.0 * n * s_psi) / eps_sq +
        (2.0 * (E + 1.0) * n * s_a * k_factor + 2.0 * n * s_a) / eps_sq;
    return bracket * bracket;
}

std::uint64_t min_iterations_ceil(const TheoryParams& p) {
    return static_cast<std::uint64_t>(std::ceil(min_iterations(p)));
}

}  // namespace fedbdpl
