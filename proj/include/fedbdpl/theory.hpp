#pragma once

#include <cmath>
#include <cstdint>
#include <optional>

#include "fedbdpl/common.hpp"

namespace fedbdpl {

// Constants of the convergence and query-cost analysis. sigma_psi_sq and
// heterogeneity_bound are properties of the data distribution supplied by the
// user (the empirical gradient-diversity estimate can stand in for the latter).
struct TheoryParams {
    double loss_bound = 1.0;          // G
    double vocab_size = 2.0;          // N
    double prompt_length = 1.0;       // n
    double tau = 1.0;
    double nu = 1.0;
    double local_epochs = 1.0;        // E
    double sigma_psi_sq = 1.0;        // data-gradient variance
    double heterogeneity_bound = 1.0; // lambda
    double epsilon = 1.0;             // target accuracy
    double queries_per_iter = 1.0;    // c, queries per iteration per client
    double batch_size = 1.0;          // B
    double prompt_samples = 1.0;      // I
    double learning_rate = 1.0;       // eta
    double active_clients = 1.0;      // K*

    void validate() const {
        if (loss_bound <= 0 || vocab_size <= 0 || prompt_length <= 0 || tau <= 0 || nu <= 0 ||
            local_epochs <= 0 || sigma_psi_sq <= 0 || heterogeneity_bound <= 0 || epsilon <= 0 ||
            queries_per_iter <= 0 || batch_size <= 0 || prompt_samples <= 0 ||
            learning_rate <= 0 || active_clients < 1)
            throw ConfigError("theory parameters must be strictly positive (K* >= 1)");
    }
};

struct QueryCostBreakdown {
    double c1 = 0.0;
    double c2 = 0.0;
    double k_opt = 0.0;  // c2/c1, always < 1
    double queries = 0.0;
    std::uint64_t queries_ceil() const { return static_cast<std::uint64_t>(std::ceil(queries)); }
};

// L = n G N (tau + 1) / (tau^2 nu^2)
double smoothness_L(const TheoryParams& p);

// sigma_alpha^2 = 8 G^2 N / (tau^2 nu^2)
double sigma_alpha_sq(const TheoryParams& p);

// Averaged-squared-gradient bound after T iterations:
//   4G/(eta T) + [2(E+1) n s_psi (1 + 1/K*) + 2 n s_psi] / B
//             + [2(E+1) n s_a   (1 + 1/K*) + 2 n s_a  ] / I^2
// Requires eta < min{1/(L lambda), 1/L}. With tight=true the pre-simplified
// form is returned, keeping the L*eta factors the published bound drops.
// sigma_alpha_sq_override substitutes a measured estimate for the closed-form
// policy-gradient variance constant.
double convergence_bound(const TheoryParams& p, double iterations, bool tight = false,
                         std::optional<double> sigma_alpha_sq_override = std::nullopt);

// Q(K*) = c [c1 sqrt(K*) + c2 / sqrt(K*)]^2 with
//   c1 = (4G + 2(E+2) n s_psi + 2(E+2) n s_a) / eps^2
//   c2 = (2(E+1) n s_psi + 2(E+1) n s_a) / eps^2
QueryCostBreakdown query_cost(const TheoryParams& p, double active_clients);

// T_eps = [4G/eps^2 + (2(E+1) n s_psi (1+1/K*) + 2 n s_psi)/eps^2
//                  + (2(E+1) n s_a  (1+1/K*) + 2 n s_a )/eps^2]^2
// Satisfies c * T_eps * K* == query_cost(p, K*).queries.
double min_iterations(const TheoryParams& p);
std::uint64_t min_iterations_ceil(const TheoryParams& p);

}  // namespace fedbdpl
