#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedbdpl/rng.hpp"
#include "fedbdpl/theory.hpp"

using namespace fedbdpl;

namespace {

TheoryParams base_params() {
    TheoryParams p;
    p.loss_bound = 1.0;
    p.vocab_size = 1.0;
    p.prompt_length = 1.0;
    p.tau = 1.0;
    p.nu = 1.0;
    p.local_epochs = 1.0;
    p.sigma_psi_sq = 1.0;
    p.heterogeneity_bound = 1.0;
    p.epsilon = 1.0;
    p.queries_per_iter = 1.0;
    p.batch_size = 1.0;
    p.prompt_samples = 1.0;
    p.learning_rate = 1e-4;
    p.active_clients = 1.0;
    return p;
}

TheoryParams random_params(Rng& rng) {
    TheoryParams p;
    p.loss_bound = 0.5 + 2.5 * rng.uniform01();
    p.vocab_size = 1.0 + 9.0 * rng.uniform01();
    p.prompt_length = 1.0 + 5.0 * rng.uniform01();
    p.tau = 0.3 + 1.7 * rng.uniform01();
    p.nu = 0.05 + 0.95 * rng.uniform01();
    p.local_epochs = 1.0 + 3.0 * rng.uniform01();
    p.sigma_psi_sq = 0.1 + 1.9 * rng.uniform01();
    p.heterogeneity_bound = 1.0 + 3.0 * rng.uniform01();
    p.epsilon = 0.3 + 1.7 * rng.uniform01();
    p.queries_per_iter = 1.0 + 4.0 * rng.uniform01();
    p.batch_size = 1.0 + 31.0 * rng.uniform01();
    p.prompt_samples = 2.0 + 14.0 * rng.uniform01();
    p.learning_rate = 1e-6;
    p.active_clients = 1.0 + rng.index(32);
    return p;
}

}  // namespace

TEST_CASE("smoothness constant L = n G N (tau+1) / (tau^2 nu^2)") {
    TheoryParams p = base_params();
    p.prompt_length = 10;
    p.vocab_size = 4;
    p.nu = 0.1;
    CHECK(smoothness_L(p) == doctest::Approx(8000.0).epsilon(1e-12));
    CHECK(smoothness_L(base_params()) == doctest::Approx(2.0).epsilon(1e-12));

    // doubling nu quarters L
    TheoryParams doubled = p;
    doubled.nu = 0.2;
    CHECK(smoothness_L(doubled) == doctest::Approx(smoothness_L(p) / 4.0).epsilon(1e-12));
}

TEST_CASE("policy-gradient variance constant sigma_alpha^2 = 8 G^2 N / (tau^2 nu^2)") {
    TheoryParams p = base_params();
    p.vocab_size = 4;
    p.nu = 0.1;
    CHECK(sigma_alpha_sq(p) == doctest::Approx(3200.0).epsilon(1e-12));
    CHECK(sigma_alpha_sq(base_params()) == doctest::Approx(8.0).epsilon(1e-12));

    // linear in N
    TheoryParams bigger = p;
    bigger.vocab_size = 12;
    CHECK(sigma_alpha_sq(bigger) == doctest::Approx(3.0 * sigma_alpha_sq(p)).epsilon(1e-12));
}

TEST_CASE("convergence bound: full worked substitution") {
    // G=1, eta=1e-4, T=1e4, E=1, n=1, sigma_psi^2=1, sigma_alpha^2=8 (from
    // N=1, tau=1, nu=1), K*=1, B=32, I=4:
    //   4/(1e-4 * 1e4)                    = 4
    //   (2*2*1*1*2 + 2*1*1) / 32          = 10/32  = 0.3125
    //   (2*2*1*8*2 + 2*1*8) / 16          = 80/16  = 5
    TheoryParams p = base_params();
    p.batch_size = 32;
    p.prompt_samples = 4;
    CHECK(sigma_alpha_sq(p) == 8.0);
    CHECK(convergence_bound(p, 1e4) == doctest::Approx(9.3125).epsilon(1e-12));
}

TEST_CASE("convergence bound: only the first term depends on T") {
    TheoryParams p = base_params();
    p.batch_size = 8;
    p.prompt_samples = 4;
    const double at_t = convergence_bound(p, 1000.0);
    const double at_10t = convergence_bound(p, 10000.0);
    const double first_term = 4.0 * p.loss_bound / (p.learning_rate * 1000.0);
    CHECK(at_t - at_10t == doctest::Approx(0.9 * first_term).epsilon(1e-10));
}

TEST_CASE("convergence bound decreases in K*, B and I") {
    Rng rng(71);
    for (int trial = 0; trial < 100; ++trial) {
        TheoryParams p = random_params(rng);
        const double base = convergence_bound(p, 500.0);
        TheoryParams q = p;
        q.active_clients += 1.0;
        CHECK(convergence_bound(q, 500.0) < base);
        q = p;
        q.batch_size *= 2.0;
        CHECK(convergence_bound(q, 500.0) < base);
        q = p;
        q.prompt_samples *= 2.0;
        CHECK(convergence_bound(q, 500.0) < base);
    }
}

TEST_CASE("convergence bound rejects learning rates that break smoothness descent") {
    TheoryParams p = base_params();  // L = 2, 1/L = 0.5
    p.learning_rate = 0.5;
    CHECK_THROWS_AS(convergence_bound(p, 100.0), BoundInapplicableError);
    p.learning_rate = 0.2;
    CHECK_NOTHROW(convergence_bound(p, 100.0));
    p.heterogeneity_bound = 4.0;  // 1/(L*lambda) = 0.125
    CHECK_THROWS_AS(convergence_bound(p, 100.0), BoundInapplicableError);
    CHECK_THROWS_AS(convergence_bound(base_params(), 0.0), ConfigError);
}

TEST_CASE("tight pre-simplified bound never exceeds the published form") {
    Rng rng(72);
    for (int trial = 0; trial < 200; ++trial) {
        TheoryParams p = random_params(rng);
        const double published = convergence_bound(p, 300.0, false);
        const double tight = convergence_bound(p, 300.0, true);
        CHECK(tight <= published);
        CHECK(tight > 4.0 * p.loss_bound / (p.learning_rate * 300.0));  // keeps the T term
    }
}

TEST_CASE("convergence bound accepts a measured variance override") {
    TheoryParams p = base_params();
    p.batch_size = 32;
    p.prompt_samples = 4;
    // replacing sigma_alpha^2 = 8 with a measured 2 shrinks only the third term
    const double with_measured = convergence_bound(p, 1e4, false, 2.0);
    CHECK(with_measured == doctest::Approx(4.0 + 0.3125 + 20.0 / 16.0).epsilon(1e-12));
    CHECK(with_measured < convergence_bound(p, 1e4));
}

TEST_CASE("query cost: worked example c1 = 16, c2 = 8, K_opt = 1/2") {
    TheoryParams p = base_params();
    p.nu = std::sqrt(8.0);  // sigma_alpha^2 = 8 * 1 * 1 / 8 = 1
    CHECK(sigma_alpha_sq(p) == doctest::Approx(1.0).epsilon(1e-12));
    const QueryCostBreakdown q1 = query_cost(p, 1.0);
    CHECK(q1.c1 == doctest::Approx(16.0).epsilon(1e-12));
    CHECK(q1.c2 == doctest::Approx(8.0).epsilon(1e-12));
    CHECK(q1.k_opt == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(q1.queries == doctest::Approx(576.0).epsilon(1e-12));
    CHECK(q1.queries_ceil() == 576);
    CHECK(query_cost(p, 2.0).queries == doctest::Approx(800.0).epsilon(1e-12));
    CHECK_THROWS_AS(query_cost(p, 0.0), ConfigError);
}

TEST_CASE("K_opt stays below 1 for every positive parameter set") {
    Rng rng(73);
    for (int trial = 0; trial < 10000; ++trial) {
        const QueryCostBreakdown q = query_cost(random_params(rng), 1.0);
        CHECK(q.k_opt < 1.0);
    }
}

TEST_CASE("query cost is strictly increasing over integer K*") {
    // worked-example parameters, K* = 1..100
    TheoryParams p = base_params();
    p.nu = std::sqrt(8.0);
    for (int k = 1; k < 100; ++k)
        CHECK(query_cost(p, k).queries < query_cost(p, k + 1).queries);
    // and across random parameter draws for K* = 1..999
    Rng rng(74);
    for (int trial = 0; trial < 20; ++trial) {
        TheoryParams r = random_params(rng);
        double prev = query_cost(r, 1.0).queries;
        for (int k = 2; k <= 1000; ++k) {
            const double cur = query_cost(r, k).queries;
            CHECK(cur > prev);
            prev = cur;
        }
    }
}

TEST_CASE("minimum iterations: worked example and the cost identity") {
    TheoryParams p = base_params();
    p.nu = std::sqrt(8.0);  // sigma_alpha^2 = 1
    p.active_clients = 1.0;
    // bracket = 4 + (2*2*1*1*2 + 2)/1 + (2*2*1*1*2 + 2)/1 = 24 -> T_eps = 576
    CHECK(min_iterations(p) == doctest::Approx(576.0).epsilon(1e-12));
    CHECK(min_iterations_ceil(p) == 576);

    // c * T_eps * K* == Q(K*) across random parameter draws
    Rng rng(75);
    for (int trial = 0; trial < 10000; ++trial) {
        TheoryParams r = random_params(rng);
        const double q = query_cost(r, r.active_clients).queries;
        const double lhs = r.queries_per_iter * min_iterations(r) * r.active_clients;
        CHECK(std::abs(lhs - q) <= 1e-9 * q);
    }
}

TEST_CASE("minimum iterations scaling laws") {
    TheoryParams p = base_params();
    p.nu = std::sqrt(8.0);
    // more active clients means fewer iterations (the (1+1/K*) factor)
    TheoryParams more = p;
    more.active_clients = 4.0;
    CHECK(min_iterations(more) < min_iterations(p));
    // halving epsilon costs 16x iterations
    TheoryParams tighter = p;
    tighter.epsilon = 0.5;
    CHECK(min_iterations(tighter) == doctest::Approx(16.0 * min_iterations(p)).epsilon(1e-12));
}

TEST_CASE("theory parameter validation") {
    for (auto mutate : std::vector<void (*)(TheoryParams&)>{
             [](TheoryParams& p) { p.loss_bound = 0.0; },
             [](TheoryParams& p) { p.vocab_size = -1.0; },
             [](TheoryParams& p) { p.tau = 0.0; },
             [](TheoryParams& p) { p.nu = 0.0; },
             [](TheoryParams& p) { p.epsilon = 0.0; },
             [](TheoryParams& p) { p.active_clients = 0.5; },
             [](TheoryParams& p) { p.learning_rate = 0.0; }}) {
        TheoryParams p = base_params();
        mutate(p);
        CHECK_THROWS_AS(p.validate(), ConfigError);
    }
}
