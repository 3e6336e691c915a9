#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "fedbdpl/gs_core.hpp"
#include "test_support.hpp"

using namespace fedbdpl;

TEST_CASE("gumbel transform fixed points") {
    CHECK(gumbel_from_uniform(std::exp(-1.0)) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(gumbel_from_uniform(std::exp(-std::exp(-1.0))) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("gumbel sampling is deterministic given the seed") {
    Rng a(42), b(42);
    const GumbelNoise ga = sample_gumbel(2, 3, a);
    const GumbelNoise gb = sample_gumbel(2, 3, b);
    CHECK(ga == gb);
    for (double v : ga.flat()) CHECK(std::isfinite(v));
}

TEST_CASE("gumbel sampling rejects degenerate shapes") {
    Rng rng(1);
    CHECK_THROWS_AS(sample_gumbel(0, 3, rng), ConfigError);
    CHECK_THROWS_AS(sample_gumbel(2, 1, rng), ConfigError);
}

TEST_CASE("distribution construction validates invariants") {
    CHECK_THROWS_AS(PromptDistribution::uniform(2, 4, 0.0, 0.01), ConfigError);
    CHECK_THROWS_AS(PromptDistribution::uniform(2, 4, 1.0, -0.1), ConfigError);
    CHECK_THROWS_AS(PromptDistribution::uniform(0, 4, 1.0, 0.01), ConfigError);
    CHECK_THROWS_AS(PromptDistribution::uniform(2, 1, 1.0, 0.01), ConfigError);
    // entries below the floor are lifted at construction
    Matrix a(1, 2);
    a(0, 0) = 1e-6;
    a(0, 1) = 2.0;
    PromptDistribution d(a, 1.0, 0.01);
    CHECK(d.alpha(0, 0) == 0.01);
    CHECK(d.alpha(0, 1) == 2.0);
}

TEST_CASE("forward: uniform row gives uniform probabilities") {
    for (double tau : {0.25, 1.0, 3.0}) {
        PromptDistribution d = PromptDistribution::uniform(1, 4, tau, 1e-3);
        const ProbMatrix p = forward(d, zero_noise(1, 4));
        for (std::size_t j = 0; j < 4; ++j) CHECK(p(0, j) == doctest::Approx(0.25).epsilon(1e-12));
    }
}

TEST_CASE("forward: two-entry rows match direct softmax evaluation") {
    Matrix a(1, 2);
    a(0, 0) = std::exp(1.0);
    a(0, 1) = 1.0;
    SUBCASE("tau = 1") {
        PromptDistribution d(a, 1.0, 1e-3);
        const ProbMatrix p = forward(d, zero_noise(1, 2));
        CHECK(p(0, 0) == doctest::Approx(0.731059).epsilon(1e-6));
        CHECK(p(0, 1) == doctest::Approx(0.268941).epsilon(1e-6));
    }
    SUBCASE("tau = 0.5 sharpens to logits [2, 0]") {
        PromptDistribution d(a, 0.5, 1e-3);
        const ProbMatrix p = forward(d, zero_noise(1, 2));
        CHECK(p(0, 0) == doctest::Approx(0.880797).epsilon(1e-6));
        CHECK(p(0, 1) == doctest::Approx(0.119203).epsilon(1e-6));
    }
}

TEST_CASE("forward rejects mismatched noise shapes") {
    PromptDistribution d = PromptDistribution::uniform(2, 3, 1.0, 1e-3);
    CHECK_THROWS_AS(forward(d, zero_noise(2, 4)), DimensionError);
}

TEST_CASE("forward rows normalize to 1 within 1e-12") {
    Rng rng(7);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.index(4), N = 2 + rng.index(7);
        const double tau = 0.1 + rng.uniform01() * 3.0;
        PromptDistribution d = testing::random_distribution(n, N, rng, tau);
        const GumbelNoise g = sample_gumbel(n, N, rng);
        const ProbMatrix p = forward(d, g);
        for (std::size_t i = 0; i < n; ++i) {
            double sum = 0.0;
            for (std::size_t j = 0; j < N; ++j) {
                CHECK(p(i, j) > 0.0);
                CHECK(p(i, j) < 1.0);
                sum += p(i, j);
            }
            CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("argmax is invariant under positive row scaling at zero noise") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        PromptDistribution d = testing::random_distribution(3, 5, rng);
        const ProbMatrix p = forward(d, zero_noise(3, 5));
        const double scale = 0.1 + rng.uniform01() * 10.0;
        PromptDistribution scaled = d;
        for (double& v : scaled.alpha.row(1)) v *= scale;
        const ProbMatrix q = forward(scaled, zero_noise(3, 5));
        auto argmax = [](std::span<const double> row) {
            return std::distance(row.begin(), std::max_element(row.begin(), row.end()));
        };
        CHECK(argmax(p.row(1)) == argmax(q.row(1)));
    }
}

TEST_CASE("prompt sampling follows degenerate rows and replays") {
    Matrix p(2, 3, 0.0);
    p(0, 0) = 1.0;  // -> index 0
    p(1, 2) = 1.0;  // -> index 2
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const PromptSequence seq = sample_prompt(p, rng);
        CHECK(seq[0] == 0);
        CHECK(seq[1] == 2);
    }
    PromptDistribution d = PromptDistribution::uniform(3, 4, 1.0, 1e-3);
    const ProbMatrix q = forward(d, zero_noise(3, 4));
    Rng a(99), b(99);
    CHECK(sample_prompt(q, a) == sample_prompt(q, b));
}

TEST_CASE("log_prob_grad closed form on hand cases") {
    SUBCASE("symmetric two-entry row") {
        PromptDistribution d(Matrix(1, 2, 1.0), 1.0, 1e-3);
        const ProbMatrix p = forward(d, zero_noise(1, 2));
        const Matrix g = log_prob_grad(p, d, {0});
        CHECK(g(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(g(0, 1) == doctest::Approx(-0.5).epsilon(1e-12));
    }
    SUBCASE("saturated row has zero gradient") {
        Matrix p(1, 2, 0.0);
        p(0, 0) = 1.0;
        PromptDistribution d(Matrix(1, 2, 1.0), 1.0, 1e-3);
        const Matrix g = log_prob_grad(p, d, {0});
        CHECK(g(0, 0) == 0.0);
        CHECK(g(0, 1) == 0.0);
    }
}

TEST_CASE("log_prob_grad matches finite differences with fixed noise") {
    // the e-vs-1 hand case first
    Matrix a(1, 2);
    a(0, 0) = std::exp(1.0);
    a(0, 1) = 1.0;
    PromptDistribution d(a, 1.0, 1e-3);
    const GumbelNoise z = zero_noise(1, 2);
    const Matrix got = log_prob_grad(forward(d, z), d, {0});
    const Matrix want = testing::finite_diff_log_prob_grad(d, z, {0});
    CHECK(testing::max_rel_err(got, want) < 1e-5);

    // then 100 random instances, n <= 4, N <= 8
    Rng rng(123);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t n = 1 + rng.index(4), N = 2 + rng.index(7);
        PromptDistribution dist = testing::random_distribution(n, N, rng,
                                                               0.5 + rng.uniform01() * 2.0);
        const GumbelNoise noise = sample_gumbel(n, N, rng);
        const ProbMatrix p = forward(dist, noise);
        const PromptSequence prompt = sample_prompt(p, rng);
        const Matrix analytic = log_prob_grad(p, dist, prompt);
        const Matrix fd = testing::finite_diff_log_prob_grad(dist, noise, prompt);
        CHECK(testing::max_rel_err(analytic, fd) < 1e-5);
    }
}

TEST_CASE("log_prob_grad row sums reconcile with the closed form") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        PromptDistribution d = testing::random_distribution(2, 5, rng);
        const ProbMatrix p = forward(d, sample_gumbel(2, 5, rng));
        const PromptSequence prompt = sample_prompt(p, rng);
        const Matrix g = log_prob_grad(p, d, prompt);
        for (std::size_t i = 0; i < 2; ++i) {
            double stored = 0.0;
            for (std::size_t j = 0; j < 5; ++j) stored += g(i, j);
            const int ji = prompt[i];
            double recomputed = (1.0 - p(i, ji)) / (d.tau * d.alpha(i, ji));
            for (std::size_t j = 0; j < 5; ++j)
                if (static_cast<int>(j) != ji) recomputed -= p(i, j) / (d.tau * d.alpha(i, j));
            CHECK(stored == doctest::Approx(recomputed).epsilon(1e-12));
        }
    }
}

TEST_CASE("project_alpha clamps and is idempotent") {
    Matrix a(1, 2);
    a(0, 0) = 0.001;
    a(0, 1) = 2.0;
    PromptDistribution d(a, 1.0, 0.01);  // construction already projects
    CHECK(d.alpha(0, 0) == 0.01);
    d.alpha(0, 0) = -0.5;
    project_alpha(d);
    CHECK(d.alpha(0, 0) == 0.01);
    CHECK(d.alpha(0, 1) == 2.0);
    const Matrix before = d.alpha;
    project_alpha(d);
    CHECK(d.alpha == before);
}
