// Serial-vs-OpenMP timing for the two data-parallel kernels: exhaustive
// policy-gradient enumeration and per-round multi-client training.
#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "fedbdpl/federation.hpp"
#include "fedbdpl/optimizer.hpp"

using namespace fedbdpl;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void bench_enumeration() {
    const std::size_t n = 6, N = 10;  // 10^6 sequences
    Rng rng(7);
    Matrix alpha(n, N);
    for (double& v : alpha.flat()) v = 0.05 + rng.uniform01();
    PromptDistribution dist(alpha, 1.0, 0.01);
    const GumbelNoise noise = sample_gumbel(n, N, rng);
    PromptSequence target(n, 3);
    auto loss = [&](const PromptSequence& seq) {
        std::size_t miss = 0;
        for (std::size_t i = 0; i < n; ++i) miss += seq[i] != target[i];
        return static_cast<double>(miss) / static_cast<double>(n);
    };

    auto t0 = std::chrono::steady_clock::now();
    Matrix serial = exact_policy_gradient(dist, noise, loss, ExecPolicy::Serial);
    const double ts = seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    Matrix parallel = exact_policy_gradient(dist, noise, loss, ExecPolicy::Parallel);
    const double tp = seconds_since(t0);

    std::printf("exact_policy_gradient %zux%zu: serial %.3fs  parallel %.3fs  speedup %.2fx  "
                "max|diff| %.2e\n",
                n, N, ts, tp, ts / tp, max_abs_diff(serial, parallel));
}

void bench_round() {
    const std::size_t n = 8, N = 12;
    const int K = 32;
    std::vector<Example> dataset(640);
    for (int m = 0; m < 640; ++m) dataset[static_cast<std::size_t>(m)] = {m, m % 4};
    auto shards = partition_even(dataset, K);

    PromptSequence target(n, 1);
    HiddenPromptOracle oracle_serial(target, N, 1.0, 0.0);
    HiddenPromptOracle oracle_parallel(target, N, 1.0, 0.0);

    FederationConfig cfg;
    cfg.num_clients = K;
    cfg.active_clients = K;
    cfg.rounds = 1;
    cfg.seed = 99;
    cfg.local = {4, 5, 8, 0.05};
    cfg.default_weights(shards);

    GlobalState s1{PromptDistribution::uniform(n, N, 1.0, 0.01), 0};
    auto t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < 8; ++r) run_round(s1, shards, oracle_serial, cfg, ExecPolicy::Serial);
    const double ts = seconds_since(t0);

    GlobalState s2{PromptDistribution::uniform(n, N, 1.0, 0.01), 0};
    t0 = std::chrono::steady_clock::now();
    for (int r = 0; r < 8; ++r) run_round(s2, shards, oracle_parallel, cfg, ExecPolicy::Parallel);
    const double tp = seconds_since(t0);

    std::printf("run_round K=%d, 8 rounds: serial %.3fs  parallel %.3fs  speedup %.2fx  "
                "max|diff| %.2e\n",
                K, ts, tp, ts / tp, max_abs_diff(s1.dist.alpha, s2.dist.alpha));
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("OpenMP threads: %d\n", omp_get_max_threads());
#else
    std::printf("built without OpenMP; parallel policy runs serially\n");
#endif
    bench_enumeration();
    bench_round();
    return 0;
}
