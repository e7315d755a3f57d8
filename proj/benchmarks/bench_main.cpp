#include <benchmark/benchmark.h>

#include "diffad/metrics.hpp"
#include "diffad/mixture.hpp"
#include "diffad/net.hpp"
#include "diffad/rng.hpp"
#include "diffad/sampler.hpp"
#include "diffad/schedule.hpp"
#include "diffad/scoring.hpp"

using namespace diffad;

namespace {

ArchetypeMixture bench_mixture(int K, size_t dim, size_t d_e) {
    ArchetypeMixture mix;
    mix.K = K;
    mix.kappa = 12.0;
    Rng rng(12345);
    for (int k = 0; k < K; ++k) {
        mix.pi.push_back(1.0 / K);
        Latent mu(dim);
        for (auto& x : mu) x = 3.0 * rng.normal();
        mix.mu.push_back(std::move(mu));
        mix.sigma2.emplace_back(dim, 1.0);
        std::vector<double> e(d_e);
        double n2 = 0.0;
        for (auto& x : e) {
            x = rng.normal();
            n2 += x * x;
        }
        for (auto& x : e) x /= std::sqrt(n2);
        mix.archetype_emb.push_back(std::move(e));
    }
    return mix;
}

void bm_analytic_eps(benchmark::State& state) {
    const NoiseSchedule sched = build_schedule(1000, 1e-4, 0.02);
    const ArchetypeMixture mix = bench_mixture(4, 8, 16);
    Rng rng(99);
    Latent z(8);
    for (auto& x : z) x = rng.normal();
    ConditionEmbedding c;
    c.values.resize(16);
    for (auto& x : c.values) x = rng.normal();
    int t = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(analytic_eps(z, t, c, mix, sched));
        t = t % 1000 + 1;
    }
}
BENCHMARK(bm_analytic_eps);

void bm_net_forward(benchmark::State& state) {
    const int dim = 8, d_e = 16;
    Rng rng(7);
    const DenoiserNet net = make_net(dim, d_e, 16, 128, 1000, rng);
    Latent z(dim);
    for (auto& x : z) x = rng.normal();
    ConditionEmbedding c;
    c.values.resize(d_e);
    for (auto& x : c.values) x = rng.normal();
    int t = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(net_forward(net, z, t, c));
        t = t % 1000 + 1;
    }
}
BENCHMARK(bm_net_forward);

void bm_reconstruct(benchmark::State& state) {
    const NoiseSchedule sched = build_schedule(1000, 1e-4, 0.02);
    const ArchetypeMixture mix = bench_mixture(4, 8, 16);
    const EpsFn eps = [&](const Latent& z_t, int t, const ConditionEmbedding& c) {
        return analytic_eps(z_t, t, c, mix, sched);
    };
    const ConditionEmbedding c = null_condition(16);
    Rng rng(11);
    const Latent z0 = mix.mu[0];
    for (auto _ : state) {
        benchmark::DoNotOptimize(reconstruct(z0, 674, c, eps, sched, 100, rng));
    }
}
BENCHMARK(bm_reconstruct);

void bm_auc(benchmark::State& state) {
    Rng rng(3);
    std::vector<double> pos(2000), neg(8000);
    for (auto& x : pos) x = rng.normal() + 1.0;
    for (auto& x : neg) x = rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(auc(pos, neg));
    }
}
BENCHMARK(bm_auc);

void bm_erode(benchmark::State& state) {
    Rng rng(5);
    ScoreMap map;
    map.height = 32;
    map.width = 32;
    map.stage = MapStage::z;
    map.values.resize(1024);
    for (auto& v : map.values) v = rng.normal();
    for (auto _ : state) {
        benchmark::DoNotOptimize(erode(map));
    }
}
BENCHMARK(bm_erode);

}  // namespace

BENCHMARK_MAIN();
