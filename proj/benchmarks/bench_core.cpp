#include <benchmark/benchmark.h>

#include "uqlab/attack.hpp"
#include "uqlab/hmc.hpp"
#include "uqlab/metrics.hpp"
#include "uqlab/nn.hpp"

using namespace uqlab;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
    Rng rng(seed);
    return Tensor::randn({r, c}, rng);
}

void BM_matmul(benchmark::State& state) {
    const std::size_t n = static_cast<std::size_t>(state.range(0));
    const Tensor a = random_matrix(n, n, 1), b = random_matrix(n, n, 2);
    for (auto _ : state) {
        Tensor c = matmul_plain(a, b);
        benchmark::DoNotOptimize(c.values.data());
    }
    state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_matmul)->RangeMultiplier(2)->Range(16, 128)->Complexity();

void BM_mlp_forward_backward(benchmark::State& state) {
    const std::size_t batch = static_cast<std::size_t>(state.range(0));
    Rng rng(3);
    Mlp net({2, {20, 20}, 2, 0.0}, rng);
    const Tensor x = random_matrix(batch, 2, 4);
    std::vector<int> labels(batch);
    for (std::size_t i = 0; i < batch; ++i) labels[i] = static_cast<int>(i % 2);
    for (auto _ : state) {
        Tape tape;
        auto fwd = net.forward(tape, x);
        Var loss = cross_entropy_loss(tape, fwd.logits, labels);
        tape.backward(loss);
        benchmark::DoNotOptimize(tape.grad(fwd.param_vars[0]).values.data());
    }
}
BENCHMARK(BM_mlp_forward_backward)->RangeMultiplier(4)->Range(8, 512);

void BM_uncertainty_metrics(benchmark::State& state) {
    const std::size_t members = static_cast<std::size_t>(state.range(0));
    Rng rng(5);
    ProbEnsemble ens(members, 256, 10);
    for (std::size_t m = 0; m < members; ++m) {
        for (std::size_t n = 0; n < 256; ++n) {
            double total = 0.0;
            for (std::size_t c = 0; c < 10; ++c) {
                const double g = -std::log(1.0 - rng.uniform());
                ens.at(m, n, c) = g;
                total += g;
            }
            for (std::size_t c = 0; c < 10; ++c) ens.at(m, n, c) /= total;
        }
    }
    for (auto _ : state) {
        auto ha = aleatoric_entropy(ens);
        auto he = epistemic_entropy(ens);
        auto kl = kl_uncertainty(ens);
        benchmark::DoNotOptimize(ha.data());
        benchmark::DoNotOptimize(he.data());
        benchmark::DoNotOptimize(kl.data());
    }
}
BENCHMARK(BM_uncertainty_metrics)->RangeMultiplier(2)->Range(2, 32);

void BM_pgd_iteration(benchmark::State& state) {
    Rng rng(7);
    Mlp net({2, {20, 20}, 2, 0.0}, rng);
    ProxyModel proxy;
    proxy.spec = net.spec();
    proxy.weights = net.flatten();
    const Tensor x = random_matrix(200, 2, 8);
    std::vector<int> preds(200);
    for (std::size_t i = 0; i < 200; ++i) preds[i] = static_cast<int>(i % 2);
    AttackSpec spec;
    spec.iterations = static_cast<int>(state.range(0));
    for (auto _ : state) {
        AdversarialBatch batch = l2_pgd(proxy, x, preds, spec);
        benchmark::DoNotOptimize(batch.delta.values.data());
    }
}
BENCHMARK(BM_pgd_iteration)->Arg(1)->Arg(10)->Arg(40);

void BM_hmc_leapfrog(benchmark::State& state) {
    const std::size_t dim = static_cast<std::size_t>(state.range(0));
    auto potential = [](const std::vector<double>& q, std::vector<double>& grad) -> double {
        grad = q;
        double u = 0.0;
        for (double v : q) u += 0.5 * v * v;
        return u;
    };
    HmcConfig cfg;
    cfg.warmup = 0;
    cfg.samples = 16;
    cfg.fixed_step = 0.05;
    cfg.fixed_leapfrog = 8;
    for (auto _ : state) {
        auto draws = hmc_sample(potential, dim, cfg);
        benchmark::DoNotOptimize(draws.data());
    }
}
BENCHMARK(BM_hmc_leapfrog)->Arg(16)->Arg(128)->Arg(512);

} // namespace

BENCHMARK_MAIN();
