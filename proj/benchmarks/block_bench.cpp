// Forward-pass timing for the sequence-mixing blocks. The quadratic Kan
// block pools over all 2S-1 simplices per target, the incidence block only
// over incident edges, so their curves separate as S grows.

#include <benchmark/benchmark.h>

#include <cmath>

#include "ketlab/blocks.hpp"
#include "ketlab/neighborhoods.hpp"
#include "ketlab/rng.hpp"

namespace {

using namespace ketlab;

constexpr int kWidth = 32;

Tensor random_matrix(std::int64_t r, std::int64_t c, Rng &rng, double bound) {
    Tensor t(Shape{r, c});
    for (std::int64_t i = 0; i < t.numel(); ++i) t.data()[i] = rng.uniform(-bound, bound);
    return t;
}

struct BenchState {
    Tensor h, v;
    KetQuadParams quad;
    KetIncidenceParams inc;
    TopoCoendParams topo;
    AttentionParams attn;
    SimplexSet set;

    explicit BenchState(int S) {
        Rng rng(7);
        const std::int64_t d = kWidth;
        const double bound = 1.0 / std::sqrt(static_cast<double>(d));
        h = random_matrix(S, d, rng, 1.0);
        v = random_matrix(S, d, rng, 1.0);
        quad.wq = random_matrix(d, d, rng, bound);
        quad.wk = random_matrix(d, d, rng, bound);
        quad.psi = random_matrix(2 * d, d, rng, bound);
        quad.mlp_w1 = random_matrix(d, 2 * d, rng, bound);
        quad.mlp_b1 = Tensor(Shape{2 * d});
        quad.mlp_w2 = random_matrix(2 * d, d, rng, bound);
        quad.mlp_b2 = Tensor(Shape{d});
        quad.ln_g = Tensor::from_data({d}, std::vector<double>(d, 1.0));
        quad.ln_b = Tensor(Shape{d});
        inc.psi = random_matrix(2 * d, d, rng, bound);
        inc.phi = random_matrix(d, d, rng, bound);
        inc.ln_g = Tensor::from_data({d}, std::vector<double>(d, 1.0));
        inc.ln_b = Tensor(Shape{d});
        topo.pi = random_matrix(d, 16, rng, bound);
        topo.wv = random_matrix(d, d, rng, bound);
        topo.ln_g = Tensor::from_data({d}, std::vector<double>(d, 1.0));
        topo.ln_b = Tensor(Shape{d});
        topo.k = 16;
        topo.tau = 1.0;
        attn.wq = random_matrix(d, d, rng, bound);
        attn.wk = random_matrix(d, d, rng, bound);
        attn.wv = random_matrix(d, d, rng, bound);
        attn.wo = random_matrix(d, d, rng, bound);
        attn.heads = 4;
        set = build_edge_simplices(S);
    }
};

void BM_KetQuadraticForward(benchmark::State &state) {
    BenchState bs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(ket_quadratic_block(bs.h, bs.set, bs.v, true, bs.quad));
    state.SetComplexityN(state.range(0));
}

void BM_KetIncidenceForward(benchmark::State &state) {
    BenchState bs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(ket_incidence_block(bs.h, bs.v, false, bs.inc));
    state.SetComplexityN(state.range(0));
}

void BM_TopoCoendForward(benchmark::State &state) {
    BenchState bs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(topocoend_block(bs.h, bs.v, true, bs.topo));
    state.SetComplexityN(state.range(0));
}

void BM_AttentionForward(benchmark::State &state) {
    BenchState bs(static_cast<int>(state.range(0)));
    for (auto _ : state) benchmark::DoNotOptimize(causal_self_attention(bs.h, bs.attn));
    state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_KetQuadraticForward)->RangeMultiplier(2)->Range(128, 1024)->Complexity();
BENCHMARK(BM_KetIncidenceForward)->RangeMultiplier(2)->Range(128, 1024)->Complexity();
BENCHMARK(BM_TopoCoendForward)->RangeMultiplier(2)->Range(128, 1024)->Complexity();
BENCHMARK(BM_AttentionForward)->RangeMultiplier(2)->Range(128, 1024)->Complexity();

BENCHMARK_MAIN();
