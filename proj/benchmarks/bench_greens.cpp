// Scaling benchmarks: the layer recursion is linear in depth while the dense
// inverse of the assembled matrix is cubic in total size.

#include <benchmark/benchmark.h>

#include <random>

#include "fnn/backprop.hpp"
#include "fnn/greens.hpp"
#include "fnn/model.hpp"

namespace {

using namespace fnn;

struct Bench {
  FnnParameters params;
  InputEncoding input;
  LayeredSystem system;
};

Bench make_bench(Eigen::Index width, Eigen::Index depth) {
  ArchitectureSpec spec;
  spec.input_size = width;
  spec.layer_sizes.assign(depth, width);
  spec.intra_connectivity.assign(depth, IntraConnectivity::full);
  spec.inter_connectivity.assign(depth, InterConnectivity::full);

  Bench b;
  b.params = init_parameters(spec, 42);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatC h0(width, width);
  for (Eigen::Index i = 0; i < width; ++i)
    for (Eigen::Index j = 0; j < width; ++j) h0(i, j) = cxd(gauss(rng), gauss(rng));
  b.input = InputEncoding::onsite_dense(hermitize(h0));
  b.system = assemble(b.params, b.input);
  return b;
}

const EvaluationPoint kPoint = EvaluationPoint::retarded(0.1, 0.05);

void BM_recursive_forward(benchmark::State& state) {
  const Bench b = make_bench(32, state.range(0));
  for (auto _ : state) {
    const RecursionCache cache = recursive_forward(b.system, kPoint);
    benchmark::DoNotOptimize(cache.diag_blocks.back().data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_recursive_forward_no_corner(benchmark::State& state) {
  const Bench b = make_bench(32, state.range(0));
  for (auto _ : state) {
    const RecursionCache cache = recursive_forward(b.system, kPoint, false);
    benchmark::DoNotOptimize(cache.diag_blocks.back().data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_direct_inverse(benchmark::State& state) {
  const Bench b = make_bench(32, state.range(0));
  for (auto _ : state) {
    const MatC g = direct_greens(b.system, kPoint, 4096);
    benchmark::DoNotOptimize(g.data());
  }
  state.SetComplexityN(state.range(0));
}

void BM_ldos_backward(benchmark::State& state) {
  const Bench b = make_bench(32, state.range(0));
  const VecR loss_grad = VecR::Ones(32);
  for (auto _ : state) {
    const RecursionCache cache = recursive_forward(b.system, kPoint);
    GradientSet grads = ldos_gradients(cache, loss_grad);
    apply_masks(grads, b.params);
    benchmark::DoNotOptimize(grads.d_inter.back().data());
  }
  state.SetComplexityN(state.range(0));
}

}  // namespace

BENCHMARK(BM_recursive_forward)->DenseRange(2, 10, 2)->Arg(16)->Arg(24)->Complexity();
BENCHMARK(BM_recursive_forward_no_corner)->DenseRange(2, 10, 2)->Arg(16)->Arg(24)->Complexity();
BENCHMARK(BM_direct_inverse)->DenseRange(2, 10, 2)->Arg(16)->Arg(24)->Complexity();
BENCHMARK(BM_ldos_backward)->DenseRange(2, 10, 2)->Arg(16)->Arg(24)->Complexity();

BENCHMARK_MAIN();
