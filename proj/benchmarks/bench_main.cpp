#include "hbmi/datasets.hpp"
#include "hbmi/decoder.hpp"
#include "hbmi/likelihoods.hpp"
#include "hbmi/pipeline.hpp"
#include "hbmi/signals.hpp"
#include "hbmi/spatial_filters.hpp"
#include "hbmi/synergies.hpp"
#include "random_model.hpp"

#include <benchmark/benchmark.h>

using namespace hbmi;

static void BM_KdeLogpdf(benchmark::State& state) {
  std::mt19937_64 rng(1);
  const auto n = static_cast<Eigen::Index>(state.range(0));
  const KdeModel kde = kde_fit(testkit::random_matrix(rng, n, 12));
  const Eigen::VectorXd x = testkit::random_matrix(rng, 12, 1);
  for (auto _ : state) benchmark::DoNotOptimize(kde.logpdf(x));
  state.SetItemsProcessed(state.iterations() * n);
}
BENCHMARK(BM_KdeLogpdf)->Arg(64)->Arg(512)->Arg(4096);

static void BM_MapDecode(benchmark::State& state) {
  std::mt19937_64 rng(2);
  const HierarchyModel m = testkit::random_hierarchy(rng, static_cast<int>(state.range(0)));
  const WindowFeatures f = testkit::random_features(rng);
  for (auto _ : state) benchmark::DoNotOptimize(map_decode(m, uniform_prior(), f));
}
BENCHMARK(BM_MapDecode)->Arg(16)->Arg(256);

static void BM_ExhaustiveDecode(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const HierarchyModel m = testkit::random_hierarchy(rng, 16);
  const WindowFeatures f = testkit::random_features(rng);
  for (auto _ : state) benchmark::DoNotOptimize(exhaustive_decode(m, uniform_prior(), f));
}
BENCHMARK(BM_ExhaustiveDecode);

static void BM_SolveCsp(benchmark::State& state) {
  std::mt19937_64 rng(4);
  ClassCovariance a, b;
  a.sigma = testkit::random_spd(rng, 19);
  b.sigma = testkit::random_spd(rng, 19);
  for (auto _ : state) benchmark::DoNotOptimize(solve_csp(a, b));
}
BENCHMARK(BM_SolveCsp);

static void BM_NmfFit(benchmark::State& state) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd v = testkit::random_uniform(rng, 6, state.range(0), 0.0, 1.0);
  NmfOptions o;
  o.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(nmf_fit(v, o));
}
BENCHMARK(BM_NmfFit)->Arg(1600)->Unit(benchmark::kMillisecond);

static void BM_NmfTransform(benchmark::State& state) {
  std::mt19937_64 rng(6);
  NmfOptions o;
  o.seed = 1;
  const NmfModel m = nmf_fit(testkit::random_uniform(rng, 6, 200, 0.0, 1.0), o).model;
  const Eigen::VectorXd r = testkit::random_uniform(rng, 6, 1, 0.0, 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(nmf_transform(m, r));
}
BENCHMARK(BM_NmfTransform);

static void BM_Sosfiltfilt(benchmark::State& state) {
  std::mt19937_64 rng(7);
  const SosFilter sos = design_filter(FilterSpec::bandpass(4, 20.0, 500.0), 1200.0);
  const Eigen::RowVectorXd x = testkit::random_matrix(rng, 1, 6000);
  for (auto _ : state) benchmark::DoNotOptimize(sosfiltfilt(sos, x));
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Sosfiltfilt);

static void BM_PreprocessTrial(benchmark::State& state) {
  SynthConfig c;
  c.n_sessions = 1;
  c.n_blocks = 1;
  c.n_trials_per_block = 1;
  const SyntheticDataset d(c);
  const TrialRecording t = d.load(0);
  const PipelineConfig p;
  for (auto _ : state) benchmark::DoNotOptimize(preprocess_trial(t, p));
}
BENCHMARK(BM_PreprocessTrial)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
