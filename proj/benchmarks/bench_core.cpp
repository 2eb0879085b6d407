#include <benchmark/benchmark.h>

#include <random>

#include "symplan/embedder.hpp"
#include "symplan/executor.hpp"
#include "symplan/imulabel.hpp"
#include "symplan/metrics.hpp"
#include "symplan/nn.hpp"
#include "symplan/seqmodel.hpp"

using namespace symplan;

static void BM_LstmStep(benchmark::State& state) {
  const int hidden = static_cast<int>(state.range(0));
  const int batch = static_cast<int>(state.range(1));
  std::mt19937_64 rng(1);
  const auto p = nn::LstmParams::initialize(kEmbeddingDim, hidden, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(kEmbeddingDim, batch);
  const Eigen::MatrixXd h = Eigen::MatrixXd::Zero(hidden, batch);
  for (auto _ : state) benchmark::DoNotOptimize(nn::lstm_step(p, x, h, h));
}
BENCHMARK(BM_LstmStep)->Args({64, 1})->Args({64, 32})->Args({256, 32});

static void BM_ClassifierEmbed(benchmark::State& state) {
  const auto clf = FrameClassifier::initialize(kObservationDim, 64, kEmbeddingDim, 12, 1);
  const Eigen::MatrixXd obs = Eigen::MatrixXd::Random(kObservationDim, state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(embed_batch(clf, obs));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ClassifierEmbed)->Arg(1)->Arg(256);

static void BM_PredictNext(benchmark::State& state) {
  SequenceModel m;
  m.kind = ModelKind::seq2seq;
  m.sl = 20;
  m.net = Seq2SeqModel::initialize(kEmbeddingDim, 64, 12, 1);
  m.alphabet = "manipulation";
  const Eigen::MatrixXd history = Eigen::MatrixXd::Random(kEmbeddingDim, 20);
  for (auto _ : state) benchmark::DoNotOptimize(predict_next(m, history, 1));
}
BENCHMARK(BM_PredictNext);

static void BM_OracleEpisode(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto initial = sample_initial_state(TaskId::abcdef, rng);
  long ticks = 0;
  for (auto _ : state) {
    const auto o = run_episode(TaskId::abcdef, initial, std::make_unique<OraclePolicy>(), {}, {});
    ticks += o.ticks;
  }
  state.counters["ticks/s"] = benchmark::Counter(static_cast<double>(ticks), benchmark::Counter::kIsRate);
}
BENCHMARK(BM_OracleEpisode)->Unit(benchmark::kMillisecond);

static void BM_Levenshtein(benchmark::State& state) {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> d(0, 11);
  SymbolSequence a(static_cast<std::size_t>(state.range(0))), b(a.size());
  for (auto& x : a) x = d(rng);
  for (auto& x : b) x = d(rng);
  for (auto _ : state) benchmark::DoNotOptimize(levenshtein(a, b));
}
BENCHMARK(BM_Levenshtein)->Arg(12)->Arg(400);

static void BM_Fuse(benchmark::State& state) {
  std::vector<ImuSample> s;
  for (int i = 0; i < 1000; ++i) s.push_back({i / 100.0, {0.1, 0.0, 9.81}, {0.0, 0.0, 0.3}});
  for (auto _ : state) benchmark::DoNotOptimize(fuse(s));
  state.SetItemsProcessed(state.iterations() * 1000);
}
BENCHMARK(BM_Fuse);
BENCHMARK_MAIN();
