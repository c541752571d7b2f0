#include <benchmark/benchmark.h>

#include "vlqa/model.h"
#include "vlqa/synth_data.h"
#include "vlqa/trainer.h"

namespace vlqa {
namespace {

struct Fixture {
  synth::Corpus corpus;
  ModelSpec spec;
  std::vector<EncodedSample> encoded;

  explicit Fixture(FusionMode fusion) {
    synth::GeneratorOptions g;
    g.count = 64;
    g.noise_level = 0.3;
    corpus = synth::Generate(g);
    RunConfig c;
    c.fusion = fusion;
    spec = MakeModelSpec(c, corpus.manifest);
    encoded = EncodeSamples(corpus.samples, corpus.manifest, spec);
  }
};

FusionMode ModeArg(const benchmark::State& state) { return static_cast<FusionMode>(state.range(0)); }

void BM_Forward(benchmark::State& state) {
  const Fixture f(ModeArg(state));
  const Model model = Model::Create(f.spec, 1);
  std::size_t i = 0;
  for (auto _ : state) benchmark::DoNotOptimize(model.Predict(f.encoded[i++ % f.encoded.size()]).ranking.front());
  state.SetLabel(FusionModeName(ModeArg(state)));
}

void BM_ForwardBackward(benchmark::State& state) {
  const Fixture f(ModeArg(state));
  Model model = Model::Create(f.spec, 1);
  std::size_t i = 0;
  for (auto _ : state) {
    Tape tape(&model.params());
    tape.Backward(model.Loss(tape, f.encoded[i++ % f.encoded.size()], 0.2));
  }
  state.SetLabel(FusionModeName(ModeArg(state)));
}

void BM_TrainStep(benchmark::State& state) {
  const Fixture f(FusionMode::kHierarchical);
  Model model = Model::Create(f.spec, 1);
  RunConfig c;
  Trainer trainer(model, c);
  trainer.SetTotalSteps(1000000);
  std::vector<const EncodedSample*> batch;
  for (std::size_t k = 0; k < c.optimizer.batch_size; ++k) batch.push_back(&f.encoded[k]);
  for (auto _ : state) benchmark::DoNotOptimize(trainer.Step(batch));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}

void BM_Generate(benchmark::State& state) {
  synth::GeneratorOptions g;
  g.count = static_cast<std::size_t>(state.range(0));
  g.noise_level = 0.3;
  for (auto _ : state) benchmark::DoNotOptimize(synth::Generate(g).samples.size());
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

BENCHMARK(BM_Forward)->DenseRange(0, 2);
BENCHMARK(BM_ForwardBackward)->DenseRange(0, 2);
BENCHMARK(BM_TrainStep);
BENCHMARK(BM_Generate)->Arg(1000);

}  // namespace
}  // namespace vlqa

BENCHMARK_MAIN();
