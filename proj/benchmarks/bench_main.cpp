#include <benchmark/benchmark.h>

#include <vector>

#include "nlpn/analytic.hpp"
#include "nlpn/channel.hpp"
#include "nlpn/equalize.hpp"
#include "nlpn/rxdsp.hpp"

using namespace nlpn;

namespace {

Waveform comb(int n_channels, int n_sc, std::size_t n_symbols) {
  const ScmPlan plan = ScmPlan::make(n_channels, n_sc);
  const auto c = build_qam(16);
  std::vector<SymbolFrame> frames;
  for (int ch = 0; ch < n_channels; ++ch) {
    frames.push_back(draw_symbols(c, static_cast<std::size_t>(n_sc), n_symbols, 1 + static_cast<std::uint64_t>(ch)));
  }
  return transmit(plan, frames, 1e-3 / n_sc);
}

void BM_Fft(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  CVec x(n, cd{1.0, 0.0});
  for (auto _ : state) {
    fft_inplace(x);
    benchmark::DoNotOptimize(x.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(n));
}
BENCHMARK(BM_Fft)->Arg(1 << 14)->Arg(1 << 18)->Arg(1 << 20);

// One span at a fixed step count, so the figure is cost per SSFM step.
void BM_SpanStep(benchmark::State& state) {
  const Waveform w = comb(3, 4, static_cast<std::size_t>(state.range(0)));
  FiberSpec f;
  StepPolicy p;
  p.uniform_steps = 64;
  for (auto _ : state) {
    auto out = propagate_span(w, f, p);
    benchmark::DoNotOptimize(out.pol[0].data());
  }
  state.SetItemsProcessed(state.iterations() * p.uniform_steps);
  state.counters["samples"] = static_cast<double>(w.size());
}
BENCHMARK(BM_SpanStep)->Arg(1 << 10)->Arg(1 << 12)->Unit(benchmark::kMillisecond);

void BM_Demux(benchmark::State& state) {
  const ScmPlan plan = ScmPlan::make(3, 4);
  const Waveform w = comb(3, 4, 1 << 12);
  for (auto _ : state) {
    auto s = demux_all(w, plan);
    benchmark::DoNotOptimize(s.data());
  }
}
BENCHMARK(BM_Demux)->Unit(benchmark::kMillisecond);

void BM_Tensor(benchmark::State& state) {
  const ScmPlan plan = ScmPlan::make(3, 4);
  LinkSpec link;
  link.n_spans = static_cast<int>(state.range(0));
  TensorOptions opt;
  opt.nodes_per_span = 16;
  const InteractionModel model(plan, link, opt);
  for (auto _ : state) {
    auto t = model.tensor(0, {plan.coi_index, 2});
    benchmark::DoNotOptimize(t.x.data());
  }
}
BENCHMARK(BM_Tensor)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_Equalizer(benchmark::State& state) {
  const auto c = build_qam(64);
  const std::size_t n = 1 << 14;
  const SymbolFrame f = draw_symbols(c, 8, n, 3);
  RxSymbols rx;
  rx.n_subcarriers = 8;
  rx.n_symbols = n;
  rx.a = f.symbols;
  rx.tx_index = f.indices;
  rx.s.resize(rx.a.size());
  for (std::size_t i = 0; i < rx.s.size(); ++i) rx.s[i] = rx.a[i] * std::polar(1.0, 0.01 * std::sin(1e-3 * static_cast<double>(i)));
  const EqOptions opt{0.99, state.range(0) ? EqMode::kJoint : EqMode::kIndividual, 500};
  for (auto _ : state) {
    auto r = equalize_frame(rx, c, opt);
    benchmark::DoNotOptimize(r.decided.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<long long>(rx.s.size()));
}
BENCHMARK(BM_Equalizer)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
