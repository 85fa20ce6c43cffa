#include "benchmark/benchmark.h"
#include "scare/attack.hpp"
#include "scare/profile.hpp"

using namespace scare;

namespace {

const profile::FaninModelSet& or_model() {
  static auto model = [] {
    profile::CalibrationConfig cfg;
    cfg.arch = profile::Architecture::Dcim;
    cfg.gate = "or";
    cfg.n_mc = 64;
    return profile::calibrate(cfg);
  }();
  return model;
}

} // namespace

static void BM_ClassifyFanin(benchmark::State& state) {
  const auto& model = or_model();
  double feature = model.fanins[4].mean;
  for (auto _ : state) {
    auto cls = attack::classify_fanin(feature, model);
    benchmark::DoNotOptimize(cls.best_fanin);
  }
}
BENCHMARK(BM_ClassifyFanin);

static void BM_ExtractFunction(benchmark::State& state) {
  auto f = sop::parse_function("ab+cd");
  auto structure = sop::structure_of(f);
  for (auto _ : state) {
    auto chip = dcim::program_dcim(f);
    attack::DcimChipOracle oracle(chip);
    auto res = attack::extract_function(oracle, structure, false);
    benchmark::DoNotOptimize(res.patterns_used);
  }
}
BENCHMARK(BM_ExtractFunction);

static void BM_TraceEvents(benchmark::State& state) {
  auto f = sop::parse_function("ab+cd");
  auto chip = dcim::program_dcim(f);
  auto run = dcim::run_dcim(chip, 15u);
  for (auto _ : state) {
    auto ev = trace::detect_events(run.trace);
    benchmark::DoNotOptimize(ev.size());
  }
}
BENCHMARK(BM_TraceEvents);
