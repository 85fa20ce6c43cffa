#include "benchmark/benchmark.h"
#include "scare/dcim.hpp"
#include "scare/magic.hpp"
#include "scare/sop.hpp"

using namespace scare;

static void BM_DcimRun(benchmark::State& state) {
  auto f = sop::parse_function("ab+cde+fgh");
  auto chip = dcim::program_dcim(f);
  uint32_t p = 0;
  for (auto _ : state) {
    auto run = dcim::run_dcim(chip, p++ & 0xff);
    benchmark::DoNotOptimize(run.outputs[0]);
  }
}
BENCHMARK(BM_DcimRun);

static void BM_DcimProgram(benchmark::State& state) {
  auto f = sop::parse_function("ab+cde+fgh");
  for (auto _ : state) {
    auto chip = dcim::program_dcim(f);
    benchmark::DoNotOptimize(chip.active_bl_count());
  }
}
BENCHMARK(BM_DcimProgram);

static void BM_MagicRun(benchmark::State& state) {
  auto f = sop::parse_function("ab+cde+fgh");
  auto prog = magic::compile_magic(f);
  uint32_t p = 0;
  for (auto _ : state) {
    auto run = magic::run_program(prog, p++ & 0xff);
    benchmark::DoNotOptimize(run.output);
  }
}
BENCHMARK(BM_MagicRun);

static void BM_MagicGate(benchmark::State& state) {
  auto fanin = static_cast<int>(state.range(0));
  for (auto _ : state) {
    auto prog = magic::single_gate_program(magic::GateType::And, fanin);
    auto run = magic::run_program(prog, (1u << fanin) - 1);
    benchmark::DoNotOptimize(run.gate_results[0].op_time);
  }
}
BENCHMARK(BM_MagicGate)->Arg(2)->Arg(8);
