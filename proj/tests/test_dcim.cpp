#include <bit>
#include <cmath>

#include "doctest.h"
#include "scare/dcim.hpp"
#include "scare/rng.hpp"
#include "scare/sop.hpp"

using namespace scare;
using namespace scare::dcim;

namespace {

double r_mid(const DcimChip& chip) { return chip.rram.r_mid(); }

bool cell_is_lrs(const DcimChip& chip, int row, int col) {
  return chip.and_r[row][col] < r_mid(chip);
}

sop::SopFunction random_true_sop(Rng& rng, int max_vars = 8, int max_minterms = 8) {
  int n = 2 + static_cast<int>(rng.next_below(max_vars - 1));
  sop::SopFunction f(n);
  int m = 1 + static_cast<int>(rng.next_below(std::min(max_minterms, 8)));
  for (int j = 0; j < m; ++j) {
    sop::Minterm mt;
    int fanin = 1 + static_cast<int>(rng.next_below(n));
    while (std::popcount(mt.pos) < fanin) mt.pos |= 1u << rng.next_below(n);
    try {
      f.add_minterm(mt);
    } catch (const std::invalid_argument&) {
    }
  }
  return f;
}

} // namespace

TEST_CASE("programming the running example places the documented cells") {
  ChipDims dims{4, 4, 4, 1};
  auto f = sop::parse_function("ab+cd");
  auto chip = program_dcim(f, dims);
  CHECK(cell_is_lrs(chip, 0, 0)); // a in minterm 0
  CHECK(cell_is_lrs(chip, 1, 0)); // b
  CHECK_FALSE(cell_is_lrs(chip, 2, 0));
  CHECK(cell_is_lrs(chip, 2, 1)); // c in minterm 1
  CHECK(cell_is_lrs(chip, 3, 1)); // d
  CHECK_FALSE(cell_is_lrs(chip, 0, 1));
  CHECK(chip.or_r[0][0] < r_mid(chip));
  CHECK(chip.or_r[1][0] < r_mid(chip));
  CHECK(chip.or_r[2][0] > r_mid(chip));
  CHECK(chip.active_bl_count() == 2);
}

TEST_CASE("programming layout for a+bc and the constant-0 chip") {
  auto f = sop::parse_function("a+bc");
  auto chip = program_dcim(f);
  CHECK(cell_is_lrs(chip, 0, 0));
  CHECK_FALSE(cell_is_lrs(chip, 1, 0));
  CHECK(cell_is_lrs(chip, 1, 1));
  CHECK(cell_is_lrs(chip, 2, 1));

  auto zero = program_dcim(sop::SopFunction(3));
  for (int r = 0; r < zero.dims.and_wl; ++r)
    for (int c = 0; c < zero.dims.and_bl; ++c) CHECK_FALSE(cell_is_lrs(zero, r, c));
  CHECK(zero.active_bl_count() == 0);
}

TEST_CASE("capacity violations are rejected") {
  ChipDims dims{4, 4, 4, 1};
  CHECK_THROWS_AS(program_dcim(sop::parse_function("abcde"), dims), std::invalid_argument);
  CHECK_THROWS_AS(program_dcim(sop::parse_function("a+b+c+d+ab+ac"), dims), std::invalid_argument);
  // complemented literals need the complement row bank
  CHECK_THROWS_AS(program_dcim(sop::parse_function("ab'+cd"), dims), std::invalid_argument);
  CHECK_NOTHROW(program_dcim(sop::parse_function("ab'+cd"), ChipDims{8, 4, 4, 1}));
}

TEST_CASE("the paper's worked computation: AB+CD on (1,1,0,1)") {
  auto f = sop::parse_function("ab+cd");
  auto chip = program_dcim(f);
  auto run = run_dcim(chip, std::vector<int>{1, 1, 0, 1});
  CHECK(run.outputs[0] == 1);
  CHECK(run.minterm_bits[0] == 1);
  CHECK(run.minterm_bits[1] == 0);
}

TEST_CASE("all-zero inputs give output 0 and the maximal AND discharge") {
  auto f = sop::parse_function("ab+cd");
  auto chip = program_dcim(f);
  auto sched = make_schedule(chip.params, chip.rram, chip.selector);
  auto run0 = run_dcim(chip, std::vector<int>{0, 0, 0, 0});
  CHECK(run0.outputs[0] == 0);
  trace::MeasurementWindow w{sched.enable_time, sched.sense_time};
  double i_all0 = trace::mean_current(run0.trace, w, trace::Channel::Ground);
  for (uint32_t p : {1u, 3u, 5u, 15u}) {
    auto chip2 = program_dcim(f);
    auto run = run_dcim(chip2, p);
    CHECK(trace::mean_current(run.trace, w, trace::Channel::Ground) <= i_all0 + 1e-9);
  }
}

TEST_CASE("single-cell discharge matches the hand-computed current and time constant") {
  // Oracle: I0 = (VDD - Vth)/R_LRS = 13.58 uA, tau = R_LRS * C_BL = 5.89 ns.
  DcimParams p;
  p.en_buffer_unit = 0.0; // look at the bare array
  p.sa_pulse_unit = 0.0;
  p.leak_cell_conductance = 0.0;
  auto f = sop::parse_function("a", 8);
  auto chip = program_dcim(f, {}, p);
  auto sched = make_schedule(p, chip.rram, chip.selector);
  auto run = run_dcim(chip, std::vector<int>(8, 0));
  const auto& g = run.trace.channel(trace::Channel::Ground);
  size_t k0 = static_cast<size_t>(sched.enable_time / p.dt) + 2;
  double i0 = g[k0];
  CHECK(i0 == doctest::Approx(13.58e-6).epsilon(0.10));
  // fit the decay constant between two points
  size_t k1 = k0 + static_cast<size_t>(4e-9 / p.dt);
  double tau = 4e-9 / std::log(g[k0] / g[k1]);
  CHECK(tau == doctest::Approx(5.89e-9).epsilon(0.12));
}

TEST_CASE("supply and ground stay single-polarity in their respective phases") {
  DcimParams p;
  p.en_buffer_unit = 0.0; // pulses are deliberately bipolar; check the array itself
  p.sa_pulse_unit = 0.0;
  auto f = sop::parse_function("ab+cd");
  auto chip = program_dcim(f, {}, p);
  auto run = run_dcim(chip, std::vector<int>{1, 0, 1, 1});
  auto sched = make_schedule(p, chip.rram, chip.selector);
  size_t pre_end = static_cast<size_t>(sched.precharge_end / p.dt);
  const auto& sup = run.trace.channel(trace::Channel::Supply);
  const auto& gnd = run.trace.channel(trace::Channel::Ground);
  double leak = p.leak_cell_conductance * p.vdd * chip.cell_count();
  for (size_t k = 0; k < pre_end; ++k) {
    CHECK(sup[k] <= -leak + 1e-12); // cycle-1 precharge only draws from the rail
  }
  size_t o = static_cast<size_t>(sched.cycle_length / p.dt);
  for (size_t k = o; k < o + pre_end; ++k) {
    CHECK(gnd[k] >= leak - 1e-12); // cycle-2 pre-discharge only dumps into ground
  }
}

TEST_CASE("functional equivalence against the truth-table oracle") {
  Rng rng(2024);
  for (int iter = 0; iter < 25; ++iter) {
    auto f = random_true_sop(rng, 6, 6);
    auto chip = program_dcim(f);
    for (uint32_t p = 0; p < (1u << f.variable_count()); ++p) {
      auto run = run_dcim(chip, p);
      REQUIRE(static_cast<bool>(run.outputs[0]) == sop::evaluate(f, p));
    }
  }
}

TEST_CASE("complemented functions compute correctly") {
  for (const char* txt : {"ab'+c", "a'b'c'", "ab'+a'b", "a'+b'c+abd'"}) {
    auto f = sop::parse_function(txt);
    auto chip = program_dcim(f);
    for (uint32_t p = 0; p < (1u << f.variable_count()); ++p) {
      auto run = run_dcim(chip, p);
      REQUIRE(static_cast<bool>(run.outputs[0]) == sop::evaluate(f, p));
    }
  }
}

TEST_CASE("nominal mean currents rise strictly with fanin") {
  DcimParams p;
  auto sched = make_schedule(p, {}, {});
  // OR gates: k satisfied minterms charging the output BL
  double prev = -1.0;
  for (int k = 0; k <= 8; ++k) {
    sop::SopFunction f(8);
    for (int v = 0; v < k; ++v) f.add_minterm({1u << v, 0});
    auto chip = program_dcim(f);
    auto run = run_dcim(chip, std::vector<int>(8, 1));
    trace::MeasurementWindow w{sched.cycle_length + sched.enable_time,
                               sched.cycle_length + sched.enable_time + 1e-9};
    double i = -trace::mean_current(run.trace, w, trace::Channel::Supply);
    CHECK(i > prev);
    prev = i;
  }
  // AND gates: k literals discharging one BL
  prev = -1.0;
  for (int k = 0; k <= 8; ++k) {
    sop::SopFunction f(8);
    sop::Minterm m;
    for (int v = 0; v < k; ++v) m.pos |= 1u << v;
    f.add_minterm(m);
    auto chip = program_dcim(f);
    auto run = run_dcim(chip, std::vector<int>(8, 0));
    trace::MeasurementWindow w{sched.enable_time, sched.enable_time + 1e-9};
    double i = trace::mean_current(run.trace, w, trace::Channel::Ground);
    CHECK(i > prev);
    prev = i;
  }
  // precharge: k active BLs refilled from the discharge floor
  prev = -1.0;
  for (int k = 0; k <= 8; ++k) {
    sop::SopFunction f(8);
    for (int v = 0; v < k; ++v) f.add_minterm({1u << v, 0});
    auto chip = program_dcim(f);
    run_dcim(chip, std::vector<int>(8, 0));
    auto run = run_dcim(chip, std::vector<int>(8, 0));
    trace::MeasurementWindow w{0.0, sched.precharge_end};
    double i = -trace::mean_current(run.trace, w, trace::Channel::Supply);
    CHECK(i > prev);
    prev = i;
  }
}

TEST_CASE("precharge energy model") {
  auto f = sop::parse_function("a+b");
  auto chip = program_dcim(f);
  CHECK(precharge_energy(chip, 1) == doctest::Approx(72e-15).epsilon(1e-9)); // 0.5*100fF*1.44
  CHECK(precharge_energy(chip, 0) == 0.0);
  CHECK(precharge_energy(chip, 2) == doctest::Approx(2.0 * precharge_energy(chip, 1)));
  CHECK_THROWS_AS(precharge_energy(chip, -1), std::invalid_argument);
}

TEST_CASE("precharge trace charge matches the energy model within 5 percent") {
  DcimParams p;
  p.leak_cell_conductance = 0.0;
  for (int k : {1, 2, 4}) {
    sop::SopFunction f(8);
    for (int v = 0; v < k; ++v) f.add_minterm({1u << v, 0});
    auto chip = program_dcim(f, {}, p);
    auto sched = make_schedule(p, chip.rram, chip.selector);
    auto run = run_dcim(chip, std::vector<int>(8, 1)); // power-on precharge, full swing
    trace::MeasurementWindow w{0.0, sched.precharge_end};
    double q = -trace::mean_current(run.trace, w, trace::Channel::Supply) * w.width();
    double e_trace = 0.5 * chip.params.vdd * q; // charge-based capacitor energy
    CHECK(e_trace == doctest::Approx(precharge_energy(chip, k)).epsilon(0.05));
  }
}

TEST_CASE("a schedule too short for sensing raises a configuration error") {
  DcimParams p;
  p.t_compute = 2e-9; // sense edge would land beyond the cycle
  auto f = sop::parse_function("ab");
  CHECK_THROWS_AS(
      [&] {
        auto chip = program_dcim(f, {}, p);
        run_dcim(chip, std::vector<int>{1, 1});
      }(),
      std::invalid_argument);

  // A sense reference that cannot settle is caught by the functional check.
  DcimParams p2;
  p2.v_ref_and_frac = 0.05; // unsatisfied minterms cannot fall below this
  auto chip2 = program_dcim(f, {}, p2);
  CHECK_THROWS_AS(run_dcim(chip2, std::vector<int>{0, 1}), std::runtime_error);
}

TEST_CASE("chip JSON dump carries the cell map") {
  auto f = sop::parse_function("ab+cd");
  auto chip = program_dcim(f, ChipDims{4, 4, 4, 1});
  auto j = chip_to_json(chip);
  CHECK(j.find("\"and_cells\"") != std::string::npos);
  CHECK(j.find("1000") != std::string::npos); // row a taps only minterm 0
}
