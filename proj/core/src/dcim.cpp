#include "scare/dcim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace scare::dcim {

using device::cell_path_current;

void PhaseSchedule::validate() const {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  if (!(precharge_end < enable_time)) throw std::invalid_argument("precharge must end before EN");
  if (!(enable_time < sense_time)) throw std::invalid_argument("SE must follow EN");
  if (!(sense_time < cycle_length)) throw std::invalid_argument("cycle too short for sensing");
}

PhaseSchedule make_schedule(const DcimParams& p, const device::RramParams& rram,
                            const device::SelectorParams& sel) {
  PhaseSchedule s;
  s.dt = p.dt;
  auto snap = [&](double t) { return std::round(t / p.dt) * p.dt; };
  s.precharge_end = snap(p.t_precharge);
  s.enable_time = snap(p.t_precharge + p.t_settle);
  double tau0 = (rram.r_lrs + sel.r_on + p.r_wl_driver) * p.c_bl;
  s.sense_time = snap(s.enable_time + p.se_tau_multiple * tau0);
  s.cycle_length = snap(p.t_precharge + p.t_settle + p.t_compute + p.t_tail);
  s.validate();
  return s;
}

int DcimChip::active_bl_count() const {
  int n = 0;
  for (bool a : and_bl_active) n += a ? 1 : 0;
  return n;
}

int DcimChip::cell_count() const {
  return dims.and_wl * dims.and_bl + dims.or_wl * dims.or_bl;
}

void DcimChip::reset_bl_state() {
  std::fill(and_bl_v.begin(), and_bl_v.end(), 0.0);
  std::fill(or_bl_v.begin(), or_bl_v.end(), 0.0);
}

namespace {

uint64_t and_cell_id(int row, int col) { return static_cast<uint64_t>(row) * 64 + col; }
uint64_t or_cell_id(int row, int col) { return 0x10000ull + static_cast<uint64_t>(row) * 64 + col; }

} // namespace

DcimChip program_dcim(const sop::SopFunction& f, const ChipDims& dims, const DcimParams& params,
                      const device::DeviceInstance& instance, const device::RramParams& rram,
                      const device::SelectorParams& selector) {
  rram.validate();
  selector.validate();
  const int n = f.variable_count();
  const int m = f.minterm_count();
  const int rows_needed = f.uses_complements() ? 2 * n : n;
  if (rows_needed > dims.and_wl)
    throw std::invalid_argument("function needs more wordlines than the AND array provides");
  if (m > dims.and_bl) throw std::invalid_argument("too many minterms for the AND array");
  if (m > dims.or_wl) throw std::invalid_argument("too many minterms for the OR array");
  if (dims.or_bl < 1) throw std::invalid_argument("OR array needs at least one output column");

  DcimChip chip;
  chip.dims = dims;
  chip.params = params;
  chip.rram = rram;
  chip.selector = selector;
  chip.instance = instance;
  chip.function = f;

  auto r_of = [&](uint64_t id, bool lrs) {
    device::RramState s{instance.cell_gap_nm(id, lrs)};
    return device::rram_resistance(s, rram);
  };

  chip.and_r.assign(dims.and_wl, std::vector<double>(dims.and_bl, 0.0));
  for (int r = 0; r < dims.and_wl; ++r)
    for (int c = 0; c < dims.and_bl; ++c) chip.and_r[r][c] = r_of(and_cell_id(r, c), false);
  chip.or_r.assign(dims.or_wl, std::vector<double>(dims.or_bl, 0.0));
  for (int r = 0; r < dims.or_wl; ++r)
    for (int c = 0; c < dims.or_bl; ++c) chip.or_r[r][c] = r_of(or_cell_id(r, c), false);

  chip.and_bl_active.assign(dims.and_bl, false);
  for (int j = 0; j < m; ++j) {
    const auto& mt = f.minterms()[j];
    chip.and_bl_active[j] = true;
    for (const auto& lit : mt.literals()) {
      int row = lit.variable + (lit.complemented ? n : 0);
      chip.and_r[row][j] = r_of(and_cell_id(row, j), true);
    }
    chip.or_r[j][0] = r_of(or_cell_id(j, 0), true);
  }
  chip.minterm_rows = m;

  chip.and_bl_v.assign(dims.and_bl, 0.0);
  chip.or_bl_v.assign(dims.or_bl, 0.0);
  return chip;
}

namespace {

// Additive rail transient: short bipolar pulse on the supply channel plus a
// unipolar lobe on the ground channel, the shape of a CMOS buffer bank firing.
void add_enable_pulse(trace::CurrentTrace& tr, double t0, double width, double amp,
                      double rebound_frac, double ground_frac) {
  if (amp == 0.0) return;
  auto& sup = tr.channel(trace::Channel::Supply);
  auto& gnd = tr.channel(trace::Channel::Ground);
  const double dt = tr.dt();
  size_t i0 = static_cast<size_t>(std::llround(t0 / dt));
  size_t nw = std::max<size_t>(2, static_cast<size_t>(std::llround(width / dt)));
  double split = 0.6;
  for (size_t k = 0; k < nw && i0 + k < sup.size(); ++k) {
    double x = (static_cast<double>(k) + 0.5) / static_cast<double>(nw);
    double tri;
    if (x < split)
      tri = -amp * (1.0 - std::abs(2.0 * x / split - 1.0));
    else
      tri = amp * rebound_frac * (1.0 - std::abs(2.0 * (x - split) / (1.0 - split) - 1.0));
    sup[i0 + k] += tri;
    gnd[i0 + k] += ground_frac * amp * (1.0 - std::abs(2.0 * x - 1.0));
  }
}

// Net-zero bipolar blip marking a driver-enable edge.
void add_marker_pulse(trace::CurrentTrace& tr, double t0, double width, double amp) {
  if (amp == 0.0) return;
  auto& sup = tr.channel(trace::Channel::Supply);
  const double dt = tr.dt();
  size_t i0 = static_cast<size_t>(std::llround(t0 / dt));
  size_t nw = std::max<size_t>(2, static_cast<size_t>(std::llround(width / dt)));
  for (size_t k = 0; k < nw && i0 + k < sup.size(); ++k) {
    double x = (static_cast<double>(k) + 0.5) / static_cast<double>(nw);
    double tri = 1.0 - std::abs(2.0 * x - 1.0);
    sup[i0 + k] += (x < 0.5 ? -amp : amp) * tri;
  }
}

struct DrivenRow {
  int row;
  double level;     // rail voltage
  bool is_bias;     // bias rails source from supply / sink to ground
};

} // namespace

DcimRun run_dcim(DcimChip& chip, uint32_t input_bits) {
  std::vector<int> inputs(chip.function.variable_count());
  for (size_t i = 0; i < inputs.size(); ++i) inputs[i] = (input_bits >> i) & 1;
  return run_dcim(chip, inputs);
}

DcimRun run_dcim(DcimChip& chip, const std::vector<int>& inputs) {
  const int n = chip.function.variable_count();
  if (static_cast<int>(inputs.size()) != n)
    throw std::invalid_argument("input vector length does not match the programmed function");
  const DcimParams& p = chip.params;
  PhaseSchedule sched = make_schedule(p, chip.rram, chip.selector);
  const double dt = sched.dt;
  const size_t cycle_steps = static_cast<size_t>(std::llround(sched.cycle_length / dt));
  trace::CurrentTrace tr(dt, 2 * cycle_steps);
  auto& sup = tr.channel(trace::Channel::Supply);
  auto& gnd = tr.channel(trace::Channel::Ground);

  const double vdd = p.vdd;
  const double C = chip.c_bl_effective();
  const double r_drv = chip.r_driver_effective();
  const double r_pre = p.r_precharge * chip.instance.driver_resistance_scale();
  const double buffer_scale = chip.instance.buffer_current_scale();

  const size_t i_pre_end = static_cast<size_t>(std::llround(sched.precharge_end / dt));
  const size_t i_en = static_cast<size_t>(std::llround(sched.enable_time / dt));
  const size_t i_se = static_cast<size_t>(std::llround(sched.sense_time / dt));

  // ---- cycle 1: AND array -------------------------------------------------
  for (size_t k = 0; k < i_pre_end; ++k) {
    double isum = 0.0;
    for (int c = 0; c < chip.dims.and_bl; ++c) {
      if (!chip.and_bl_active[c]) continue;
      double i = (vdd - chip.and_bl_v[c]) / r_pre;
      chip.and_bl_v[c] += dt * i / C;
      isum += i;
    }
    sup[k] -= isum;
  }

  // WL drive map for the evaluate phase: literal rows pull to ground when the
  // driven literal is 0 and float otherwise; bias rows hold their rail.
  std::vector<DrivenRow> rows1;
  for (int v = 0; v < n; ++v) {
    if (!inputs[v]) rows1.push_back({v, 0.0, false});
    if (n + v < chip.dims.and_wl - chip.bias_rows && inputs[v])
      rows1.push_back({n + v, 0.0, false}); // complement row carries the inverted literal
  }
  for (int b = 0; b < chip.bias_rows; ++b)
    rows1.push_back({chip.dims.and_wl - chip.bias_rows + b, chip.bias_and, true});

  std::vector<int> minterm_bits(chip.dims.and_bl, 0);
  for (size_t k = i_en; k < cycle_steps; ++k) {
    double i_sup = 0.0, i_gnd = 0.0;
    for (int c = 0; c < chip.dims.and_bl; ++c) {
      if (!chip.and_bl_active[c]) continue;
      double i_net = 0.0;
      for (const auto& dr : rows1) {
        double r_cell = chip.and_r[dr.row][c];
        if (dr.is_bias && !chip.and_bias_cell.empty()) {
          int b = dr.row - (chip.dims.and_wl - chip.bias_rows);
          if (!chip.and_bias_cell[b][c]) continue;
        }
        double i = cell_path_current(dr.level - chip.and_bl_v[c], r_cell, chip.selector, r_drv);
        if (i == 0.0) continue;
        i_net += i;
        if (i > 0)
          i_sup += i; // rail sources current into the BL
        else
          i_gnd -= i; // BL discharges into the rail
      }
      chip.and_bl_v[c] += dt * i_net / C;
    }
    sup[k] -= i_sup;
    gnd[k] += i_gnd;
    if (k == i_se) {
      for (int c = 0; c < chip.dims.and_bl; ++c)
        minterm_bits[c] = chip.and_bl_active[c] && chip.and_bl_v[c] > p.v_ref_and() ? 1 : 0;
    }
  }

  add_marker_pulse(tr, 0.0, p.sa_pulse_width, p.sa_pulse_unit * chip.dims.and_bl * buffer_scale);
  add_enable_pulse(tr, sched.enable_time, p.en_pulse_width,
                   p.en_buffer_unit * p.en_rows_and * buffer_scale, p.en_rebound_frac,
                   p.en_ground_frac);
  add_enable_pulse(tr, sched.sense_time, p.sa_pulse_width,
                   p.sa_pulse_unit * chip.dims.and_bl * buffer_scale, p.en_rebound_frac,
                   p.en_ground_frac);

  // ---- cycle 2: OR array --------------------------------------------------
  const double t2 = sched.cycle_length;
  const size_t o = cycle_steps;
  for (size_t k = 0; k < i_pre_end; ++k) {
    double isum = 0.0;
    for (int c = 0; c < chip.dims.or_bl; ++c) {
      double i = chip.or_bl_v[c] / r_pre;
      chip.or_bl_v[c] -= dt * i / C;
      isum += i;
    }
    gnd[o + k] += isum;
  }

  std::vector<DrivenRow> rows2;
  for (int j = 0; j < chip.minterm_rows; ++j)
    if (minterm_bits[j]) rows2.push_back({j, vdd, false});
  for (int b = 0; b < chip.or_bias_rows; ++b)
    rows2.push_back({chip.dims.or_wl - chip.or_bias_rows + b, chip.bias_or, true});

  std::vector<int> outputs(chip.dims.or_bl, 0);
  for (size_t k = i_en; k < cycle_steps; ++k) {
    double i_sup = 0.0, i_gnd = 0.0;
    for (int c = 0; c < chip.dims.or_bl; ++c) {
      double i_net = 0.0;
      for (const auto& dr : rows2) {
        if (dr.is_bias) {
          int b = dr.row - (chip.dims.or_wl - chip.or_bias_rows);
          if (!chip.or_bias_cell[b][c]) continue;
        }
        double i = cell_path_current(dr.level - chip.or_bl_v[c], chip.or_r[dr.row][c],
                                     chip.selector, r_drv);
        if (i == 0.0) continue;
        i_net += i;
        if (i > 0)
          i_sup += i;
        else
          i_gnd -= i;
      }
      chip.or_bl_v[c] += dt * i_net / C;
    }
    sup[o + k] -= i_sup;
    gnd[o + k] += i_gnd;
    if (k == i_se) {
      for (int c = 0; c < chip.dims.or_bl; ++c)
        outputs[c] = chip.or_bl_v[c] > p.v_ref_or() ? 1 : 0;
    }
  }

  add_marker_pulse(tr, t2, p.sa_pulse_width, p.sa_pulse_unit * chip.dims.or_bl * buffer_scale);
  add_enable_pulse(tr, t2 + sched.enable_time, p.en_pulse_width,
                   p.en_buffer_unit * p.en_rows_or * buffer_scale, p.en_rebound_frac,
                   p.en_ground_frac);
  add_enable_pulse(tr, t2 + sched.sense_time, p.sa_pulse_width,
                   p.sa_pulse_unit * chip.dims.or_bl * buffer_scale, p.en_rebound_frac,
                   p.en_ground_frac);

  // Constant leakage floor over both arrays, subtractable by an attacker.
  double leak = p.leak_cell_conductance * vdd * chip.cell_count();
  tr.add_constant(-leak, leak);

  tr.phases() = {
      {"precharge_and", 0.0, sched.precharge_end},
      {"en_and", sched.enable_time, sched.enable_time},
      {"compute_and", sched.enable_time, sched.sense_time},
      {"se_and", sched.sense_time, sched.sense_time},
      {"predischarge_or", t2, t2 + sched.precharge_end},
      {"en_or", t2 + sched.enable_time, t2 + sched.enable_time},
      {"compute_or", t2 + sched.enable_time, t2 + sched.sense_time},
      {"se_or", t2 + sched.sense_time, t2 + sched.sense_time},
  };
  tr.check_finite();

  DcimRun run{outputs, minterm_bits, std::move(tr)};
  if (p.functional_check && chip.instance.nominal() && chip.bias_rows == 0 &&
      chip.or_bias_rows == 0) {
    bool expect = sop::evaluate(chip.function, inputs);
    if (static_cast<bool>(run.outputs[0]) != expect)
      throw std::runtime_error("DCIM schedule fails to settle: nominal output disagrees with the truth table");
  }
  return run;
}

double precharge_energy(const DcimChip& chip, int active_bls) {
  if (active_bls < 0) throw std::invalid_argument("active BL count must be non-negative");
  double dv = chip.params.vdd;
  return 0.5 * chip.c_bl_effective() * dv * dv * static_cast<double>(active_bls);
}

std::string chip_to_json(const DcimChip& chip) {
  nlohmann::json j;
  j["architecture"] = "dcim";
  j["function"] = sop::format_function(chip.function);
  j["dims"] = {{"and_wl", chip.dims.and_wl},
               {"and_bl", chip.dims.and_bl},
               {"or_wl", chip.dims.or_wl},
               {"or_bl", chip.dims.or_bl}};
  j["vdd"] = chip.params.vdd;
  auto state = [&](const std::vector<std::vector<double>>& m) {
    std::vector<std::string> rows;
    double r_mid = chip.rram.r_mid();
    for (const auto& row : m) {
      std::string s;
      for (double r : row) s += r < r_mid ? '1' : '0';
      rows.push_back(s);
    }
    return rows;
  };
  j["and_cells"] = state(chip.and_r);
  j["or_cells"] = state(chip.or_r);
  if (chip.bias_rows > 0) {
    j["protection"] = {{"kind", "redundant-inputs"},
                       {"bias_rows", chip.bias_rows},
                       {"bias_and", chip.bias_and},
                       {"bias_or", chip.bias_or}};
  }
  return j.dump(2);
}

} // namespace scare::dcim
