#include "scare/magic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace scare::magic {

const char* gate_type_name(GateType t) {
  switch (t) {
    case GateType::And: return "and";
    case GateType::Or: return "or";
    case GateType::Nor: return "nor";
  }
  return "?";
}

int MagicProgram::find_input_cell(int variable, bool complemented) const {
  for (int i = 0; i < input_cell_count; ++i)
    if (cells[i].variable == variable && cells[i].complemented == complemented) return i;
  return -1;
}

double MagicProgram::cell_resistance(int id) const {
  return device::rram_resistance({cells[id].gap_nm}, rram);
}

bool MagicProgram::cell_one(int id) const {
  return cells[id].gap_nm < rram.gap_mid_nm();
}

Cell fresh_cell(const device::DeviceInstance& inst, uint64_t cell_id) {
  Cell c;
  c.gap_lrs_nm = inst.cell_gap_nm(cell_id, true);
  c.gap_hrs_nm = inst.cell_gap_nm(cell_id, false);
  c.gap_nm = c.gap_hrs_nm; // pristine chips power up in HRS
  return c;
}

namespace {
Cell make_cell(const device::DeviceInstance& inst, uint64_t cell_id) { return fresh_cell(inst, cell_id); }
} // namespace

MagicProgram compile_magic(const sop::SopFunction& f, const MagicParams& params,
                           const device::DeviceInstance& instance,
                           const device::RramParams& rram) {
  rram.validate();
  MagicProgram prog;
  prog.variable_count = f.variable_count();
  prog.function = f;
  prog.params = params;
  prog.rram = rram;
  prog.instance = instance;

  uint64_t next_cell_id = 0;
  for (int v = 0; v < f.variable_count(); ++v) {
    for (bool comp : {false, true}) {
      bool used = false;
      for (const auto& m : f.minterms())
        for (const auto& lit : m.literals())
          if (lit.variable == v && lit.complemented == comp) used = true;
      if (!used) continue;
      Cell c = make_cell(instance, next_cell_id++);
      c.variable = v;
      c.complemented = comp;
      c.is_input = true;
      prog.cells.push_back(c);
    }
  }
  prog.input_cell_count = static_cast<int>(prog.cells.size());

  std::vector<int> or_inputs;
  for (const auto& m : f.minterms()) {
    auto lits = m.literals();
    if (lits.size() == 1) {
      or_inputs.push_back(prog.find_input_cell(lits[0].variable, lits[0].complemented));
      continue;
    }
    Gate g;
    g.type = GateType::And;
    for (const auto& lit : lits) g.inputs.push_back(prog.find_input_cell(lit.variable, lit.complemented));
    prog.cells.push_back(make_cell(instance, next_cell_id++));
    g.output = static_cast<int>(prog.cells.size()) - 1;
    prog.gates.push_back(g);
    or_inputs.push_back(g.output);
  }
  if (f.minterm_count() == 0) {
    prog.output_cell = -1;
  } else if (f.minterm_count() == 1) {
    prog.output_cell = or_inputs[0];
  } else {
    Gate g;
    g.type = GateType::Or;
    g.inputs = or_inputs;
    prog.cells.push_back(make_cell(instance, next_cell_id++));
    g.output = static_cast<int>(prog.cells.size()) - 1;
    prog.gates.push_back(g);
    prog.output_cell = g.output;
  }
  return prog;
}

MagicProgram single_gate_program(GateType type, int fanin, const MagicParams& params,
                                 const device::DeviceInstance& instance,
                                 const device::RramParams& rram) {
  if (fanin < 1) throw std::invalid_argument("gate fanin must be at least 1");
  sop::SopFunction f(fanin);
  if (type == GateType::And) {
    sop::Minterm m;
    for (int v = 0; v < fanin; ++v) m.pos |= 1u << v;
    f.add_minterm(m);
  } else {
    for (int v = 0; v < fanin; ++v) f.add_minterm({1u << v, 0});
  }
  MagicProgram prog;
  prog.variable_count = fanin;
  prog.function = f;
  prog.params = params;
  if (type == GateType::Nor) prog.params.functional_check = false;
  prog.rram = rram;
  prog.instance = instance;
  for (int v = 0; v < fanin; ++v) {
    Cell c = make_cell(instance, static_cast<uint64_t>(v));
    c.variable = v;
    c.is_input = true;
    prog.cells.push_back(c);
  }
  prog.input_cell_count = fanin;
  Gate g;
  g.type = type;
  for (int v = 0; v < fanin; ++v) g.inputs.push_back(v);
  prog.cells.push_back(make_cell(instance, static_cast<uint64_t>(fanin)));
  g.output = fanin;
  prog.gates.push_back(g);
  prog.output_cell = g.output;
  return prog;
}

namespace {

struct Network {
  double r_series_extra = 0.0; ///< AND chain element
  double r_shunt = 0.0;        ///< NOR output shunt, 0 = none
};

double parallel(double a, double b) { return a * b / (a + b); }

// Full network current for the whole input bank plus the output branch.
double gate_current(const MagicProgram& p, const Gate& g, double r_out) {
  double v = p.params.v_write;
  if (g.type == GateType::And) {
    double chain = p.params.r_and_series + r_out;
    for (int id : g.inputs) chain += p.cell_resistance(id);
    return v / chain;
  }
  double g_bank = 0.0;
  for (int id : g.inputs) g_bank += 1.0 / p.cell_resistance(id);
  double r_bank = 1.0 / g_bank;
  double r_load = g.type == GateType::Nor ? parallel(p.params.r_nor_parallel, r_out) : r_out;
  return v / (r_bank + r_load);
}

// Write-stress voltage across the output cell. For the parallel-bank gates
// only the LRS members of the bank deliver write current.
double gate_drive(const MagicProgram& p, const Gate& g, double r_out) {
  double v = p.params.v_write;
  if (g.type == GateType::And) {
    double chain = p.params.r_and_series;
    for (int id : g.inputs) chain += p.cell_resistance(id);
    return v * r_out / (chain + r_out);
  }
  double g_src = 0.0;
  for (int id : g.inputs)
    if (p.cell_one(id)) g_src += 1.0 / p.cell_resistance(id);
  if (g_src == 0.0) return 0.0;
  double r_src = 1.0 / g_src;
  double r_load = g.type == GateType::Nor ? parallel(p.params.r_nor_parallel, r_out) : r_out;
  return v * r_load / (r_src + r_load);
}

} // namespace

GateResult execute_gate(MagicProgram& prog, const Gate& gate) {
  const MagicParams& p = prog.params;
  const device::RramParams& rram = prog.rram;
  Cell& out = prog.cells[gate.output];

  const bool set_dir = gate.type != GateType::Nor; // NOR resets its LRS preset
  const double v_th = set_dir ? rram.v_set_threshold : rram.v_reset_threshold;
  const double g_target = set_dir ? out.gap_lrs_nm : out.gap_hrs_nm;
  const double g_mid = rram.gap_mid_nm();

  // Integrate the output gap in gap space: t(g) = integral dg / rate(drive(g)).
  const double write_time = p.t_slot - p.t_arm;
  const int kGapSteps = 4000;
  const double dg_full = (rram.gap_max_nm - rram.gap_min_nm) / kGapSteps;
  std::vector<std::pair<double, double>> tab; // (t since write stress, gap)
  tab.reserve(512);
  double g = out.gap_nm;
  double t = 0.0;
  tab.emplace_back(t, g);
  double op_time = -1.0;
  const double dir = set_dir ? -1.0 : 1.0;
  while (t < write_time) {
    if ((set_dir && g <= g_target) || (!set_dir && g >= g_target)) break;
    double g_half = g + dir * 0.5 * std::min(dg_full, std::abs(g_target - g));
    double drive = gate_drive(prog, gate, device::rram_resistance({g_half}, rram));
    if (drive <= v_th) break; // write stress collapsed, motion stalls
    double step = std::min(dg_full, std::abs(g_target - g));
    double dt_seg = step / rram.gap_rate(drive);
    double g_next = g + dir * step;
    if (t + dt_seg > write_time) {
      // partial step to the slot boundary
      g_next = g + dir * step * (write_time - t) / dt_seg;
      dt_seg = write_time - t;
    }
    if (op_time < 0 && ((set_dir && g_next <= g_mid && g > g_mid) ||
                        (!set_dir && g_next >= g_mid && g < g_mid))) {
      double frac = std::abs(g - g_mid) / std::max(1e-30, std::abs(g - g_next));
      op_time = t + frac * dt_seg;
    }
    t += dt_seg;
    g = g_next;
    tab.emplace_back(t, g);
  }

  GateResult res;
  res.op_time = op_time;
  res.switched = op_time >= 0.0;

  const size_t samples = static_cast<size_t>(std::llround(p.t_slot / p.dt));
  res.segment = trace::CurrentTrace(p.dt, samples);
  auto& sup = res.segment.channel(trace::Channel::Supply);
  auto& gnd = res.segment.channel(trace::Channel::Ground);
  size_t tab_pos = 0;
  for (size_t k = 0; k < samples; ++k) {
    double tk = static_cast<double>(k) * p.dt;
    double gk;
    if (tk < p.t_arm) {
      gk = tab.front().second;
    } else {
      double tw = tk - p.t_arm;
      while (tab_pos + 1 < tab.size() && tab[tab_pos + 1].first < tw) ++tab_pos;
      if (tab_pos + 1 >= tab.size()) {
        gk = tab.back().second;
      } else {
        auto [t0, g0] = tab[tab_pos];
        auto [t1, g1] = tab[tab_pos + 1];
        gk = g0 + (g1 - g0) * (tw - t0) / std::max(1e-30, t1 - t0);
      }
    }
    double i = gate_current(prog, gate, device::rram_resistance({gk}, rram));
    sup[k] -= i;
    gnd[k] += i;
  }
  out.gap_nm = g;
  res.steady_current = gate_current(prog, gate, device::rram_resistance({g}, rram));
  return res;
}

namespace {

// One bulk write slot: every listed cell is driven at +/- v_write toward its
// target endpoint; the gap moves linearly (constant overdrive) and the slot
// current is the sum of v/R(g_i(t)).
trace::CurrentTrace write_slot(const MagicProgram& prog, const std::vector<int>& cell_ids,
                               bool to_lrs, MagicProgram* mutate) {
  const MagicParams& p = prog.params;
  const size_t samples = static_cast<size_t>(std::llround(p.t_init_slot / p.dt));
  trace::CurrentTrace seg(p.dt, samples);
  auto& sup = seg.channel(trace::Channel::Supply);
  auto& gnd = seg.channel(trace::Channel::Ground);
  double rate = prog.rram.gap_rate(p.v_write); // nm/s, constant drive
  for (size_t k = 0; k < samples; ++k) {
    double tk = static_cast<double>(k) * p.dt;
    double i_sum = 0.0;
    for (int id : cell_ids) {
      const Cell& c = prog.cells[id];
      double target = to_lrs ? c.gap_lrs_nm : c.gap_hrs_nm;
      double dir = to_lrs ? -1.0 : 1.0;
      double g = c.gap_nm + dir * rate * tk;
      g = to_lrs ? std::max(g, target) : std::min(g, target);
      i_sum += p.v_write / device::rram_resistance({g}, prog.rram);
    }
    sup[k] -= i_sum;
    gnd[k] += i_sum;
  }
  if (mutate)
    for (int id : cell_ids) {
      Cell& c = mutate->cells[id];
      double target = to_lrs ? c.gap_lrs_nm : c.gap_hrs_nm;
      double dir = to_lrs ? -1.0 : 1.0;
      double g = c.gap_nm + dir * rate * p.t_init_slot;
      c.gap_nm = to_lrs ? std::max(g, target) : std::min(g, target);
    }
  return seg;
}

trace::CurrentTrace idle_gap(const MagicParams& p) {
  return trace::CurrentTrace(p.dt, static_cast<size_t>(std::llround(p.t_idle / p.dt)));
}

std::vector<int> init_targets(const MagicProgram& prog, const std::vector<int>& inputs) {
  std::vector<int> target(prog.cells.size(), 0);
  for (int i = 0; i < static_cast<int>(prog.cells.size()); ++i) {
    const Cell& c = prog.cells[i];
    if (c.is_input) target[i] = inputs[c.variable] ^ (c.complemented ? 1 : 0);
    if (c.constant_target >= 0) target[i] = c.constant_target;
  }
  for (const auto& g : prog.gates)
    target[g.output] = g.type == GateType::Nor ? 1 : 0;
  return target;
}

trace::CurrentTrace init_write_raw(MagicProgram& prog, const std::vector<int>& inputs) {
  if (static_cast<int>(inputs.size()) != prog.variable_count)
    throw std::invalid_argument("input vector length does not match the program");
  auto target = init_targets(prog, inputs);
  std::vector<int> to_reset, to_set;
  for (size_t i = 0; i < prog.cells.size(); ++i) {
    bool one = prog.cell_one(static_cast<int>(i));
    if (one && !target[i]) to_reset.push_back(static_cast<int>(i));
    if (!one && target[i]) to_set.push_back(static_cast<int>(i));
  }
  const MagicParams& p = prog.params;
  trace::CurrentTrace tr = idle_gap(p);
  double t0 = tr.duration();
  tr.append_trace(write_slot(prog, to_reset, false, &prog));
  tr.phases().push_back({"init_reset", t0, t0 + p.t_init_slot});
  tr.append_trace(idle_gap(p));
  double t1 = tr.duration();
  tr.append_trace(write_slot(prog, to_set, true, &prog));
  tr.phases().push_back({"init_set", t1, t1 + p.t_init_slot});
  tr.append_trace(idle_gap(p));
  return tr;
}

double leak_current(const MagicProgram& prog) {
  return prog.params.leak_cell_conductance * prog.params.v_write *
         static_cast<double>(prog.cells.size());
}

} // namespace

trace::CurrentTrace init_write(MagicProgram& prog, const std::vector<int>& inputs) {
  trace::CurrentTrace tr = init_write_raw(prog, inputs);
  tr.add_constant(-leak_current(prog), leak_current(prog));
  return tr;
}

MagicRun run_program(MagicProgram& prog, uint32_t input_bits) {
  std::vector<int> inputs(prog.variable_count);
  for (size_t i = 0; i < inputs.size(); ++i) inputs[i] = (input_bits >> i) & 1;
  return run_program(prog, inputs);
}

MagicRun run_program(MagicProgram& prog, const std::vector<int>& inputs) {
  MagicRun run;
  run.trace = init_write_raw(prog, inputs);
  for (size_t gi = 0; gi < prog.gates.size(); ++gi) {
    double t0 = run.trace.duration();
    GateResult r = execute_gate(prog, prog.gates[gi]);
    run.trace.append_trace(r.segment);
    r.segment = {}; // keep only the concatenated trace
    run.trace.phases().push_back({std::string("gate_") + std::to_string(gi) + "_" +
                                      gate_type_name(prog.gates[gi].type),
                                  t0, t0 + prog.params.t_slot});
    run.trace.append_trace(idle_gap(prog.params));
    run.gate_results.push_back(std::move(r));
  }
  run.output = prog.output_cell >= 0 && prog.cell_one(prog.output_cell) ? 1 : 0;
  run.trace.add_constant(-leak_current(prog), leak_current(prog));
  run.trace.check_finite();

  if (prog.params.functional_check && prog.instance.nominal()) {
    bool expect = sop::evaluate(prog.function, inputs);
    if (static_cast<bool>(run.output) != expect)
      throw std::runtime_error("MAGIC program output disagrees with the truth table at nominal parameters");
  }
  return run;
}

trace::CurrentTrace write_cells_trace(int count, const MagicParams& params,
                                      const device::DeviceInstance& instance,
                                      const device::RramParams& rram) {
  MagicProgram prog;
  prog.variable_count = count;
  prog.params = params;
  prog.rram = rram;
  prog.instance = instance;
  std::vector<int> ids;
  for (int i = 0; i < count; ++i) {
    Cell c = make_cell(instance, static_cast<uint64_t>(i));
    prog.cells.push_back(c);
    ids.push_back(i);
  }
  trace::CurrentTrace tr = write_slot(prog, ids, true, &prog);
  tr.phases().push_back({"init_set", 0.0, tr.duration()});
  return tr;
}

std::string program_to_json(const MagicProgram& prog) {
  nlohmann::json j;
  j["architecture"] = "magic";
  j["function"] = sop::format_function(prog.function);
  j["v_write"] = prog.params.v_write;
  nlohmann::json cells = nlohmann::json::array();
  for (const auto& c : prog.cells) {
    nlohmann::json jc;
    jc["state"] = c.gap_nm < prog.rram.gap_mid_nm() ? 1 : 0;
    if (c.is_input) {
      jc["variable"] = c.variable;
      jc["complemented"] = c.complemented;
    }
    cells.push_back(jc);
  }
  j["cells"] = cells;
  nlohmann::json gates = nlohmann::json::array();
  for (const auto& g : prog.gates) {
    gates.push_back({{"type", gate_type_name(g.type)},
                     {"inputs", g.inputs},
                     {"output", g.output}});
  }
  j["gates"] = gates;
  return j.dump(2);
}

} // namespace scare::magic
