#include "scare/protect.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "scare/rng.hpp"

namespace scare::protect {

void ProtectionConfig::validate() const {
  if (k_redundant < 0) throw std::invalid_argument("redundant count must be non-negative");
  if (!(bias_and_frac > 0) || !(bias_and_frac < 1) || !(bias_or_frac > 0) || !(bias_or_frac < 1))
    throw std::invalid_argument("bias voltages must lie strictly inside (0, vdd)");
}

dcim::DcimChip protect_redundant(const dcim::DcimChip& base, const ProtectionConfig& cfg) {
  cfg.validate();
  dcim::DcimChip chip = base;
  if (cfg.k_redundant == 0) return chip;
  const int n = chip.function.variable_count();
  const int literal_rows = chip.function.uses_complements() ? 2 * n : n;
  if (literal_rows + cfg.k_redundant > chip.dims.and_wl)
    throw std::invalid_argument("AND array has no spare rows for redundant inputs");
  if (chip.minterm_rows + cfg.k_redundant > chip.dims.or_wl)
    throw std::invalid_argument("OR array has no spare rows for redundant inputs");

  chip.bias_rows = cfg.k_redundant;
  chip.or_bias_rows = cfg.k_redundant;
  chip.bias_and = cfg.bias_and_frac * chip.params.vdd;
  chip.bias_or = cfg.bias_or_frac * chip.params.vdd;
  chip.and_bias_cell.assign(cfg.k_redundant, std::vector<bool>(chip.dims.and_bl, false));
  chip.or_bias_cell.assign(cfg.k_redundant, std::vector<bool>(chip.dims.or_bl, false));

  Rng rng(split_seed(cfg.seed, 0xb1a5));
  auto lrs_r = [&](uint64_t id) {
    return device::rram_resistance({chip.instance.cell_gap_nm(id, true)}, chip.rram);
  };
  for (int c = 0; c < chip.dims.and_bl; ++c) {
    if (!chip.and_bl_active[c]) continue;
    int k_c = cfg.randomize ? static_cast<int>(rng.next_below(cfg.k_redundant + 1))
                            : cfg.k_redundant;
    for (int b = 0; b < k_c; ++b) {
      chip.and_bias_cell[b][c] = true;
      int row = chip.dims.and_wl - chip.bias_rows + b;
      chip.and_r[row][c] = lrs_r(0x20000ull + static_cast<uint64_t>(row) * 64 + c);
    }
  }
  for (int b = 0; b < cfg.k_redundant; ++b) {
    chip.or_bias_cell[b][0] = true;
    int row = chip.dims.or_wl - chip.or_bias_rows + b;
    chip.or_r[row][0] = lrs_r(0x28000ull + static_cast<uint64_t>(row) * 64);
  }
  return chip;
}

magic::MagicProgram protect_redundant(const magic::MagicProgram& base, const ProtectionConfig& cfg) {
  cfg.validate();
  magic::MagicProgram prog = base;
  if (cfg.k_redundant == 0) return prog;
  Rng rng(split_seed(cfg.seed, 0xb1a6));
  uint64_t next_id = 0x30000ull;
  for (auto& gate : prog.gates) {
    int k = cfg.randomize ? static_cast<int>(rng.next_below(cfg.k_redundant + 1))
                          : cfg.k_redundant;
    for (int i = 0; i < k; ++i) {
      magic::Cell c = magic::fresh_cell(prog.instance, next_id++);
      // AND absorbs constant 1s, OR/NOR absorb constant 0s.
      c.constant_target = gate.type == magic::GateType::And ? 1 : 0;
      prog.cells.push_back(c);
      gate.inputs.push_back(static_cast<int>(prog.cells.size()) - 1);
    }
  }
  return prog;
}

sop::SopFunction protect_expand(const sop::SopFunction& f) { return sop::expand_full(f); }

int effective_redundant_fanin(int k_true, int k_redundant, const dcim::DcimParams& p,
                              const device::SelectorParams& sel, double bias_frac) {
  double swing_real = p.vdd - sel.v_threshold;
  double swing_bias = std::max(0.0, p.vdd * (1.0 - bias_frac) - sel.v_threshold);
  double weight = swing_bias / swing_real;
  return k_true + static_cast<int>(std::llround(weight * k_redundant));
}

double sample_overlap(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> pooled = a;
  pooled.insert(pooled.end(), b.begin(), b.end());
  std::sort(pooled.begin(), pooled.end());
  double lo = pooled.front(), hi = pooled.back();
  if (hi <= lo) return 1.0; // indistinguishable point masses
  double iqr = pooled[pooled.size() * 3 / 4] - pooled[pooled.size() / 4];
  int bins = 40;
  if (iqr > 0) {
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(pooled.size()));
    bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 40, 400);
  }
  auto hist = [&](const std::vector<double>& s) {
    std::vector<double> h(bins, 0.0);
    for (double x : s) {
      int bIdx = static_cast<int>((x - lo) / (hi - lo) * bins);
      h[std::clamp(bIdx, 0, bins - 1)] += 1.0 / static_cast<double>(s.size());
    }
    return h;
  };
  auto ha = hist(a), hb = hist(b);
  double ov = 0.0;
  for (int i = 0; i < bins; ++i) ov += std::min(ha[i], hb[i]);
  return ov;
}

namespace {

double supply_energy(const trace::CurrentTrace& tr, double vdd) {
  double q = 0.0;
  for (double i : tr.channel(trace::Channel::Supply)) q += -i;
  return q * tr.dt() * vdd;
}

double mean_dcim_energy(dcim::DcimChip& chip) {
  chip.reset_bl_state();
  const uint32_t npat = 1u << chip.function.variable_count();
  double sum = 0.0;
  for (uint32_t p = 0; p < npat; ++p) sum += supply_energy(run_dcim(chip, p).trace, chip.params.vdd);
  return sum / npat;
}

int dcim_lrs_cells(const dcim::DcimChip& chip) {
  int count = 0;
  double r_mid = chip.rram.r_mid();
  for (const auto& row : chip.and_r)
    for (double r : row) count += r < r_mid ? 1 : 0;
  for (const auto& row : chip.or_r)
    for (double r : row) count += r < r_mid ? 1 : 0;
  return count;
}

// Monte Carlo feature samples of a single-minterm chip, optionally padded
// with redundant bias cells, at the model's measurement window.
std::vector<double> minterm_feature_samples(int fanin, int k_red, const ProtectionConfig& pcfg,
                                            const profile::FaninModelSet& and_model,
                                            const dcim::DcimParams& params,
                                            const device::RramParams& rram,
                                            const device::SelectorParams& sel,
                                            const EvalConfig& ecfg) {
  std::vector<double> out(ecfg.n_mc);
  int n_vars = std::max(1, and_model.max_fanin());
  sop::SopFunction f(n_vars);
  sop::Minterm m;
  for (int v = 0; v < fanin; ++v) m.pos |= 1u << v;
  f.add_minterm(m);
  auto sched = dcim::make_schedule(params, rram, sel);
  for (int i = 0; i < ecfg.n_mc; ++i) {
    device::DeviceInstance inst(ecfg.variation, split_seed(ecfg.seed, 0x0bf5, i), rram);
    dcim::DcimParams p = params;
    p.functional_check = false;
    auto chip = dcim::program_dcim(f, {}, p, inst, rram, sel);
    if (k_red > 0) {
      ProtectionConfig pc = pcfg;
      pc.randomize = false;
      pc.k_redundant = k_red;
      chip = protect_redundant(chip, pc);
    }
    std::vector<int> stim(n_vars, 0);
    auto run = dcim::run_dcim(chip, stim);
    out[i] = profile::dcim_window_feature(run.trace, "and", and_model.window, sched);
  }
  return out;
}

} // namespace

OverheadReport evaluate_protection(dcim::DcimChip& original, dcim::DcimChip& protected_chip,
                                   const profile::FaninModelSet& and_model,
                                   const ProtectionConfig& pcfg, const EvalConfig& ecfg) {
  OverheadReport rep;
  const auto& f = original.function;
  const int n = f.variable_count();

  double e0 = mean_dcim_energy(original);
  double e1 = mean_dcim_energy(protected_chip);
  rep.power_delta = e1 / e0 - 1.0;

  int cells0 = dcim_lrs_cells(original);
  int cells1 = dcim_lrs_cells(protected_chip);
  rep.area_delta_cells = cells0 > 0 ? static_cast<double>(cells1 - cells0) / cells0 : 0.0;

  auto true_structure = sop::structure_of(f);
  if (pcfg.kind == ProtectionConfig::Kind::ExpandLiterals) {
    auto expanded_structure = sop::structure_of(protected_chip.function);
    int rows0 = (f.uses_complements() ? 2 * n : n) + f.minterm_count();
    int rows1 = (protected_chip.function.uses_complements() ? 2 * n : n) +
                protected_chip.function.minterm_count();
    rep.area_delta_rows = rows0 > 0 ? static_cast<double>(rows1 - rows0) / rows0 : 0.0;
    rep.re_effort_factor =
        static_cast<double>(sop::candidate_space_size(expanded_structure, n, true)) /
        static_cast<double>(sop::candidate_space_size(true_structure, n, f.uses_complements()));
    // All minterms share the full fanin; at nominal parameters their features
    // coincide and the score saturates.
    device::DeviceInstance nominal;
    auto sched = dcim::make_schedule(protected_chip.params, protected_chip.rram,
                                     protected_chip.selector);
    std::vector<double> feats;
    for (const auto& mt : protected_chip.function.minterms()) {
      sop::SopFunction single(n);
      single.add_minterm(mt);
      dcim::DcimParams p = protected_chip.params;
      p.functional_check = false;
      auto chip = dcim::program_dcim(single, protected_chip.dims, p, nominal,
                                     protected_chip.rram, protected_chip.selector);
      auto run = dcim::run_dcim(chip, std::vector<int>(n, 0));
      feats.push_back(profile::dcim_window_feature(run.trace, "and", and_model.window, sched));
    }
    double gap = *std::max_element(feats.begin(), feats.end()) -
                 *std::min_element(feats.begin(), feats.end());
    const auto* f1 = and_model.find(std::max(1, and_model.min_fanin() + 1));
    const auto* f0 = and_model.find(and_model.min_fanin());
    double unit = f1 && f0 ? std::abs(f1->mean - f0->mean) : 1.0;
    rep.obfuscation_score = std::max(0.0, 1.0 - gap / std::max(unit, 1e-30));
    return rep;
  }

  // Redundant inputs.
  rep.area_delta_rows =
      static_cast<double>(protected_chip.bias_rows + protected_chip.or_bias_rows) /
      ((f.uses_complements() ? 2 * n : n) + f.minterm_count());
  sop::StructureDescriptor observed = true_structure;
  for (auto& k : observed.and_fanins)
    k = effective_redundant_fanin(k, pcfg.k_redundant, original.params, original.selector,
                                  pcfg.bias_and_frac);
  rep.re_effort_factor = static_cast<double>(sop::candidate_space_size(observed, n, false)) /
                         static_cast<double>(sop::candidate_space_size(true_structure, n, false));
  if (rep.re_effort_factor < 1.0) rep.re_effort_factor = 1.0;

  int k_true = true_structure.and_fanins.empty() ? 1 : true_structure.and_fanins.front();
  int decoy = effective_redundant_fanin(k_true, pcfg.k_redundant, original.params,
                                        original.selector, pcfg.bias_and_frac);
  auto protected_samples = minterm_feature_samples(k_true, pcfg.k_redundant, pcfg, and_model,
                                                   original.params, original.rram,
                                                   original.selector, ecfg);
  auto decoy_samples = minterm_feature_samples(decoy, 0, pcfg, and_model, original.params,
                                               original.rram, original.selector, ecfg);
  rep.obfuscation_score = sample_overlap(protected_samples, decoy_samples);
  return rep;
}

namespace {

double mean_magic_energy(magic::MagicProgram& prog) {
  const uint32_t npat = 1u << prog.variable_count;
  double sum = 0.0;
  for (uint32_t p = 0; p < npat; ++p)
    sum += supply_energy(magic::run_program(prog, p).trace, prog.params.v_write);
  return sum / npat;
}

} // namespace

OverheadReport evaluate_protection(magic::MagicProgram& original,
                                   magic::MagicProgram& protected_prog,
                                   const ProtectionConfig& pcfg, const EvalConfig& ecfg) {
  OverheadReport rep;
  rep.power_delta = mean_magic_energy(protected_prog) / mean_magic_energy(original) - 1.0;
  int cells0 = static_cast<int>(original.cells.size());
  int cells1 = static_cast<int>(protected_prog.cells.size());
  rep.area_delta_cells = static_cast<double>(cells1 - cells0) / cells0;
  rep.area_delta_rows =
      original.input_cell_count > 0
          ? static_cast<double>(cells1 - cells0) / original.input_cell_count
          : 0.0;

  const auto& f = original.function;
  auto true_structure = sop::structure_of(f);
  sop::StructureDescriptor observed = true_structure;
  if (pcfg.kind == ProtectionConfig::Kind::RedundantInputs) {
    for (auto& k : observed.and_fanins) k = std::min(f.variable_count(), k + pcfg.k_redundant);
  } else {
    observed = sop::structure_of(protected_prog.function);
  }
  bool compl_obs = pcfg.kind == ProtectionConfig::Kind::ExpandLiterals;
  rep.re_effort_factor =
      static_cast<double>(sop::candidate_space_size(observed, f.variable_count(), compl_obs)) /
      static_cast<double>(
          sop::candidate_space_size(true_structure, f.variable_count(), f.uses_complements()));
  if (rep.re_effort_factor < 1.0) rep.re_effort_factor = 1.0;

  // Redundant MAGIC inputs are electrically real literals: the protected gate
  // is the decoy gate. Sample both op-time distributions and overlap them.
  if (pcfg.kind == ProtectionConfig::Kind::RedundantInputs && !original.gates.empty()) {
    int k_true = static_cast<int>(original.gates.front().inputs.size());
    int decoy = k_true + pcfg.k_redundant;
    std::vector<double> prot(ecfg.n_mc), dec(ecfg.n_mc);
    for (int i = 0; i < ecfg.n_mc; ++i) {
      device::DeviceInstance inst(ecfg.variation, split_seed(ecfg.seed, 0x0bf6, i), original.rram);
      magic::MagicParams mp = original.params;
      mp.functional_check = false;
      auto base = magic::single_gate_program(original.gates.front().type, k_true, mp, inst,
                                             original.rram);
      ProtectionConfig pc = pcfg;
      pc.randomize = false;
      auto padded = protect_redundant(base, pc);
      auto run = magic::run_program(padded, (1u << padded.variable_count) - 1);
      prot[i] = run.gate_results.front().op_time;
      auto dchip = magic::single_gate_program(original.gates.front().type, decoy, mp, inst,
                                              original.rram);
      auto drun = magic::run_program(dchip, (1u << dchip.variable_count) - 1);
      dec[i] = drun.gate_results.front().op_time;
    }
    rep.obfuscation_score = sample_overlap(prot, dec);
  } else {
    rep.obfuscation_score = 1.0; // expanded gates are identical by construction
  }
  return rep;
}

std::string overhead_to_json(const OverheadReport& r) {
  nlohmann::json j;
  j["area_delta_cells"] = r.area_delta_cells;
  j["area_delta_rows"] = r.area_delta_rows;
  j["power_delta"] = r.power_delta;
  j["re_effort_factor"] = r.re_effort_factor;
  j["obfuscation_score"] = r.obfuscation_score;
  return j.dump(2);
}

} // namespace scare::protect
