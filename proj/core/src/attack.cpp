#include "scare/attack.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>

#include "json.hpp"

namespace scare::attack {

void FaninInferenceParams::validate() const {
  if (!(v_write > 0) || !(r_lrs > 0) || !(r_hrs > 0) || max_in < 1 || !(r_lrs < r_hrs))
    throw std::invalid_argument("bad fanin-inference parameters");
}

double nor_rule_fanin(double current, const FaninInferenceParams& p) {
  return p.r_hrs * current / p.v_write;
}

double or_rule_fanin(double current, const FaninInferenceParams& p) {
  double x = p.r_hrs * current / p.v_write;
  if (x >= 1.0) return static_cast<double>(p.max_in);
  return x / (1.0 - x);
}

double and_rule_fanin(double current, const FaninInferenceParams& p) {
  return p.v_write / (p.r_hrs * current) - 1.0;
}

Classification classify_fanin(double feature, const profile::FaninModelSet& models, double rho) {
  if (models.fanins.empty()) throw std::invalid_argument("empty fanin model");
  double scale = 0.0;
  for (const auto& f : models.fanins) scale = std::max(scale, std::abs(f.mean));
  bool all_degenerate = true;
  for (const auto& f : models.fanins)
    if (f.stddev > 1e-9 * scale) all_degenerate = false;

  Classification cls;
  double min_sigmas = std::numeric_limits<double>::infinity();
  if (all_degenerate) {
    // Zero-variation models degrade to nearest-mean matching.
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& f : models.fanins) {
      double d = std::abs(feature - f.mean);
      cls.likelihoods.emplace_back(f.fanin, -d);
      if (d < best_d) {
        best_d = d;
        cls.best_fanin = f.fanin;
      }
      min_sigmas = std::min(min_sigmas, d / std::max(1e-12, 1e-6 * scale));
    }
    for (const auto& f : models.fanins)
      if (std::abs(feature - f.mean) <= best_d + 1e-9 * scale) cls.ambiguity.push_back(f.fanin);
  } else {
    double best_l = -1.0;
    for (const auto& f : models.fanins) {
      double sigma = std::max(f.stddev, 1e-9 * scale);
      double z = (feature - f.mean) / sigma;
      double l = std::exp(-0.5 * z * z) / sigma;
      cls.likelihoods.emplace_back(f.fanin, l);
      if (l > best_l) {
        best_l = l;
        cls.best_fanin = f.fanin;
      }
      min_sigmas = std::min(min_sigmas, std::abs(z));
    }
    for (const auto& [fanin, l] : cls.likelihoods)
      if (l >= rho * best_l) cls.ambiguity.push_back(fanin);
  }
  if (min_sigmas > 6.0)
    throw OutOfModelError("feature lies more than 6 sigma outside every fanin model");
  std::sort(cls.ambiguity.begin(), cls.ambiguity.end());
  return cls;
}

ChipOracle::Run ChipOracle::run(uint32_t pattern) {
  seen_.insert(pattern);
  Run r = run_impl(pattern);
  output_memo_[pattern] = r.output;
  return r;
}

int ChipOracle::output(uint32_t pattern) {
  auto it = output_memo_.find(pattern);
  if (it != output_memo_.end()) return it->second;
  return run(pattern).output;
}

ChipOracle::Run DcimChipOracle::run_impl(uint32_t pattern) {
  auto r = dcim::run_dcim(chip_, pattern);
  return {std::move(r.trace), r.outputs[0]};
}

ChipOracle::Run MagicChipOracle::run_impl(uint32_t pattern) {
  auto r = magic::run_program(prog_, pattern);
  return {std::move(r.trace), r.output};
}

const char* paradigm_name(Paradigm p) {
  switch (p) {
    case Paradigm::Dcim: return "dcim";
    case Paradigm::Magic: return "magic";
    case Paradigm::Unknown: return "unknown";
  }
  return "?";
}

Paradigm identify_paradigm(const trace::CurrentTrace& tr) {
  auto events = trace::detect_events(tr);
  if (events.empty()) return Paradigm::Unknown;
  int sharp = 0, plateaus = 0, bipolar = 0;
  for (const auto& e : events) {
    if (e.kind == trace::EventKind::ShortCircuitPeak) ++bipolar;
    if (e.kind == trace::EventKind::SharpChange) ++sharp;
    if (e.kind == trace::EventKind::SteadyPlateau && e.window.width() >= 5e-9) ++plateaus;
  }
  if (bipolar > 0) return Paradigm::Dcim; // CMOS buffer/SA short-circuit signature
  if (sharp >= 1 || plateaus >= 2) return Paradigm::Magic;
  return Paradigm::Unknown;
}

namespace {

constexpr double kEps = 1e-30;

void enumerate_multisets(int size, int lo, int hi, std::vector<int>& cur,
                         const std::function<void(const std::vector<int>&)>& fn) {
  if (static_cast<int>(cur.size()) == size) {
    fn(cur);
    return;
  }
  int start = cur.empty() ? lo : cur.back();
  for (int v = start; v <= hi; ++v) {
    cur.push_back(v);
    enumerate_multisets(size, lo, hi, cur, fn);
    cur.pop_back();
  }
}

struct CompositionTable {
  std::vector<std::pair<double, std::vector<int>>> entries; // (predicted total, multiset)

  const std::vector<int>& nearest(double value, double* err = nullptr) const {
    auto it = std::lower_bound(entries.begin(), entries.end(), value,
                               [](const auto& e, double v) { return e.first < v; });
    const auto pick = [&](auto a, auto b) {
      if (a == entries.end()) return b;
      if (b == entries.end()) return a;
      return std::abs(a->first - value) <= std::abs(b->first - value) ? a : b;
    };
    auto best = pick(it == entries.begin() ? it : it - 1, it == entries.end() ? it - 1 : it);
    if (err) *err = std::abs(best->first - value);
    return best->second;
  }
};

// Additive composition of per-fanin model means over a fixed minterm count.
// mu(0) anchors the shared enable-buffer and residual floor, so the predicted
// total for fanins {f_j} is mu0 + sum_j (mu(f_j) - mu0).
CompositionTable build_composition_table(const profile::FaninModelSet& and_model, int size,
                                         int lo, int hi) {
  const auto* f0 = and_model.find(0);
  if (!f0) throw std::invalid_argument("AND model must include the fanin-0 baseline");
  double mu0 = f0->mean;
  CompositionTable tab;
  std::vector<int> cur;
  enumerate_multisets(size, lo, hi, cur, [&](const std::vector<int>& ms) {
    double total = mu0;
    for (int f : ms) {
      const auto* st = and_model.find(f);
      if (!st) throw std::invalid_argument("AND model missing fanin " + std::to_string(f));
      total += st->mean - mu0;
    }
    tab.entries.emplace_back(total, ms);
  });
  std::sort(tab.entries.begin(), tab.entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  return tab;
}

dcim::PhaseSchedule attack_schedule(const AttackConfig& cfg) {
  return dcim::make_schedule(cfg.dcim, cfg.rram, cfg.selector);
}

std::string fanins_to_string(const std::vector<int>& v) {
  std::string s = "{";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(v[i]);
  }
  return s + "}";
}

} // namespace

AttackReport attack_dcim_m1(ChipOracle& oracle, const profile::FaninModelSet& or_model,
                            const profile::FaninModelSet& and_model, const AttackConfig& cfg) {
  const int n = oracle.input_count();
  auto sched = attack_schedule(cfg);
  AttackReport report;
  report.architecture = "dcim";
  report.brute_force_patterns = 1ull << n;

  const uint32_t all_ones = (1u << n) - 1;
  auto run1 = oracle.run(all_ones);
  double or_feat = profile::dcim_window_feature(run1.trace, "or", or_model.window, sched);
  Classification or_cls = classify_fanin(or_feat, or_model, cfg.rho);
  int m = or_cls.best_fanin;
  if (or_cls.ambiguity.size() > 1)
    report.ambiguity_notes.push_back("or fanin ambiguity " + fanins_to_string(or_cls.ambiguity));
  report.structure.or_fanin = m;
  if (m == 0) {
    report.patterns_used = oracle.distinct_patterns();
    return report;
  }

  auto run0 = oracle.run(0);
  double and_total = profile::dcim_window_feature(run0.trace, "and", and_model.window, sched);
  auto table = build_composition_table(and_model, m, 1, cfg.rules.max_in);
  double err = 0.0;
  report.structure.and_fanins = table.nearest(and_total, &err);
  // Report near-equivalent decompositions the way an adversary would.
  const auto* f0 = and_model.find(0);
  const auto* f1 = and_model.find(1);
  double unit = f1 && f0 ? std::abs(f1->mean - f0->mean) : std::abs(and_total);
  for (const auto& [total, ms] : table.entries) {
    if (ms == report.structure.and_fanins) continue;
    if (std::abs(total - and_total) <= std::max(err * 2.0, cfg.rho * unit) &&
        std::abs(total - and_total) < 0.5 * unit)
      report.ambiguity_notes.push_back("alternative composition " + fanins_to_string(ms));
  }
  report.patterns_used = oracle.distinct_patterns();
  return report;
}

AttackReport attack_dcim_m2(ChipOracle& oracle, const profile::FaninModelSet& or_model,
                            const profile::FaninModelSet& and_model,
                            const profile::FaninModelSet& precharge_model,
                            const AttackConfig& cfg) {
  const int n = oracle.input_count();
  const uint32_t npat = 1u << n;
  auto sched = attack_schedule(cfg);
  AttackReport report;
  report.architecture = "dcim";
  report.brute_force_patterns = npat;

  // Probe patterns in numeric order until the OR cycle sits at leakage level.
  std::vector<double> or_feats(npat, 0.0), and_feats(npat, 0.0);
  std::vector<bool> probed(npat, false);
  int64_t zero_pattern = -1;
  for (uint32_t p = 0; p < npat; ++p) {
    auto run = oracle.run(p);
    or_feats[p] = profile::dcim_window_feature(run.trace, "or", or_model.window, sched);
    and_feats[p] = profile::dcim_window_feature(run.trace, "and", and_model.window, sched);
    probed[p] = true;
    if (classify_fanin(or_feats[p], or_model, cfg.rho).best_fanin == 0) {
      zero_pattern = p;
      break;
    }
  }
  if (zero_pattern < 0)
    throw BudgetError("no input pattern drives every minterm to 0 within the 2^n budget");

  // With all minterms 0 every active BL rests at the discharge floor; the
  // next precharge has to lift them all, which meters the BL count.
  oracle.run(static_cast<uint32_t>(zero_pattern));
  auto refill = oracle.run(static_cast<uint32_t>(zero_pattern));
  double pre_feat =
      profile::dcim_window_feature(refill.trace, "precharge", precharge_model.window, sched);
  Classification pre_cls = classify_fanin(pre_feat, precharge_model, cfg.rho);
  int m = pre_cls.best_fanin;
  report.active_bls = m;
  if (pre_cls.ambiguity.size() > 1)
    report.ambiguity_notes.push_back("active BL ambiguity " + fanins_to_string(pre_cls.ambiguity));

  // Cross-check against the capacitor-charge model: Q = C * (vdd - floor) per BL.
  {
    trace::MeasurementWindow pre_w{0.0, sched.precharge_end};
    double q = -trace::mean_current(refill.trace, pre_w, trace::Channel::Supply) * pre_w.width();
    double floor_v = cfg.selector.v_threshold;
    double per_bl = cfg.dcim.c_bl * (cfg.dcim.vdd - floor_v);
    int m_energy = static_cast<int>(std::llround(q / per_bl));
    if (m_energy != m)
      report.ambiguity_notes.push_back("charge-based BL count " + std::to_string(m_energy) +
                                       " disagrees with model count " + std::to_string(m));
  }

  report.structure.or_fanin = m;
  if (m == 0) {
    report.patterns_used = oracle.distinct_patterns();
    return report;
  }

  // Finish probing, then read per-pattern unsatisfied-literal multisets from
  // the AND-cycle discharge and aggregate them into the fanin multiset.
  for (uint32_t p = 0; p < npat; ++p) {
    if (probed[p]) continue;
    auto run = oracle.run(p);
    or_feats[p] = profile::dcim_window_feature(run.trace, "or", or_model.window, sched);
    and_feats[p] = profile::dcim_window_feature(run.trace, "and", and_model.window, sched);
  }
  auto table = build_composition_table(and_model, m, 0, cfg.rules.max_in);
  double sum_unsat = 0.0;
  int64_t zero_events = 0;
  int max_unsat = 0;
  for (uint32_t p = 0; p < npat; ++p) {
    const auto& u = table.nearest(and_feats[p]);
    for (int v : u) {
      sum_unsat += v;
      if (v == 0) ++zero_events;
      max_unsat = std::max(max_unsat, v);
    }
  }
  // sum over patterns of u_j(p) = f_j * 2^(n-1); satisfied events count
  // sum_j 2^(n-f_j).
  int64_t total_literals = std::llround(sum_unsat / static_cast<double>(npat / 2));
  std::vector<std::vector<int>> candidates;
  std::vector<int> cur;
  enumerate_multisets(m, 1, std::min(n, cfg.rules.max_in), cur, [&](const std::vector<int>& ms) {
    int64_t sum = std::accumulate(ms.begin(), ms.end(), int64_t{0});
    if (sum != total_literals) return;
    int64_t zeros = 0;
    for (int f : ms) zeros += int64_t{1} << (n - f);
    if (zeros != zero_events) return;
    if (*std::max_element(ms.begin(), ms.end()) != max_unsat) return;
    candidates.push_back(ms);
  });
  if (candidates.empty())
    throw ContradictionError("no fanin multiset matches the probed aggregate readings");
  report.structure.and_fanins = candidates.front();
  for (size_t i = 1; i < candidates.size(); ++i)
    report.ambiguity_notes.push_back("alternative fanin multiset " + fanins_to_string(candidates[i]));
  report.patterns_used = oracle.distinct_patterns();
  return report;
}

namespace {

struct MagicSlots {
  std::vector<trace::MeasurementWindow> init; // reset, set
  std::vector<trace::MeasurementWindow> gates;
  double baseline_ground = 0.0;
};

// The slot grid is architecture protocol, public to the adversary.
MagicSlots segment_magic_trace(const trace::CurrentTrace& tr, const magic::MagicParams& p) {
  MagicSlots s;
  double t = p.t_idle;
  s.init.push_back({t, t + p.t_init_slot});
  t += p.t_init_slot + p.t_idle;
  s.init.push_back({t, t + p.t_init_slot});
  t += p.t_init_slot + p.t_idle;
  while (t + p.t_slot <= tr.duration() + 1e-12) {
    s.gates.push_back({t, t + p.t_slot});
    t += p.t_slot + p.t_idle;
  }
  trace::MeasurementWindow quiet{0.0, p.t_idle * 0.9};
  s.baseline_ground = trace::mean_current(tr, quiet, trace::Channel::Ground);
  return s;
}

double slot_tail_current(const trace::CurrentTrace& tr, const trace::MeasurementWindow& slot,
                         double baseline) {
  trace::MeasurementWindow tail{slot.start + 0.8 * slot.width(), slot.end};
  return trace::mean_current(tr, tail, trace::Channel::Ground) - baseline;
}

struct MagicSegment {
  magic::GateType type;
  int fanin = 0;
  bool ambiguous = false;
  int model_fanin = -1;
};

MagicSegment classify_magic_segment(double current, const AttackConfig& cfg,
                                    const std::vector<const profile::FaninModelSet*>& models) {
  const auto& r = cfg.rules;
  MagicSegment seg;
  // Rule-band boundaries: geometric means между adjacent gate families.
  double and_max = r.v_write / (3.0 * r.r_hrs);       // AND at n=2
  double or_min = r.v_write / (2.0 * r.r_hrs);        // OR at n=1
  double or_max = r.v_write * 8.0 / (9.0 * r.r_hrs);  // OR at n=8
  double nor_min = 2.0 * r.v_write / r.r_hrs;         // NOR at n=2
  double and_or_split = std::sqrt(and_max * or_min);
  double or_nor_split = std::sqrt(or_max * nor_min);
  double estimate;
  if (current < and_or_split) {
    seg.type = magic::GateType::And;
    estimate = and_rule_fanin(current, r);
  } else if (current < or_nor_split) {
    seg.type = magic::GateType::Or;
    estimate = or_rule_fanin(current, r);
  } else {
    seg.type = magic::GateType::Nor;
    estimate = nor_rule_fanin(current, r);
  }
  seg.fanin = std::clamp(static_cast<int>(std::llround(estimate)), 1, r.max_in);

  for (const auto* model : models) {
    if (!model) continue;
    if ((seg.type == magic::GateType::And && model->gate != "and") ||
        (seg.type == magic::GateType::Or && model->gate != "or") ||
        (seg.type == magic::GateType::Nor && model->gate != "nor"))
      continue;
    double best_d = std::numeric_limits<double>::infinity();
    for (const auto& f : model->fanins) {
      double d = std::abs(f.mean - current);
      if (d < best_d) {
        best_d = d;
        seg.model_fanin = f.fanin;
      }
    }
    if (seg.model_fanin >= 0 && std::abs(seg.model_fanin - seg.fanin) > 1) seg.ambiguous = true;
  }
  return seg;
}

sop::StructureDescriptor structure_from_segments(const std::vector<MagicSegment>& segs,
                                                 std::vector<std::string>* notes) {
  sop::StructureDescriptor s;
  if (segs.empty()) return s;
  std::vector<int> and_fanins;
  int or_fanin = -1;
  for (size_t i = 0; i < segs.size(); ++i) {
    if (segs[i].type == magic::GateType::And) {
      and_fanins.push_back(segs[i].fanin);
    } else if (segs[i].type == magic::GateType::Or && i + 1 == segs.size()) {
      or_fanin = segs[i].fanin;
    } else if (notes) {
      notes->push_back("unexpected gate order in slot " + std::to_string(i));
    }
  }
  if (or_fanin < 0) {
    // single-minterm program: one AND and no OR stage
    s.or_fanin = static_cast<int>(and_fanins.size());
    s.and_fanins = and_fanins;
    return s;
  }
  s.or_fanin = or_fanin;
  int singles = or_fanin - static_cast<int>(and_fanins.size());
  if (singles < 0) {
    if (notes) notes->push_back("more AND slots than OR fanin: structure inconsistent");
    singles = 0;
  }
  for (int i = 0; i < singles; ++i) and_fanins.push_back(1);
  std::sort(and_fanins.begin(), and_fanins.end());
  s.and_fanins = and_fanins;
  return s;
}

} // namespace

AttackReport attack_magic_m1(ChipOracle& oracle,
                             const std::vector<const profile::FaninModelSet*>& current_models,
                             const AttackConfig& cfg) {
  AttackReport report;
  report.architecture = "magic";
  report.brute_force_patterns = 1ull << oracle.input_count();

  auto run = oracle.run(0); // every input literal held at logical 0
  auto slots = segment_magic_trace(run.trace, cfg.magic);
  std::vector<MagicSegment> segs;
  for (const auto& w : slots.gates) {
    double current = slot_tail_current(run.trace, w, slots.baseline_ground);
    MagicSegment seg = classify_magic_segment(current, cfg, current_models);
    segs.push_back(seg);
    std::string label = std::string(magic::gate_type_name(seg.type)) + std::to_string(seg.fanin);
    report.gate_sequence.push_back(label);
    if (seg.ambiguous)
      report.ambiguity_notes.push_back("ambiguous segment " + label + ": rule and model estimates disagree");
  }
  report.structure = structure_from_segments(segs, &report.ambiguity_notes);
  report.patterns_used = oracle.distinct_patterns();
  return report;
}

AttackReport attack_magic_m2(ChipOracle& oracle, const AttackConfig& cfg) {
  const int n = oracle.input_count();
  AttackReport report;
  report.architecture = "magic";
  report.brute_force_patterns = 1ull << n;
  report.complement_flags.assign(n, 0);

  const double i_set_unit = cfg.rules.v_write / cfg.rules.r_lrs;
  const double i_reset_unit = cfg.rules.v_write / cfg.rules.r_hrs;
  auto counts = [&](const trace::CurrentTrace& tr) {
    auto slots = segment_magic_trace(tr, cfg.magic);
    double reset_amp = slot_tail_current(tr, slots.init[0], slots.baseline_ground);
    double set_amp = slot_tail_current(tr, slots.init[1], slots.baseline_ground);
    int resets = static_cast<int>(std::llround(reset_amp / i_reset_unit));
    int sets = static_cast<int>(std::llround(set_amp / i_set_unit));
    return std::pair<int, int>{resets, sets};
  };

  const uint32_t base = (1u << n) - 1;
  auto run_base = oracle.run(base);
  auto [r0, s0] = counts(run_base.trace);
  int lrs_cells = s0; // cells switched 0 -> 1 on the pristine chip

  for (int v = 0; v < n; ++v) {
    auto flip = oracle.run(base ^ (1u << v));
    auto [resets, sets] = counts(flip.trace);
    int delta_zeros = resets - sets;
    report.complement_flags[v] = delta_zeros > 0 ? 1 : (delta_zeros < 0 ? -1 : 0);
    oracle.run(base); // restore the baseline state before the next flip
  }

  // All stored literals read 0 when each input matches its inverted polarity;
  // the per-slot analysis then sees the pure HRS networks.
  uint32_t p_star = 0;
  for (int v = 0; v < n; ++v)
    if (report.complement_flags[v] < 0) p_star |= 1u << v;
  auto run_star = oracle.run(p_star);
  auto slots = segment_magic_trace(run_star.trace, cfg.magic);
  std::vector<MagicSegment> segs;
  for (const auto& w : slots.gates) {
    double current = slot_tail_current(run_star.trace, w, slots.baseline_ground);
    segs.push_back(classify_magic_segment(current, cfg, {}));
    report.gate_sequence.push_back(std::string(magic::gate_type_name(segs.back().type)) +
                                   std::to_string(segs.back().fanin));
  }
  report.structure = structure_from_segments(segs, &report.ambiguity_notes);
  report.ambiguity_notes.push_back("init write: " + std::to_string(lrs_cells) +
                                   " cells switched to LRS at the all-ones baseline, " +
                                   std::to_string(r0) + " reset");
  report.patterns_used = oracle.distinct_patterns();
  return report;
}

namespace {

using TruthTable = std::array<uint64_t, 4>; // up to 2^8 rows

TruthTable minterm_table(const sop::Minterm& m, int n) {
  TruthTable t{};
  const uint32_t rows = 1u << n;
  for (uint32_t p = 0; p < rows; ++p)
    if (m.satisfied_by(p)) t[p >> 6] |= 1ull << (p & 63);
  return t;
}

void or_into(TruthTable& a, const TruthTable& b) {
  for (size_t i = 0; i < a.size(); ++i) a[i] |= b[i];
}

bool table_bit(const TruthTable& t, uint32_t p) { return (t[p >> 6] >> (p & 63)) & 1; }

std::vector<sop::Minterm> candidate_minterms(int n, int fanin, bool allow_complements,
                                             const std::vector<int>& flags) {
  std::vector<sop::Minterm> out;
  std::vector<int> vars(n);
  std::iota(vars.begin(), vars.end(), 0);
  std::vector<int> comb(fanin);
  std::function<void(int, int)> rec = [&](int start, int depth) {
    if (depth == fanin) {
      // polarity assignment per chosen variable
      int k = fanin;
      for (uint32_t pol = 0; pol < (1u << k); ++pol) {
        sop::Minterm m;
        bool ok = true;
        for (int i = 0; i < k; ++i) {
          int v = comb[i];
          bool comp = (pol >> i) & 1;
          if (!allow_complements && comp) ok = false;
          if (!flags.empty()) {
            if (flags[v] == 0) ok = false; // flip test says the variable is unused
            if (flags[v] > 0 && comp) ok = false;
            if (flags[v] < 0 && !comp) ok = false;
          }
          if (!ok) break;
          (comp ? m.neg : m.pos) |= 1u << v;
        }
        if (ok) out.push_back(m);
        if (!allow_complements && flags.empty()) break; // single polarity assignment
      }
      return;
    }
    for (int v = start; v < n; ++v) {
      comb[depth] = v;
      rec(v + 1, depth + 1);
    }
  };
  if (fanin > 0) rec(0, 0);
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

struct VersionSpace {
  std::vector<std::vector<sop::Minterm>> functions;
  std::vector<TruthTable> tables;
};

// Enumerate candidate functions consistent with the fanin multiset; bail out
// when the space exceeds the cap.
bool build_version_space(int n, const sop::StructureDescriptor& structure, bool allow_complements,
                         const std::vector<int>& flags, uint64_t cap, VersionSpace& vs) {
  std::map<int, int> fanin_counts;
  for (int f : structure.and_fanins) fanin_counts[f]++;
  std::vector<std::pair<std::vector<sop::Minterm>, int>> groups;
  double log_total = 0.0;
  for (auto& [fanin, count] : fanin_counts) {
    auto cands = candidate_minterms(n, fanin, allow_complements, flags);
    if (static_cast<int>(cands.size()) < count) return true; // contradiction caught later
    double log_choose = 0.0;
    for (int i = 0; i < count; ++i)
      log_choose += std::log(static_cast<double>(cands.size() - i) / (i + 1));
    log_total += log_choose;
    groups.emplace_back(std::move(cands), count);
  }
  if (log_total > std::log(static_cast<double>(cap))) return false;

  std::vector<sop::Minterm> current;
  std::vector<TruthTable> table_stack{TruthTable{}};
  std::function<void(size_t)> rec_group = [&](size_t gi) {
    if (static_cast<uint64_t>(vs.functions.size()) > cap) return;
    if (gi == groups.size()) {
      vs.functions.push_back(current);
      vs.tables.push_back(table_stack.back());
      return;
    }
    const auto& [cands, count] = groups[gi];
    std::vector<int> pick(count);
    std::function<void(int, int)> rec_pick = [&](int start, int depth) {
      if (static_cast<uint64_t>(vs.functions.size()) > cap) return;
      if (depth == count) {
        rec_group(gi + 1);
        return;
      }
      for (int i = start; i < static_cast<int>(cands.size()); ++i) {
        current.push_back(cands[i]);
        TruthTable t = table_stack.back();
        or_into(t, minterm_table(cands[i], n));
        table_stack.push_back(t);
        rec_pick(i + 1, depth + 1);
        table_stack.pop_back();
        current.pop_back();
      }
    };
    rec_pick(0, 0);
  };
  rec_group(0);
  return static_cast<uint64_t>(vs.functions.size()) <= cap;
}

} // namespace

ExtractionResult extract_function(ChipOracle& oracle, const sop::StructureDescriptor& structure,
                                  bool allow_complements, const std::vector<int>& complement_flags,
                                  const AttackConfig& cfg) {
  const int n = oracle.input_count();
  const uint32_t npat = 1u << n;
  const uint64_t before = oracle.distinct_patterns();
  if (static_cast<int>(structure.and_fanins.size()) != structure.or_fanin)
    throw std::invalid_argument("structure descriptor is inconsistent");
  for (int f : structure.and_fanins)
    if (f < 1 || f > n) throw std::invalid_argument("structure fanin outside the variable count");

  if (structure.or_fanin == 0)
    return {sop::SopFunction(n), 0};

  VersionSpace vs;
  bool enumerated = build_version_space(n, structure, allow_complements, complement_flags,
                                        cfg.version_space_cap, vs);

  if (enumerated) {
    if (vs.functions.empty())
      throw ContradictionError("no candidate function matches the recovered structure");
    std::vector<char> alive(vs.functions.size(), 1);
    std::vector<char> tried(npat, 0);
    size_t alive_count = vs.functions.size();
    auto first_alive = [&]() -> size_t {
      for (size_t i = 0; i < alive.size(); ++i)
        if (alive[i]) return i;
      return alive.size();
    };
    for (;;) {
      // Stop once every surviving candidate computes the same truth table.
      size_t f0 = first_alive();
      bool unique = true;
      for (size_t i = f0 + 1; i < alive.size() && unique; ++i)
        if (alive[i] && vs.tables[i] != vs.tables[f0]) unique = false;
      if (unique) {
        std::vector<sop::Minterm> ms = vs.functions[f0];
        std::sort(ms.begin(), ms.end());
        return {sop::SopFunction(n, ms), oracle.distinct_patterns() - before};
      }
      // Greedy max-entropy pattern: maximize the worst-case split.
      uint32_t best_p = 0;
      int64_t best_score = -1;
      for (uint32_t p = 0; p < npat; ++p) {
        if (tried[p]) continue;
        int64_t ones = 0;
        for (size_t i = 0; i < alive.size(); ++i)
          if (alive[i] && table_bit(vs.tables[i], p)) ++ones;
        int64_t score = std::min(ones, static_cast<int64_t>(alive_count) - ones);
        if (score > best_score) {
          best_score = score;
          best_p = p;
        }
      }
      if (best_score <= 0) {
        // No untried pattern separates the candidates; tables must be equal.
        std::vector<sop::Minterm> ms = vs.functions[f0];
        std::sort(ms.begin(), ms.end());
        return {sop::SopFunction(n, ms), oracle.distinct_patterns() - before};
      }
      tried[best_p] = 1;
      bool bit = oracle.output(best_p) != 0;
      for (size_t i = 0; i < alive.size(); ++i) {
        if (alive[i] && table_bit(vs.tables[i], best_p) != bit) {
          alive[i] = 0;
          --alive_count;
        }
      }
      if (alive_count == 0)
        throw ContradictionError("chip outputs contradict the recovered structure");
    }
  }

  // Version space too large: adaptive monotone extraction. Complemented
  // variables are flipped into a monotone coordinate system first (possible
  // whenever polarity is known per variable, e.g. from attack model 2).
  uint32_t neg_mask = 0;
  if (allow_complements) {
    if (complement_flags.empty())
      throw ContradictionError("cannot extract a complemented function of this size without polarity flags");
    for (int v = 0; v < n; ++v)
      if (complement_flags[v] < 0) neg_mask |= 1u << v;
  }
  auto q = [&](uint32_t p) { return oracle.output(p ^ neg_mask); };

  std::vector<sop::Minterm> found;
  auto covered = [&](uint32_t p) {
    for (const auto& m : found) {
      uint32_t lits = m.pos | m.neg; // in transformed coordinates pos only
      (void)lits;
      if ((p & m.pos) == m.pos) return true;
    }
    return false;
  };
  std::vector<uint32_t> order(npat);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [](uint32_t a, uint32_t b) {
    return std::popcount(a) > std::popcount(b);
  });
  for (uint32_t p : order) {
    if (covered(p) || !q(p)) continue;
    uint32_t cur = p;
    for (int v = 0; v < n; ++v) {
      uint32_t bit = 1u << v;
      if ((cur & bit) && q(cur & ~bit)) cur &= ~bit;
    }
    found.push_back({cur, 0});
    if (static_cast<int>(found.size()) > structure.or_fanin)
      throw ContradictionError("chip implements more prime minterms than the recovered structure");
  }
  std::vector<int> sizes;
  for (const auto& m : found) sizes.push_back(m.fanin());
  std::sort(sizes.begin(), sizes.end());
  if (sizes != structure.and_fanins)
    throw ContradictionError("extracted minterm sizes disagree with the recovered structure");
  // Map back out of the monotone coordinates.
  std::vector<sop::Minterm> ms;
  for (const auto& m : found) {
    sop::Minterm r;
    r.pos = m.pos & ~neg_mask;
    r.neg = m.pos & neg_mask;
    ms.push_back(r);
  }
  std::sort(ms.begin(), ms.end());
  return {sop::SopFunction(n, ms), oracle.distinct_patterns() - before};
}

std::string report_to_json(const AttackReport& r) {
  nlohmann::json j;
  j["architecture"] = r.architecture;
  j["structure"] = {{"or_fanin", r.structure.or_fanin}, {"and_fanins", r.structure.and_fanins}};
  if (!r.complement_flags.empty()) j["complement_flags"] = r.complement_flags;
  if (r.active_bls >= 0) j["active_bls"] = r.active_bls;
  if (r.has_function) j["recovered_function"] = sop::format_function(r.recovered_function);
  j["patterns_used"] = r.patterns_used;
  j["brute_force_patterns"] = r.brute_force_patterns;
  j["ambiguity_notes"] = r.ambiguity_notes;
  if (!r.gate_sequence.empty()) j["gate_sequence"] = r.gate_sequence;
  return j.dump(2);
}

} // namespace scare::attack
