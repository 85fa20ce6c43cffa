#include "scare/profile.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"
#include "scare/rng.hpp"

namespace scare::profile {

const char* architecture_name(Architecture a) { return a == Architecture::Dcim ? "dcim" : "magic"; }

Architecture architecture_from_name(const std::string& s) {
  if (s == "dcim") return Architecture::Dcim;
  if (s == "magic") return Architecture::Magic;
  throw std::invalid_argument("unknown architecture: " + s);
}

const char* feature_kind_name(FeatureKind k) {
  switch (k) {
    case FeatureKind::WindowMeanCurrent: return "window_mean_current";
    case FeatureKind::OpTime: return "op_time";
    case FeatureKind::PrechargeCurrent: return "precharge_current";
    case FeatureKind::InitWriteCurrent: return "init_write_current";
  }
  return "?";
}

static FeatureKind feature_kind_from_name(const std::string& s) {
  for (FeatureKind k : {FeatureKind::WindowMeanCurrent, FeatureKind::OpTime,
                        FeatureKind::PrechargeCurrent, FeatureKind::InitWriteCurrent})
    if (s == feature_kind_name(k)) return k;
  throw std::invalid_argument("unknown feature kind: " + s);
}

double FaninStats::cdf(double x) const {
  std::vector<double> sorted = samples;
  std::sort(sorted.begin(), sorted.end());
  auto it = std::upper_bound(sorted.begin(), sorted.end(), x);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

const FaninStats* FaninModelSet::find(int fanin) const {
  for (const auto& f : fanins)
    if (f.fanin == fanin) return &f;
  return nullptr;
}

int FaninModelSet::min_fanin() const { return fanins.empty() ? 0 : fanins.front().fanin; }
int FaninModelSet::max_fanin() const { return fanins.empty() ? 0 : fanins.back().fanin; }

namespace {

template <class F>
void parallel_for(int n, int jobs, F&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  auto worker = [&] {
    for (;;) {
      int i = next.fetch_add(1);
      if (i >= n) return;
      fn(i);
    }
  };
  int workers = std::min(jobs, n);
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
}

double default_vdd(Architecture arch) { return arch == Architecture::Dcim ? 1.2 : 2.4; }

// Calibration target: a chip exercising exactly one gate of the given fanin.
sop::SopFunction gate_function(Architecture arch, const std::string& gate, int fanin, int n_vars) {
  sop::SopFunction f(n_vars);
  if (arch == Architecture::Dcim && gate == "and") {
    sop::Minterm m; // fanin 0 keeps an active BL with no literals
    for (int v = 0; v < fanin; ++v) m.pos |= 1u << v;
    f.add_minterm(m);
    return f;
  }
  // OR gate of k minterms / precharge with k active BLs.
  for (int v = 0; v < fanin; ++v) f.add_minterm({1u << v, 0});
  return f;
}

struct FeaturePlan {
  FeatureKind kind = FeatureKind::WindowMeanCurrent;
  trace::Channel channel = trace::Channel::Ground;
  double sign = 1.0;
  double region_start = 0.0;
  double region_end = 0.0;
  bool windowed = true;
};

FeaturePlan make_plan(const CalibrationConfig& cfg, double vdd) {
  FeaturePlan plan;
  if (cfg.arch == Architecture::Dcim) {
    dcim::DcimParams p = cfg.dcim;
    p.vdd = vdd;
    auto sched = dcim::make_schedule(p, cfg.rram, cfg.selector);
    if (cfg.gate == "or") {
      plan.kind = FeatureKind::WindowMeanCurrent;
      plan.channel = trace::Channel::Supply;
      plan.sign = -1.0;
      plan.region_start = sched.cycle_length + sched.enable_time;
      plan.region_end = sched.cycle_length + sched.sense_time;
    } else if (cfg.gate == "and") {
      plan.kind = FeatureKind::WindowMeanCurrent;
      plan.channel = trace::Channel::Ground;
      plan.sign = 1.0;
      plan.region_start = sched.enable_time;
      plan.region_end = sched.sense_time;
    } else if (cfg.gate == "precharge") {
      plan.kind = FeatureKind::PrechargeCurrent;
      plan.channel = trace::Channel::Supply;
      plan.sign = -1.0;
      plan.region_start = 0.0;
      plan.region_end = sched.precharge_end;
    } else {
      throw std::invalid_argument("unknown DCIM gate kind: " + cfg.gate);
    }
    return plan;
  }
  if (cfg.gate == "init_write") {
    plan.kind = FeatureKind::InitWriteCurrent;
    plan.channel = trace::Channel::Ground;
    plan.sign = 1.0;
    plan.region_start = 0.0;
    plan.region_end = cfg.magic.t_init_slot;
    return plan;
  }
  if (cfg.gate != "and" && cfg.gate != "or" && cfg.gate != "nor")
    throw std::invalid_argument("unknown MAGIC gate kind: " + cfg.gate);
  plan.kind = cfg.feature_hint();
  plan.windowed = false;
  return plan;
}

magic::GateType magic_gate_type(const std::string& gate) {
  if (gate == "and") return magic::GateType::And;
  if (gate == "or") return magic::GateType::Or;
  return magic::GateType::Nor;
}

double run_dcim_feature(const CalibrationConfig& cfg, int fanin,
                        const device::DeviceInstance& inst, const FeaturePlan& plan,
                        const trace::MeasurementWindow& window, double vdd) {
  dcim::DcimParams p = cfg.dcim;
  p.vdd = vdd;
  p.functional_check = false;
  int n_vars = std::max(1, cfg.fanin_max);
  auto f = gate_function(cfg.arch, cfg.gate, fanin, n_vars);
  auto chip = dcim::program_dcim(f, {}, p, inst, cfg.rram, cfg.selector);
  auto sched = dcim::make_schedule(p, cfg.rram, cfg.selector);

  std::vector<int> stim(n_vars, cfg.gate == "or" ? 1 : 0);
  if (cfg.gate == "precharge")
    dcim::run_dcim(chip, stim); // settle all active BLs at the discharge floor
  auto run = dcim::run_dcim(chip, stim);
  return dcim_window_feature(run.trace, cfg.gate, window, sched);
}

double run_magic_feature(const CalibrationConfig& cfg, int fanin,
                         const device::DeviceInstance& inst, const FeaturePlan& plan,
                         const trace::MeasurementWindow& window, double vdd) {
  magic::MagicParams p = cfg.magic;
  p.v_write = vdd;
  p.functional_check = false;
  if (plan.kind == FeatureKind::InitWriteCurrent) {
    auto tr = magic::write_cells_trace(fanin, p, inst, cfg.rram);
    return plan.sign * trace::mean_current(tr, window, plan.channel);
  }
  auto prog = magic::single_gate_program(magic_gate_type(cfg.gate), fanin, p, inst, cfg.rram);
  // All-ones makes every gate type switch (op-time stimulus); all-zeros keeps
  // the network static (steady-current stimulus, the closed-form rule regime).
  bool want_switch = plan.kind == FeatureKind::OpTime;
  std::vector<int> stim(prog.variable_count, want_switch ? 1 : 0);
  auto run = magic::run_program(prog, stim);
  const auto& res = run.gate_results.front();
  if (plan.kind == FeatureKind::OpTime) {
    if (res.op_time < 0)
      throw std::runtime_error("calibration gate failed to switch under the op-time stimulus");
    return res.op_time;
  }
  return res.steady_current;
}

double sample_feature(const CalibrationConfig& cfg, int fanin, const device::DeviceInstance& inst,
                      const FeaturePlan& plan, const trace::MeasurementWindow& window, double vdd) {
  return cfg.arch == Architecture::Dcim
             ? run_dcim_feature(cfg, fanin, inst, plan, window, vdd)
             : run_magic_feature(cfg, fanin, inst, plan, window, vdd);
}

trace::CurrentTrace nominal_trace(const CalibrationConfig& cfg, int fanin, double vdd) {
  device::DeviceInstance nominal;
  if (cfg.arch == Architecture::Dcim) {
    dcim::DcimParams p = cfg.dcim;
    p.vdd = vdd;
    p.functional_check = false;
    int n_vars = std::max(1, cfg.fanin_max);
    auto f = gate_function(cfg.arch, cfg.gate, fanin, n_vars);
    auto chip = dcim::program_dcim(f, {}, p, nominal, cfg.rram, cfg.selector);
    std::vector<int> stim(n_vars, cfg.gate == "or" ? 1 : 0);
    if (cfg.gate == "precharge") dcim::run_dcim(chip, stim);
    return dcim::run_dcim(chip, stim).trace;
  }
  magic::MagicParams p = cfg.magic;
  p.v_write = vdd;
  return magic::write_cells_trace(fanin, p, nominal, cfg.rram);
}

std::vector<double> pooled_bin_edges(const std::vector<FaninStats>& fanins) {
  std::vector<double> pooled;
  for (const auto& f : fanins) pooled.insert(pooled.end(), f.samples.begin(), f.samples.end());
  std::sort(pooled.begin(), pooled.end());
  double lo = pooled.front(), hi = pooled.back();
  if (hi <= lo) hi = lo + std::max(1e-12, std::abs(lo) * 1e-9);
  double iqr = pooled[pooled.size() * 3 / 4] - pooled[pooled.size() / 4];
  int bins = 40; // Freedman-Diaconis with a 40-bin floor
  if (iqr > 0) {
    double width = 2.0 * iqr / std::cbrt(static_cast<double>(pooled.size()));
    bins = std::clamp(static_cast<int>(std::ceil((hi - lo) / width)), 40, 400);
  }
  std::vector<double> edges(bins + 1);
  for (int i = 0; i <= bins; ++i)
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  return edges;
}

std::vector<double> histogram_density(const std::vector<double>& samples,
                                      const std::vector<double>& edges) {
  std::vector<double> dens(edges.size() - 1, 0.0);
  double width = edges[1] - edges[0];
  for (double x : samples) {
    int b = static_cast<int>((x - edges.front()) / width);
    b = std::clamp(b, 0, static_cast<int>(dens.size()) - 1);
    dens[b] += 1.0;
  }
  double norm = width * static_cast<double>(samples.size());
  for (auto& d : dens) d /= norm;
  return dens;
}

} // namespace

double dcim_window_feature(const trace::CurrentTrace& tr, const std::string& gate,
                           const trace::MeasurementWindow& window,
                           const dcim::PhaseSchedule& sched) {
  trace::Channel ch = gate == "and" ? trace::Channel::Ground : trace::Channel::Supply;
  double sign = gate == "and" ? 1.0 : -1.0;
  // Leakage floor estimated from the quiet settle region, as an attacker would.
  trace::MeasurementWindow quiet{sched.precharge_end + 0.1e-9, sched.enable_time - 0.1e-9};
  double base = trace::mean_current(tr, quiet, ch);
  return sign * (trace::mean_current(tr, window, ch) - base);
}

FeatureKind CalibrationConfig::feature_hint() const {
  if (arch == Architecture::Dcim)
    return gate == "precharge" ? FeatureKind::PrechargeCurrent : FeatureKind::WindowMeanCurrent;
  if (gate == "init_write") return FeatureKind::InitWriteCurrent;
  return feature;
}

FaninModelSet calibrate(const CalibrationConfig& cfg) {
  if (cfg.n_mc < 2) throw std::invalid_argument("calibration needs at least 2 Monte Carlo points");
  if (cfg.fanin_min > cfg.fanin_max) throw std::invalid_argument("bad fanin range");
  cfg.variation.validate();
  double vdd = cfg.vdd > 0 ? cfg.vdd : default_vdd(cfg.arch);
  FeaturePlan plan = make_plan(cfg, vdd);

  // Nominal sanity pass; a simulator that cannot compute aborts calibration.
  if (std::abs(vdd - default_vdd(cfg.arch)) < 1e-12) {
    device::DeviceInstance nominal;
    sample_feature(cfg, std::max(cfg.fanin_min, cfg.arch == Architecture::Magic ? 1 : 0), nominal,
                   plan, {plan.region_start, std::max(plan.region_end, plan.region_start + 1e-9)},
                   vdd);
  }

  trace::MeasurementWindow window{};
  if (plan.windowed) {
    std::vector<std::pair<int, trace::CurrentTrace>> nominal_by_fanin;
    for (int k = std::max(cfg.fanin_min, plan.kind == FeatureKind::InitWriteCurrent ? 1 : cfg.fanin_min);
         k <= cfg.fanin_max; ++k)
      nominal_by_fanin.emplace_back(k, nominal_trace(cfg, k, vdd));
    trace::WindowGrid grid;
    grid.region_start = plan.region_start;
    grid.region_end = plan.region_end;
    window = trace::select_window(nominal_by_fanin, plan.channel, grid);
  }

  FaninModelSet model;
  model.arch = cfg.arch;
  model.gate = cfg.gate;
  model.feature = plan.kind;
  model.vdd = vdd;
  model.window = window;
  model.sample_count = cfg.n_mc;
  model.seed = cfg.seed;

  const int n_fanins = cfg.fanin_max - cfg.fanin_min + 1;
  std::vector<std::vector<double>> feats(n_fanins, std::vector<double>(cfg.n_mc, 0.0));
  parallel_for(cfg.n_mc, cfg.jobs, [&](int i) {
    // Common random numbers: one chip instance per Monte Carlo index.
    device::DeviceInstance inst(cfg.variation, split_seed(cfg.seed, 0xca11b, i), cfg.rram);
    for (int k = 0; k < n_fanins; ++k)
      feats[k][i] = sample_feature(cfg, cfg.fanin_min + k, inst, plan, window, vdd);
  });

  for (int k = 0; k < n_fanins; ++k) {
    FaninStats st;
    st.fanin = cfg.fanin_min + k;
    st.samples = std::move(feats[k]);
    double sum = std::accumulate(st.samples.begin(), st.samples.end(), 0.0);
    st.mean = sum / static_cast<double>(st.samples.size());
    double ss = 0.0;
    for (double x : st.samples) ss += (x - st.mean) * (x - st.mean);
    st.stddev = std::sqrt(ss / static_cast<double>(st.samples.size() - 1));
    model.fanins.push_back(std::move(st));
  }
  model.bin_edges = pooled_bin_edges(model.fanins);
  for (auto& f : model.fanins) f.density = histogram_density(f.samples, model.bin_edges);
  return model;
}

double adjacent_overlap(const FaninModelSet& model, int fanin) {
  const FaninStats* a = model.find(fanin);
  const FaninStats* b = model.find(fanin + 1);
  if (!a || !b) throw std::invalid_argument("adjacent_overlap: fanin pair not in model");
  double width = model.bin_edges[1] - model.bin_edges[0];
  double overlap = 0.0;
  for (size_t i = 0; i < a->density.size(); ++i)
    overlap += std::min(a->density[i], b->density[i]) * width;
  return std::min(1.0, overlap);
}

double simulate_feature(const CalibrationConfig& cfg, int fanin,
                        const device::DeviceInstance& inst) {
  double vdd = cfg.vdd > 0 ? cfg.vdd : default_vdd(cfg.arch);
  FeaturePlan plan = make_plan(cfg, vdd);
  trace::MeasurementWindow window{};
  if (plan.windowed) {
    std::vector<std::pair<int, trace::CurrentTrace>> nominal_by_fanin;
    for (int k = cfg.fanin_min; k <= cfg.fanin_max; ++k)
      nominal_by_fanin.emplace_back(k, nominal_trace(cfg, k, vdd));
    trace::WindowGrid grid;
    grid.region_start = plan.region_start;
    grid.region_end = plan.region_end;
    window = trace::select_window(nominal_by_fanin, plan.channel, grid);
  }
  return sample_feature(cfg, fanin, inst, plan, window, vdd);
}

SubsampleStudy subsample_study(const FaninModelSet& model, const std::vector<int>& chip_counts,
                               int trials, uint64_t seed) {
  SubsampleStudy study;
  if (model.fanins.size() < 2) throw std::invalid_argument("model too small for margin study");
  double worst = std::numeric_limits<double>::infinity();
  for (size_t i = 0; i + 1 < model.fanins.size(); ++i) {
    double margin = std::abs(model.fanins[i + 1].mean - model.fanins[i].mean);
    if (margin < worst) {
      worst = margin;
      study.worst_fanin_low = model.fanins[i].fanin;
      study.worst_fanin_high = model.fanins[i + 1].fanin;
    }
  }
  study.full_margin = worst;
  const FaninStats* lo = model.find(study.worst_fanin_low);
  const FaninStats* hi = model.find(study.worst_fanin_high);
  const int n = static_cast<int>(lo->samples.size());

  for (int chips : chip_counts) {
    if (chips > n) throw std::invalid_argument("subsample larger than the calibration population");
    double sum_abs = 0.0, sum = 0.0, sum2 = 0.0;
    Rng rng(split_seed(seed, 0x5b55, static_cast<uint64_t>(chips)));
    for (int t = 0; t < trials; ++t) {
      // draw `chips` distinct indices (the adversary's fabricated chips)
      std::vector<int> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      for (int i = 0; i < chips; ++i) {
        int j = i + static_cast<int>(rng.next_below(static_cast<uint64_t>(n - i)));
        std::swap(idx[i], idx[j]);
      }
      double m_lo = 0.0, m_hi = 0.0;
      for (int i = 0; i < chips; ++i) {
        m_lo += lo->samples[idx[i]];
        m_hi += hi->samples[idx[i]];
      }
      double margin = std::abs(m_hi - m_lo) / chips;
      sum_abs += std::abs(margin - study.full_margin);
      sum += margin;
      sum2 += margin * margin;
    }
    SubsampleRow row;
    row.chips = chips;
    row.margin_degradation = sum_abs / trials / study.full_margin;
    double var = std::max(0.0, sum2 / trials - (sum / trials) * (sum / trials));
    row.margin_estimator_std = std::sqrt(var) / study.full_margin;
    study.rows.push_back(row);
  }
  return study;
}

std::string model_to_json(const FaninModelSet& model) {
  nlohmann::json j;
  j["schema"] = "scare-model v1";
  j["architecture"] = architecture_name(model.arch);
  j["gate"] = model.gate;
  j["feature"] = feature_kind_name(model.feature);
  j["vdd"] = model.vdd;
  j["window_ns"] = {{"start", model.window.start * 1e9}, {"end", model.window.end * 1e9}};
  j["sample_count"] = model.sample_count;
  j["seed"] = model.seed;
  j["common_random_numbers"] = true;
  j["bin_edges"] = model.bin_edges;
  nlohmann::json fans = nlohmann::json::array();
  for (const auto& f : model.fanins) {
    std::vector<double> sorted = f.samples;
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> probs(sorted.size());
    for (size_t i = 0; i < sorted.size(); ++i)
      probs[i] = static_cast<double>(i + 1) / static_cast<double>(sorted.size());
    fans.push_back({{"fanin", f.fanin},
                    {"mean", f.mean},
                    {"std", f.stddev},
                    {"samples", f.samples},
                    {"density", f.density},
                    {"cdf", {{"x", sorted}, {"p", probs}}}});
  }
  j["fanins"] = fans;
  return j.dump();
}

FaninModelSet model_from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  if (j.value("schema", "") != "scare-model v1") throw std::runtime_error("bad model schema");
  FaninModelSet model;
  model.arch = architecture_from_name(j.at("architecture"));
  model.gate = j.at("gate");
  model.feature = feature_kind_from_name(j.at("feature"));
  model.vdd = j.at("vdd");
  model.window.start = static_cast<double>(j.at("window_ns").at("start")) * 1e-9;
  model.window.end = static_cast<double>(j.at("window_ns").at("end")) * 1e-9;
  model.sample_count = j.at("sample_count");
  model.seed = j.at("seed");
  model.bin_edges = j.at("bin_edges").get<std::vector<double>>();
  for (const auto& jf : j.at("fanins")) {
    FaninStats f;
    f.fanin = jf.at("fanin");
    f.mean = jf.at("mean");
    f.stddev = jf.at("std");
    f.samples = jf.at("samples").get<std::vector<double>>();
    f.density = jf.at("density").get<std::vector<double>>();
    model.fanins.push_back(std::move(f));
  }
  return model;
}

void save_model(const std::string& path, const FaninModelSet& model) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write model file: " + path);
  os << model_to_json(model) << "\n";
}

FaninModelSet load_model(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open model file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return model_from_json(ss.str());
}

std::vector<double> dcim_sweep_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 25; ++i) g.push_back(0.75 + 0.05 * i);
  return g;
}

std::vector<double> magic_sweep_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 8; ++i) g.push_back(2.2 + 0.1 * i);
  return g;
}

std::vector<SweepRow> voltage_sweep(const CalibrationConfig& base, const std::vector<double>& grid) {
  std::vector<SweepRow> rows;
  for (double vdd : grid) {
    CalibrationConfig cfg = base;
    cfg.vdd = vdd;
    FaninModelSet model = calibrate(cfg);
    for (size_t i = 0; i < model.fanins.size(); ++i) {
      SweepRow r;
      r.vdd = vdd;
      r.gate = cfg.gate;
      r.fanin = model.fanins[i].fanin;
      r.mean = model.fanins[i].mean;
      r.stddev = model.fanins[i].stddev;
      r.overlap_with_next =
          i + 1 < model.fanins.size() ? adjacent_overlap(model, model.fanins[i].fanin) : -1.0;
      rows.push_back(r);
    }
  }
  return rows;
}

void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write sweep csv: " + path);
  os << "vdd,gate,fanin,mean,std,overlap_next\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%.9g,%s,%d,%.9g,%.9g,%.9g\n", r.vdd, r.gate.c_str(), r.fanin,
                  r.mean, r.stddev, r.overlap_with_next);
    os << buf;
  }
}

} // namespace scare::profile
