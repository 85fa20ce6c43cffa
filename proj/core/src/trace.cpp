#include "scare/trace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "scare/rng.hpp"

namespace scare::trace {

const Phase* CurrentTrace::find_phase(const std::string& name) const {
  for (const auto& p : phases_)
    if (p.name == name) return &p;
  return nullptr;
}

void CurrentTrace::append_trace(const CurrentTrace& other) {
  if (std::abs(other.dt_ - dt_) > 1e-18)
    throw std::invalid_argument("cannot concatenate traces with different dt");
  double offset = duration();
  supply_.insert(supply_.end(), other.supply_.begin(), other.supply_.end());
  ground_.insert(ground_.end(), other.ground_.begin(), other.ground_.end());
  for (auto p : other.phases_) {
    p.start += offset;
    p.end += offset;
    phases_.push_back(p);
  }
}

void CurrentTrace::add_constant(double supply, double ground) {
  for (auto& v : supply_) v += supply;
  for (auto& v : ground_) v += ground;
}

void CurrentTrace::check_finite() const {
  for (double v : supply_)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite supply sample");
  for (double v : ground_)
    if (!std::isfinite(v)) throw std::runtime_error("non-finite ground sample");
}

void MeasurementWindow::validate(const CurrentTrace& t) const {
  if (!(start >= 0.0) || !(start < end) || end > t.duration() + t.dt() * 0.5)
    throw std::invalid_argument("measurement window outside trace");
}

static void print_g17(std::string& out, double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void write_trace(std::ostream& os, const CurrentTrace& t) {
  std::string s = "# scare-trace v1, dt_ns=";
  print_g17(s, t.dt() * 1e9);
  s += ", channels=supply,ground\n";
  for (const auto& p : t.phases()) {
    s += "# phase,";
    s += p.name;
    s += ',';
    print_g17(s, p.start * 1e9);
    s += ',';
    print_g17(s, p.end * 1e9);
    s += '\n';
  }
  const auto& sup = t.channel(Channel::Supply);
  const auto& gnd = t.channel(Channel::Ground);
  for (size_t i = 0; i < t.size(); ++i) {
    print_g17(s, static_cast<double>(i) * t.dt() * 1e9);
    s += ',';
    print_g17(s, sup[i] * 1e6);
    s += ',';
    print_g17(s, gnd[i] * 1e6);
    s += '\n';
    if (s.size() > (1u << 20)) {
      os << s;
      s.clear();
    }
  }
  os << s;
}

void write_trace_file(const std::string& path, const CurrentTrace& t) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open trace file for writing: " + path);
  write_trace(os, t);
}

CurrentTrace read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty trace stream");
  const std::string magic = "# scare-trace v1, dt_ns=";
  if (line.rfind(magic, 0) != 0) throw std::runtime_error("bad trace header");
  double dt_ns = std::strtod(line.c_str() + magic.size(), nullptr);
  CurrentTrace t(dt_ns * 1e-9);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line.rfind("# phase,", 0) == 0) {
      std::stringstream ss(line.substr(8));
      Phase p;
      std::string field;
      std::getline(ss, p.name, ',');
      std::getline(ss, field, ',');
      p.start = std::strtod(field.c_str(), nullptr) * 1e-9;
      std::getline(ss, field, ',');
      p.end = std::strtod(field.c_str(), nullptr) * 1e-9;
      t.phases().push_back(p);
      continue;
    }
    if (line[0] == '#') continue;
    const char* c = line.c_str();
    char* end = nullptr;
    std::strtod(c, &end); // time column, implied by row index
    if (end == c || *end != ',') throw std::runtime_error("bad trace row: " + line);
    c = end + 1;
    double sup = std::strtod(c, &end) * 1e-6;
    if (*end != ',') throw std::runtime_error("bad trace row: " + line);
    c = end + 1;
    double gnd = std::strtod(c, &end) * 1e-6;
    t.append(sup, gnd);
  }
  return t;
}

CurrentTrace read_trace_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open trace file: " + path);
  return read_trace(is);
}

CurrentTrace add_noise(const CurrentTrace& t, double sigma, uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be non-negative");
  CurrentTrace out = t;
  if (sigma == 0.0) return out;
  Rng rng(split_seed(seed, 0x401e));
  for (Channel ch : {Channel::Supply, Channel::Ground})
    for (auto& v : out.channel(ch)) v += sigma * rng.next_gaussian();
  return out;
}

CurrentTrace subtract_leakage(const CurrentTrace& t, double supply_baseline, double ground_baseline) {
  CurrentTrace out = t;
  for (auto& v : out.channel(Channel::Supply)) v -= supply_baseline;
  for (auto& v : out.channel(Channel::Ground)) v -= ground_baseline;
  return out;
}

double mean_current(const CurrentTrace& t, const MeasurementWindow& w, Channel ch) {
  w.validate(t);
  size_t i0 = static_cast<size_t>(std::llround(w.start / t.dt()));
  size_t i1 = static_cast<size_t>(std::llround(w.end / t.dt()));
  i1 = std::min(i1, t.size());
  if (i1 <= i0) throw std::invalid_argument("empty measurement window");
  const auto& x = t.channel(ch);
  double s = 0.0;
  for (size_t i = i0; i < i1; ++i) s += x[i];
  return s / static_cast<double>(i1 - i0);
}

MeasurementWindow select_window(const std::vector<std::pair<int, CurrentTrace>>& mean_traces,
                                Channel ch, const WindowGrid& grid) {
  if (mean_traces.size() < 2)
    throw std::invalid_argument("select_window needs at least two fanin traces");
  auto sorted = mean_traces;
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  const CurrentTrace& ref = sorted.front().second;
  double region_end = grid.region_end > 0 ? grid.region_end : ref.duration();
  double region_start = grid.region_start;

  MeasurementWindow best{};
  double best_sep = -1.0;
  for (double start = region_start; start < region_end; start += grid.start_step) {
    for (double width : grid.widths) {
      double end = start + width;
      if (end > region_end + 1e-15) continue;
      MeasurementWindow w{start, end};
      double min_sep = std::numeric_limits<double>::infinity();
      for (size_t i = 0; i + 1 < sorted.size(); ++i) {
        double a = mean_current(sorted[i].second, w, ch);
        double b = mean_current(sorted[i + 1].second, w, ch);
        min_sep = std::min(min_sep, std::abs(b - a));
      }
      if (min_sep > best_sep) {
        best_sep = min_sep;
        best = w;
      }
    }
  }
  if (best_sep <= 0.0)
    throw std::runtime_error("no measurement window separates the fanin traces");
  return best;
}

const char* event_kind_name(EventKind k) {
  switch (k) {
    case EventKind::PrechargePeak: return "precharge-peak";
    case EventKind::ShortCircuitPeak: return "short-circuit-peak";
    case EventKind::SharpChange: return "sharp-change";
    case EventKind::SteadyPlateau: return "steady-plateau";
  }
  return "?";
}

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + mid, v.end());
  return v[mid];
}

struct Segment {
  size_t begin = 0, end = 0; // sample range [begin, end)
  bool plateau = false;
  bool pulse = false;
  double level_sup = 0.0, level_gnd = 0.0;
};

} // namespace

std::vector<TraceEvent> detect_events(const CurrentTrace& t, const EventOptions& opt) {
  std::vector<TraceEvent> events;
  const size_t n = t.size();
  if (n < 4) return events;
  const double dt = t.dt();
  const auto& sup = t.channel(Channel::Supply);
  const auto& gnd = t.channel(Channel::Ground);

  std::vector<double> dabs(n - 1);
  for (size_t i = 0; i + 1 < n; ++i)
    dabs[i] = std::max(std::abs(sup[i + 1] - sup[i]), std::abs(gnd[i + 1] - gnd[i])) / dt;
  double med = median(dabs);
  double range = 0.0;
  for (size_t i = 0; i < n; ++i)
    range = std::max({range, std::abs(sup[i]), std::abs(gnd[i])});
  if (range == 0.0) return events;
  double theta_d = opt.theta_d > 0 ? opt.theta_d : 10.0 * med + 1e-5 * range / dt;
  double theta_s = opt.theta_s > 0 ? opt.theta_s : std::max(3.0 * med, 1e-6 * range / dt);
  double theta_p = std::max(8.0 * theta_d, 3e-3 * range / dt);
  double idle_tol = opt.idle_tol > 0 ? opt.idle_tol : std::max(2e-8, 2e-3 * range);

  // Pass 1: short strong excursions that return to their entry level are
  // pulses (buffer/SA blips); they split the surrounding activity.
  enum Tier { Quiet, Active, Pulse };
  std::vector<Tier> tier(n - 1, Quiet);
  for (size_t i = 0; i + 1 < n; ++i)
    if (dabs[i] >= theta_s) tier[i] = Active;
  size_t i = 0;
  const size_t pulse_max = static_cast<size_t>(3e-9 / dt);
  while (i + 1 < n) {
    if (dabs[i] < theta_p) {
      ++i;
      continue;
    }
    size_t j = i;
    while (j + 1 < n && j - i < pulse_max && dabs[j] >= theta_s) ++j;
    size_t a = i > 0 ? i - 1 : 0;
    size_t b = std::min(j + 1, n - 1);
    double exc = 0.0, ret = 0.0;
    for (Channel ch : {Channel::Supply, Channel::Ground}) {
      const auto& x = t.channel(ch);
      double dev = 0.0;
      for (size_t q = a; q <= b; ++q) dev = std::max(dev, std::abs(x[q] - x[a]));
      if (dev > exc) {
        exc = dev;
        ret = std::abs(x[b] - x[a]);
      }
    }
    if (exc > idle_tol && ret < 0.5 * exc)
      for (size_t q = a; q < b && q < n - 1; ++q) tier[q] = Pulse;
    i = j + 1;
  }

  // Pass 2: segmentation into plateaus, transitions and pulses.
  const size_t min_run = std::max<size_t>(2, static_cast<size_t>(opt.t_min / dt));
  std::vector<Segment> merged;
  i = 0;
  while (i < n - 1) {
    Tier tr = tier[i];
    size_t j = i;
    while (j < n - 1 && tier[j] == tr) ++j;
    Segment s;
    s.begin = i;
    s.end = j;
    s.plateau = tr == Quiet && (j - i >= min_run);
    s.pulse = tr == Pulse;
    if (!merged.empty() && !merged.back().plateau && !merged.back().pulse && !s.plateau && !s.pulse)
      merged.back().end = s.end;
    else
      merged.push_back(s);
    i = j;
  }
  for (auto& s : merged) {
    double ms = 0.0, mg = 0.0;
    for (size_t k = s.begin; k < s.end; ++k) {
      ms += sup[k];
      mg += gnd[k];
    }
    s.level_sup = ms / static_cast<double>(s.end - s.begin);
    s.level_gnd = mg / static_cast<double>(s.end - s.begin);
  }

  // Baseline per channel: the plateau level closest to zero (the quiescent
  // floor; simulator traces always idle somewhere).
  double base_sup = 0.0, base_gnd = 0.0;
  double best_s = std::numeric_limits<double>::infinity(), best_g = best_s;
  for (const auto& s : merged) {
    if (!s.plateau) continue;
    if (std::abs(s.level_sup) < best_s) {
      best_s = std::abs(s.level_sup);
      base_sup = s.level_sup;
    }
    if (std::abs(s.level_gnd) < best_g) {
      best_g = std::abs(s.level_gnd);
      base_gnd = s.level_gnd;
    }
  }
  auto idle = [&](const Segment& s) {
    return std::abs(s.level_sup - base_sup) < idle_tol && std::abs(s.level_gnd - base_gnd) < idle_tol;
  };

  for (size_t k = 0; k < merged.size(); ++k) {
    const Segment& s = merged[k];
    MeasurementWindow w{static_cast<double>(s.begin) * dt, static_cast<double>(s.end) * dt};
    if (s.plateau) {
      if (!idle(s)) {
        Channel ch = std::abs(s.level_sup - base_sup) >= std::abs(s.level_gnd - base_gnd)
                         ? Channel::Supply
                         : Channel::Ground;
        events.push_back({EventKind::SteadyPlateau, w, ch,
                          ch == Channel::Supply ? s.level_sup : s.level_gnd});
      }
      continue;
    }
    double smax = -1e300, smin = 1e300, gmax = -1e300, gmin = 1e300, dpeak = 0.0;
    for (size_t q = s.begin; q < s.end; ++q) {
      smax = std::max(smax, sup[q]);
      smin = std::min(smin, sup[q]);
      gmax = std::max(gmax, gnd[q]);
      gmin = std::min(gmin, gnd[q]);
      if (q < n - 1) dpeak = std::max(dpeak, dabs[q]);
    }
    double amp_tol = std::max(idle_tol, 0.02 * range);
    bool bipolar_sup = (smax - base_sup) > amp_tol && (base_sup - smin) > amp_tol;
    bool bipolar_gnd = (gmax - base_gnd) > amp_tol && (base_gnd - gmin) > amp_tol;
    double dev_sup = std::max(std::abs(smax - base_sup), std::abs(smin - base_sup));
    double dev_gnd = std::max(std::abs(gmax - base_gnd), std::abs(gmin - base_gnd));
    Channel ch = dev_sup >= dev_gnd ? Channel::Supply : Channel::Ground;

    EventKind kind;
    if (s.pulse) {
      kind = (bipolar_sup || bipolar_gnd) ? EventKind::ShortCircuitPeak : EventKind::PrechargePeak;
      if (bipolar_sup) ch = Channel::Supply;
      else if (bipolar_gnd) ch = Channel::Ground;
    } else {
      const Segment* prev = k > 0 && merged[k - 1].plateau ? &merged[k - 1] : nullptr;
      const Segment* next = k + 1 < merged.size() && merged[k + 1].plateau ? &merged[k + 1] : nullptr;
      if (bipolar_sup || bipolar_gnd) {
        kind = EventKind::ShortCircuitPeak;
        ch = bipolar_sup ? Channel::Supply : Channel::Ground;
      } else if (prev && next && !idle(*prev) && !idle(*next) && dpeak >= theta_d) {
        kind = EventKind::SharpChange;
      } else {
        kind = EventKind::PrechargePeak;
      }
    }
    events.push_back({kind, w, ch, ch == Channel::Supply ? dev_sup : dev_gnd});
  }
  return events;
}

} // namespace scare::trace
