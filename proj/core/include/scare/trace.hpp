#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace scare::trace {

enum class Channel { Supply, Ground };

/// Two-channel current trace, uniformly sampled. Sign convention: supply
/// current is negative while the rail sources current, ground current is
/// positive while the ground node sinks it.
struct Phase {
  std::string name;
  double start = 0.0; ///< seconds
  double end = 0.0;

  friend bool operator==(const Phase&, const Phase&) = default;
};

class CurrentTrace {
public:
  CurrentTrace() = default;
  CurrentTrace(double dt, size_t n = 0) : dt_(dt), supply_(n, 0.0), ground_(n, 0.0) {}

  double dt() const { return dt_; }
  size_t size() const { return supply_.size(); }
  double duration() const { return dt_ * static_cast<double>(size()); }

  std::vector<double>& channel(Channel c) { return c == Channel::Supply ? supply_ : ground_; }
  const std::vector<double>& channel(Channel c) const {
    return c == Channel::Supply ? supply_ : ground_;
  }

  std::vector<Phase>& phases() { return phases_; }
  const std::vector<Phase>& phases() const { return phases_; }
  const Phase* find_phase(const std::string& name) const;

  void append(double i_supply, double i_ground) {
    supply_.push_back(i_supply);
    ground_.push_back(i_ground);
  }
  /// Concatenate another trace sampled at the same dt; phases are shifted.
  void append_trace(const CurrentTrace& other);
  void add_constant(double supply, double ground);
  void check_finite() const;

private:
  double dt_ = 1e-11;
  std::vector<double> supply_;
  std::vector<double> ground_;
  std::vector<Phase> phases_;
};

struct MeasurementWindow {
  double start = 0.0; ///< seconds
  double end = 0.0;

  double width() const { return end - start; }
  void validate(const CurrentTrace& t) const;

  friend bool operator==(const MeasurementWindow&, const MeasurementWindow&) = default;
};

// ---- file format -----------------------------------------------------------
// # scare-trace v1, dt_ns=<float>, channels=supply,ground
// # phase,<name>,<start_ns>,<end_ns>
// t_ns,i_supply_uA,i_ground_uA rows
void write_trace(std::ostream& os, const CurrentTrace& t);
void write_trace_file(const std::string& path, const CurrentTrace& t);
CurrentTrace read_trace(std::istream& is);
CurrentTrace read_trace_file(const std::string& path);

// ---- operations ------------------------------------------------------------

CurrentTrace add_noise(const CurrentTrace& t, double sigma, uint64_t seed);

CurrentTrace subtract_leakage(const CurrentTrace& t, double supply_baseline, double ground_baseline);

double mean_current(const CurrentTrace& t, const MeasurementWindow& w, Channel ch);

struct WindowGrid {
  double start_step = 0.5e-9;
  std::vector<double> widths = {1e-9, 2e-9, 4e-9, 8e-9};
  double region_start = 0.0; ///< restrict the scan; region_end<=0 means whole trace
  double region_end = 0.0;
};

/// Exhaustive grid search for the window maximizing the minimum
/// adjacent-fanin mean-current separation. Throws if no window separates.
MeasurementWindow select_window(const std::vector<std::pair<int, CurrentTrace>>& mean_traces_by_fanin,
                                Channel ch, const WindowGrid& grid = {});

enum class EventKind { PrechargePeak, ShortCircuitPeak, SharpChange, SteadyPlateau };

struct TraceEvent {
  EventKind kind;
  MeasurementWindow window;
  Channel channel;
  double level = 0.0; ///< plateau level or peak excursion
};

struct EventOptions {
  double theta_d = 0.0;  ///< sharp-change derivative threshold (A/s); 0 = 10x median
  double theta_s = 0.0;  ///< plateau derivative threshold; 0 = derived
  double t_min = 0.4e-9; ///< minimum plateau duration
  double idle_tol = 0.0; ///< |level - baseline| below this is idle; 0 = derived
};

/// Shape taxonomy over a clean simulator trace: unipolar excursions or steps
/// (PrechargePeak), single-channel bipolar pulses (ShortCircuitPeak), level
/// moves between two non-idle plateaus (SharpChange), and the non-idle
/// plateaus themselves. A flat trace yields nothing.
std::vector<TraceEvent> detect_events(const CurrentTrace& t, const EventOptions& opt = {});

const char* event_kind_name(EventKind k);

} // namespace scare::trace
