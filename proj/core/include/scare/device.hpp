#pragma once

#include <cstdint>
#include <vector>

#include "scare/rng.hpp"

namespace scare::device {

// Units: volts, ohms, farads, seconds; filament gap in nm.

struct RramParams {
  double gap_min_nm = 0.1;
  double gap_max_nm = 1.7;
  double r_lrs = 58.9e3; ///< resistance at gap_min
  double r_hrs = 6.7e6;  ///< resistance at gap_max
  double write_latency = 25e-9; ///< full HRS->LRS transition at v_write_nominal
  double v_write_nominal = 1.2;
  double v_set_threshold = 0.8;   ///< no set motion below this drive
  double v_reset_threshold = 0.45; ///< no reset motion below this drive
  double v_accel = 0.30; ///< exponential voltage scale of the switching rate

  void validate() const;

  /// ln(R_HRS/R_LRS)/(gap_max-gap_min), 1/nm.
  double resistance_slope() const;
  /// Gap speed (nm/s) at drive voltage v, calibrated so the full transition
  /// at v_write_nominal takes exactly write_latency.
  double gap_rate(double v) const;
  /// Gap whose resistance is the geometric mean of the two endpoints; the
  /// logical 0/1 readout boundary.
  double gap_mid_nm() const { return 0.5 * (gap_min_nm + gap_max_nm); }
  double r_mid() const;
};

struct RramState {
  double gap_nm = 1.7;

  bool logical_one(const RramParams& p) const { return gap_nm < p.gap_mid_nm(); }
};

inline RramState lrs_state(const RramParams& p) { return {p.gap_min_nm}; }
inline RramState hrs_state(const RramParams& p) { return {p.gap_max_nm}; }

/// R(g) = R_LRS * exp(k*(g - gap_min)); clamped outside the endpoint gaps.
double rram_resistance(const RramState& s, const RramParams& p);

/// Advance the filament for dt seconds under an applied cell voltage.
/// v > v_set_threshold moves the gap toward gap_min, v < -v_reset_threshold
/// toward gap_max; saturates at the bounds, no motion otherwise.
RramState rram_switch_step(const RramState& s, double v_applied, double dt, const RramParams& p);

struct SelectorParams {
  double v_threshold = 0.4; ///< symmetric cutoff, both polarities
  double r_on = 1e3;

  void validate() const;
};

/// Series RRAM + selector current for a terminal voltage difference dv.
/// Zero below the selector threshold, otherwise (|dv|-Vth)/(R_cell+r_on+r_extra).
double cell_path_current(double dv, double r_cell, const SelectorParams& sel, double r_extra = 0.0);

/// Relative process spreads, each interpreted at the 3-sigma point.
struct VariationSpec {
  double lrs_gap = 0.0;
  double hrs_gap = 0.0;
  double mos_oxide_thickness = 0.0;
  double mos_gate_length = 0.0;

  void validate() const;
  bool zero() const;
};

VariationSpec table_variation(); ///< 7% / 7% / 10% / 10% at 3-sigma

/// One process-variation sample of a chip: per-cell filament gaps plus one
/// die-level draw for the MOS-derived scales. Reproducible from (spec, seed).
class DeviceInstance {
public:
  DeviceInstance() { init(); }
  DeviceInstance(const VariationSpec& spec, uint64_t seed, const RramParams& rram = {});

  uint64_t seed() const { return seed_; }
  const VariationSpec& spec() const { return spec_; }
  bool nominal() const { return spec_.zero(); }

  /// Sampled gap for cell `cell_id` in the given target state. Deterministic
  /// per (seed, cell_id), independent of evaluation order.
  double cell_gap_nm(uint64_t cell_id, bool lrs) const;

  /// Die-level multiplicative scales.
  double driver_resistance_scale() const { return driver_scale_; }
  double bl_capacitance_scale() const { return cap_scale_; }
  double buffer_current_scale() const { return buffer_scale_; }

private:
  void init();

  VariationSpec spec_{};
  RramParams rram_{};
  uint64_t seed_ = 0;
  double driver_scale_ = 1.0;
  double cap_scale_ = 1.0;
  double buffer_scale_ = 1.0;
};

} // namespace scare::device
