#include "scare/device.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scare::device {

void RramParams::validate() const {
  if (!(gap_min_nm < gap_max_nm)) throw std::invalid_argument("gap_min must be below gap_max");
  if (!(r_lrs < r_hrs)) throw std::invalid_argument("R_LRS must be below R_HRS");
  if (!(write_latency > 0)) throw std::invalid_argument("write latency must be positive");
  if (!(v_accel > 0) || !(v_write_nominal > 0))
    throw std::invalid_argument("switching calibration voltages must be positive");
}

double RramParams::resistance_slope() const {
  return std::log(r_hrs / r_lrs) / (gap_max_nm - gap_min_nm);
}

double RramParams::gap_rate(double v) const {
  double full_speed = (gap_max_nm - gap_min_nm) / write_latency; // nm/s at v_write_nominal
  return full_speed * std::exp((v - v_write_nominal) / v_accel);
}

double RramParams::r_mid() const { return std::sqrt(r_lrs * r_hrs); }

double rram_resistance(const RramState& s, const RramParams& p) {
  if (!std::isfinite(s.gap_nm)) throw std::invalid_argument("non-finite filament gap");
  double g = std::clamp(s.gap_nm, p.gap_min_nm, p.gap_max_nm);
  return p.r_lrs * std::exp(p.resistance_slope() * (g - p.gap_min_nm));
}

RramState rram_switch_step(const RramState& s, double v_applied, double dt, const RramParams& p) {
  if (!(dt > 0)) throw std::invalid_argument("dt must be positive");
  RramState out = s;
  if (v_applied > p.v_set_threshold) {
    out.gap_nm = std::max(p.gap_min_nm, s.gap_nm - p.gap_rate(v_applied) * dt);
  } else if (v_applied < -p.v_reset_threshold) {
    out.gap_nm = std::min(p.gap_max_nm, s.gap_nm + p.gap_rate(-v_applied) * dt);
  }
  return out;
}

void SelectorParams::validate() const {
  if (!(v_threshold > 0)) throw std::invalid_argument("selector threshold must be positive");
  if (r_on < 0) throw std::invalid_argument("selector on-resistance must be non-negative");
}

double cell_path_current(double dv, double r_cell, const SelectorParams& sel, double r_extra) {
  double mag = std::abs(dv);
  if (mag <= sel.v_threshold) return 0.0;
  double i = (mag - sel.v_threshold) / (r_cell + sel.r_on + r_extra);
  return dv > 0 ? i : -i;
}

void VariationSpec::validate() const {
  for (double f : {lrs_gap, hrs_gap, mos_oxide_thickness, mos_gate_length})
    if (f < 0.0 || f >= 0.5) throw std::invalid_argument("variation fraction must be in [0, 0.5)");
}

bool VariationSpec::zero() const {
  return lrs_gap == 0.0 && hrs_gap == 0.0 && mos_oxide_thickness == 0.0 && mos_gate_length == 0.0;
}

VariationSpec table_variation() { return {0.07, 0.07, 0.10, 0.10}; }

DeviceInstance::DeviceInstance(const VariationSpec& spec, uint64_t seed, const RramParams& rram)
    : spec_(spec), rram_(rram), seed_(seed) {
  spec_.validate();
  rram_.validate();
  init();
}

void DeviceInstance::init() {
  // Die-level MOS draws. Oxide thickness moves both the driver strength
  // (through Cox and Vth; sensitivity amplified by Vth/(VDD-Vth) ~ 0.54 with
  // Table values 423mV at 1.2V) and the BL capacitance.
  Rng rng(split_seed(seed_, 0x5eed));
  double d_len = rng.next_gaussian() * spec_.mos_gate_length / 3.0;
  double d_ox = rng.next_gaussian() * spec_.mos_oxide_thickness / 3.0;
  constexpr double kOxideToDrive = 1.544;
  driver_scale_ = (1.0 + d_len) * (1.0 + kOxideToDrive * d_ox);
  driver_scale_ = std::max(0.2, driver_scale_);
  cap_scale_ = std::max(0.2, 1.0 / (1.0 + d_ox));
  buffer_scale_ = 1.0 / driver_scale_;
}

double DeviceInstance::cell_gap_nm(uint64_t cell_id, bool lrs) const {
  double nominal = lrs ? rram_.gap_min_nm : rram_.gap_max_nm;
  double frac = lrs ? spec_.lrs_gap : spec_.hrs_gap;
  if (frac == 0.0) return nominal;
  Rng rng(split_seed(seed_, lrs ? 0x11a5 : 0x0ba5, cell_id));
  return nominal * (1.0 + rng.next_gaussian() * frac / 3.0);
}

} // namespace scare::device
