#pragma once

#include <string>
#include <vector>

#include "scare/device.hpp"
#include "scare/sop.hpp"
#include "scare/trace.hpp"

namespace scare::dcim {

struct DcimParams {
  double vdd = 1.2;
  double c_bl = 100e-15;
  double v_ref_and_frac = 0.5; ///< SA reference as a fraction of vdd
  double v_ref_or_frac = 0.5;
  double r_wl_driver = 4e3;
  double r_precharge = 20e3;
  double leak_cell_conductance = 5e-9; ///< S per cell, vdd-proportional floor
  double en_buffer_unit = 4e-6;        ///< A per enable-tree row
  int en_rows_and = 16; ///< enable-tree size of the standard array, fixed per harness
  int en_rows_or = 8;
  double en_pulse_width = 1.2e-9;
  double en_rebound_frac = 0.35; ///< bipolar rebound lobe of the enable pulse
  double en_ground_frac = 0.5;   ///< share of the enable transient on the ground rail
  double sa_pulse_unit = 8e-6;   ///< A per sensed column
  double sa_pulse_width = 0.8e-9;
  double dt = 10e-12;
  double t_precharge = 10e-9;
  double t_settle = 1e-9;
  double t_compute = 22e-9;
  double t_tail = 2e-9;
  double se_tau_multiple = 3.0; ///< sense edge placed this many nominal tau after EN
  bool functional_check = true; ///< verify outputs against the truth table on nominal chips

  double v_ref_and() const { return v_ref_and_frac * vdd; }
  double v_ref_or() const { return v_ref_or_frac * vdd; }
};

struct ChipDims {
  int and_wl = 16; ///< literal rows: true rows [0,n), complemented rows [n,2n)
  int and_bl = 8;
  int or_wl = 8; ///< one row per minterm
  int or_bl = 1;
};

/// Per-cycle timing derived from the parameter set; all edges snap to dt.
struct PhaseSchedule {
  double dt = 10e-12;
  double precharge_end = 10e-9;
  double enable_time = 11e-9;
  double sense_time = 0.0;
  double cycle_length = 0.0;

  void validate() const;
};

PhaseSchedule make_schedule(const DcimParams& p, const device::RramParams& rram,
                            const device::SelectorParams& sel);

/// Two-crossbar chip (AND array + OR array) with persistent BL voltages.
/// Cell states are fixed for the lifetime of the chip: computation never
/// exercises the write thresholds in this architecture model.
class DcimChip {
public:
  ChipDims dims;
  DcimParams params;
  device::RramParams rram;
  device::SelectorParams selector;
  device::DeviceInstance instance;
  sop::SopFunction function; ///< ground truth, used only for the nominal self-check

  std::vector<std::vector<double>> and_r; ///< [wl][bl] cell resistance
  std::vector<std::vector<double>> or_r;  ///< [wl][col]
  std::vector<bool> and_bl_active;
  int minterm_rows = 0; ///< OR rows in use

  // redundant-input protection
  std::vector<std::vector<bool>> and_bias_cell; ///< [bias row][bl]
  int bias_rows = 0;                            ///< rows appended after literal rows
  double bias_and = 0.0;                        ///< drive level of AND-array bias rows
  double bias_or = 0.0;
  std::vector<std::vector<bool>> or_bias_cell; ///< [bias row][col]
  int or_bias_rows = 0;

  // persistent BL state (power-on: discharged)
  std::vector<double> and_bl_v;
  std::vector<double> or_bl_v;

  int active_bl_count() const;
  int cell_count() const;
  double c_bl_effective() const { return params.c_bl * instance.bl_capacitance_scale(); }
  double r_driver_effective() const { return params.r_wl_driver * instance.driver_resistance_scale(); }
  void reset_bl_state();
};

DcimChip program_dcim(const sop::SopFunction& f, const ChipDims& dims = {},
                      const DcimParams& params = {},
                      const device::DeviceInstance& instance = {},
                      const device::RramParams& rram = {},
                      const device::SelectorParams& selector = {});

struct DcimRun {
  std::vector<int> outputs;
  std::vector<int> minterm_bits;
  trace::CurrentTrace trace;
};

/// Two-cycle computation: precharge/evaluate the AND array, then
/// pre-discharge/evaluate the OR array. Mutates the chip's persistent BL
/// voltages only.
DcimRun run_dcim(DcimChip& chip, const std::vector<int>& inputs);
DcimRun run_dcim(DcimChip& chip, uint32_t input_bits);

/// Capacitor energy model for charging `active_bls` bitlines through the
/// full vdd swing. The supply delivers C*V^2 per BL over a 0->vdd precharge and
/// the capacitor stores half of it; this returns the stored half, and the
/// charge-based trace check (0.5 * vdd * integral of i dt) matches it exactly.
double precharge_energy(const DcimChip& chip, int active_bls);

std::string chip_to_json(const DcimChip& chip);

} // namespace scare::dcim
