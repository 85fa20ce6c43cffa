#pragma once

#include <string>
#include <vector>

#include "scare/device.hpp"
#include "scare/sop.hpp"
#include "scare/trace.hpp"

namespace scare::magic {

enum class GateType { And, Or, Nor };

const char* gate_type_name(GateType t);

/// Resistor-network templates (orientation assumption: the driver rail faces
/// the input cells' common terminal; the output cell returns to ground):
///   AND: inputs in series, then a series template element, then the output
///        cell to ground. Output set-drive is the divider voltage across the
///        output cell; it exceeds the set threshold only when every input is
///        LRS.
///   OR:  inputs in parallel into the output cell. Set-drive sees only the
///        LRS members of the bank (an HRS input sources two orders of
///        magnitude less write current), so an all-0 bank never writes.
///   NOR: like OR but the output cell (preset LRS) is shunted by a template
///        resistor and driven in the reset direction.
struct MagicParams {
  double v_write = 2.4; ///< swept 2.2..3.0
  double t_slot = 40e-9;
  double t_idle = 1e-9;
  double t_init_slot = 8e-9;
  double t_arm = 1e-9; ///< drive settle inside a gate slot before write stress
  double dt = 20e-12;
  double r_and_series = 500e3;
  double r_nor_parallel = 61.1e3;
  double leak_cell_conductance = 5e-9;
  bool functional_check = true;
};

struct Gate {
  GateType type = GateType::And;
  std::vector<int> inputs; ///< cell ids
  int output = -1;         ///< cell id
};

struct Cell {
  double gap_nm = 1.7;
  double gap_lrs_nm = 0.1; ///< this cell's sampled endpoints
  double gap_hrs_nm = 1.7;
  int variable = -1; ///< for input cells
  bool complemented = false;
  bool is_input = false;
  int constant_target = -1; ///< 0/1 for redundant pad cells, -1 otherwise
};

Cell fresh_cell(const device::DeviceInstance& inst, uint64_t cell_id);

/// A compiled sequential MAGIC program with persistent cell states.
class MagicProgram {
public:
  int variable_count = 0;
  std::vector<Cell> cells;
  std::vector<Gate> gates;
  int output_cell = -1; ///< -1 for the constant-0 program
  sop::SopFunction function;
  MagicParams params;
  device::RramParams rram;
  device::DeviceInstance instance;

  int input_cell_count = 0;
  int find_input_cell(int variable, bool complemented) const;
  double cell_resistance(int id) const;
  bool cell_one(int id) const;
};

/// One AND gate per multi-literal minterm in minterm order, single-literal
/// minterms feed the final OR directly.
MagicProgram compile_magic(const sop::SopFunction& f, const MagicParams& params = {},
                           const device::DeviceInstance& instance = {},
                           const device::RramParams& rram = {});

/// Synthetic single-gate program for calibration (true literals x0..x_{n-1}).
MagicProgram single_gate_program(GateType type, int fanin, const MagicParams& params = {},
                                 const device::DeviceInstance& instance = {},
                                 const device::RramParams& rram = {});

/// Pre-compute initialization: one bulk reset slot writing every cell to HRS,
/// then one parallel set slot writing all 1-target cells (complemented
/// literals store the complemented bit; NOR outputs preset to LRS). The set
/// slot current is the sum over simultaneously switching cells.
trace::CurrentTrace init_write(MagicProgram& prog, const std::vector<int>& inputs);

struct GateResult {
  trace::CurrentTrace segment;
  double op_time = -1.0; ///< time from write stress to the mid-resistance crossing; <0 if no switch
  double steady_current = 0.0; ///< network current after switching completes (or throughout)
  bool switched = false;
};

GateResult execute_gate(MagicProgram& prog, const Gate& gate);

struct MagicRun {
  int output = 0;
  trace::CurrentTrace trace;
  std::vector<GateResult> gate_results;
};

MagicRun run_program(MagicProgram& prog, const std::vector<int>& inputs);
MagicRun run_program(MagicProgram& prog, uint32_t input_bits);

/// Bulk parallel write of `count` fresh cells from HRS to LRS; the Fig-9-style
/// write current staircase used to calibrate init-write models.
trace::CurrentTrace write_cells_trace(int count, const MagicParams& params = {},
                                      const device::DeviceInstance& instance = {},
                                      const device::RramParams& rram = {});

std::string program_to_json(const MagicProgram& prog);

} // namespace scare::magic
