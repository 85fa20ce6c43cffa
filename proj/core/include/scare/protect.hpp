#pragma once

#include <cstdint>

#include "scare/dcim.hpp"
#include "scare/magic.hpp"
#include "scare/profile.hpp"
#include "scare/sop.hpp"

namespace scare::protect {

struct ProtectionConfig {
  enum class Kind { RedundantInputs, ExpandLiterals };
  Kind kind = Kind::RedundantInputs;
  int k_redundant = 2;      ///< redundant cells per BL / per gate
  bool randomize = false;   ///< randomize the per-BL redundant count in [0, k]
  uint64_t seed = 0;
  double bias_and_frac = 1.0 / 3.0; ///< AND-array bias rail, fraction of vdd
  double bias_or_frac = 2.0 / 3.0;

  void validate() const;
};

/// Pad every active AND bitline with k fixed-bias LRS cells (and the OR
/// column likewise). The bias rails sit inside the selector threshold of the
/// quiescent BL levels, so the truth table is untouched while each redundant
/// cell draws about half a real literal's current.
dcim::DcimChip protect_redundant(const dcim::DcimChip& base, const ProtectionConfig& cfg);

/// Pad every gate with k constant cells (1 for AND, 0 for OR): the gate fanin
/// grows, the logic does not.
magic::MagicProgram protect_redundant(const magic::MagicProgram& base, const ProtectionConfig& cfg);

/// Maximize every minterm to full fanin (canonical expansion).
sop::SopFunction protect_expand(const sop::SopFunction& f);

struct OverheadReport {
  double area_delta_cells = 0.0; ///< cells added / cells in use
  double area_delta_rows = 0.0;  ///< rows added (or extra OR rows) / rows in use
  double power_delta = 0.0;      ///< mean supply-energy ratio - 1 over all inputs
  double re_effort_factor = 1.0; ///< candidate-space ratio, observed vs true structure
  double obfuscation_score = 0.0; ///< distribution overlap with the decoy class
};

struct EvalConfig {
  device::VariationSpec variation{};
  int n_mc = 300;
  uint64_t seed = 7;
  int jobs = 1;
};

/// Decoy class for the redundant scheme: the unprotected gate whose fanin
/// equals the protected gate's *effective* fanin (each bias cell carries
/// (vdd - v_bias - vth)/(vdd - vth) of a real literal's current).
int effective_redundant_fanin(int k_true, int k_redundant, const dcim::DcimParams& p,
                              const device::SelectorParams& sel, double bias_frac);

OverheadReport evaluate_protection(dcim::DcimChip& original, dcim::DcimChip& protected_chip,
                                   const profile::FaninModelSet& and_model,
                                   const ProtectionConfig& pcfg, const EvalConfig& ecfg);

OverheadReport evaluate_protection(magic::MagicProgram& original,
                                   magic::MagicProgram& protected_prog,
                                   const ProtectionConfig& pcfg, const EvalConfig& ecfg);

/// Histogram overlap coefficient of two sample sets on a pooled grid.
double sample_overlap(const std::vector<double>& a, const std::vector<double>& b);

std::string overhead_to_json(const OverheadReport& r);

} // namespace scare::protect
