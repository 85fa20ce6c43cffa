#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "scare/dcim.hpp"
#include "scare/magic.hpp"
#include "scare/profile.hpp"
#include "scare/sop.hpp"
#include "scare/trace.hpp"

namespace scare::attack {

struct FaninInferenceParams {
  double v_write = 2.4;
  double r_lrs = 58.9e3;
  double r_hrs = 6.7e6;
  int max_in = 8;

  void validate() const;
};

/// Closed-form fanin inversions from a gate's constant output-path current.
double nor_rule_fanin(double current, const FaninInferenceParams& p);
double or_rule_fanin(double current, const FaninInferenceParams& p);
double and_rule_fanin(double current, const FaninInferenceParams& p);

struct Classification {
  int best_fanin = 0;
  std::vector<std::pair<int, double>> likelihoods;
  std::vector<int> ambiguity; ///< fanins within likelihood ratio rho of the best
};

class OutOfModelError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class BudgetError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};
class ContradictionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

Classification classify_fanin(double feature, const profile::FaninModelSet& models,
                              double rho = 0.2);

/// What an attack learned about a chip.
struct AttackReport {
  std::string architecture;
  sop::StructureDescriptor structure;
  std::vector<int> complement_flags; ///< per variable: +1 true, -1 complemented, 0 unused
  int active_bls = -1;               ///< DCIM model 2
  bool has_function = false;
  sop::SopFunction recovered_function;
  uint64_t patterns_used = 0;
  uint64_t brute_force_patterns = 0;
  std::vector<std::string> ambiguity_notes;
  std::vector<std::string> gate_sequence; ///< MAGIC: per-slot classification
};

std::string report_to_json(const AttackReport& r);

/// Attacks talk to a chip only through input patterns, the resulting trace,
/// and the digital output. Implementations advance real chip state per query.
class ChipOracle {
public:
  virtual ~ChipOracle() = default;
  virtual int input_count() const = 0;

  struct Run {
    trace::CurrentTrace trace;
    int output = 0;
  };
  Run run(uint32_t pattern);
  int output(uint32_t pattern); ///< memoized digital query
  uint64_t distinct_patterns() const { return seen_.size(); }

protected:
  virtual Run run_impl(uint32_t pattern) = 0;

private:
  std::set<uint32_t> seen_;
  std::map<uint32_t, int> output_memo_;
};

class DcimChipOracle : public ChipOracle {
public:
  explicit DcimChipOracle(dcim::DcimChip& chip) : chip_(chip) {}
  int input_count() const override { return chip_.function.variable_count(); }

protected:
  Run run_impl(uint32_t pattern) override;

private:
  dcim::DcimChip& chip_;
};

class MagicChipOracle : public ChipOracle {
public:
  explicit MagicChipOracle(magic::MagicProgram& prog) : prog_(prog) {}
  int input_count() const override { return prog_.variable_count; }

protected:
  Run run_impl(uint32_t pattern) override;

private:
  magic::MagicProgram& prog_;
};

/// Protocol constants and device datasheet values the adversary works from.
struct AttackConfig {
  dcim::DcimParams dcim{};
  magic::MagicParams magic{};
  device::RramParams rram{};
  device::SelectorParams selector{};
  FaninInferenceParams rules{};
  double rho = 0.2;
  uint64_t version_space_cap = 200000;
};

/// DCIM model 1 (true-literal functions): all-ones stimulus fixes the OR
/// fanin, all-zeros fixes the AND-array discharge, which is decomposed into
/// per-minterm fanins by best-fit composition of the model means.
AttackReport attack_dcim_m1(ChipOracle& oracle, const profile::FaninModelSet& or_model,
                            const profile::FaninModelSet& and_model, const AttackConfig& cfg = {});

/// DCIM model 2: finds an all-minterms-0 pattern, reads the active-BL count
/// from the next precharge, then recovers the fanin multiset from per-pattern
/// OR/AND cycle readings.
AttackReport attack_dcim_m2(ChipOracle& oracle, const profile::FaninModelSet& or_model,
                            const profile::FaninModelSet& and_model,
                            const profile::FaninModelSet& precharge_model,
                            const AttackConfig& cfg = {});

/// MAGIC model 1 (true-literal functions): per-slot steady currents under the
/// all-zeros stimulus, gate type from the rule bands, fanin from rule
/// inversion cross-checked against the calibrated models.
AttackReport attack_magic_m1(ChipOracle& oracle,
                             const std::vector<const profile::FaninModelSet*>& current_models,
                             const AttackConfig& cfg = {});

/// MAGIC model 2: init-write switching counts plus the one-at-a-time flip
/// test recover per-variable polarity; a follow-up all-literals-0 pattern
/// recovers the gate structure.
AttackReport attack_magic_m2(ChipOracle& oracle, const AttackConfig& cfg = {});

enum class Paradigm { Dcim, Magic, Unknown };
const char* paradigm_name(Paradigm p);

/// DCIM shows CMOS short-circuit pulses and low compute power; sequential
/// MAGIC shows per-gate write plateaus and completion jumps.
Paradigm identify_paradigm(const trace::CurrentTrace& tr);

struct ExtractionResult {
  sop::SopFunction function;
  uint64_t patterns_used = 0;
};

/// Structure-guided exact-function extraction with adaptive pattern choice.
/// complement_flags (from model-2 attacks) may pin per-variable polarity;
/// pass an empty vector when unknown.
ExtractionResult extract_function(ChipOracle& oracle, const sop::StructureDescriptor& structure,
                                  bool allow_complements,
                                  const std::vector<int>& complement_flags = {},
                                  const AttackConfig& cfg = {});

} // namespace scare::attack
