#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "scare/device.hpp"
#include "scare/dcim.hpp"
#include "scare/magic.hpp"
#include "scare/trace.hpp"

namespace scare::profile {

enum class Architecture { Dcim, Magic };

const char* architecture_name(Architecture a);
Architecture architecture_from_name(const std::string& s);

/// Feature families an adversary models per (architecture, gate, fanin).
enum class FeatureKind { WindowMeanCurrent, OpTime, PrechargeCurrent, InitWriteCurrent };

const char* feature_kind_name(FeatureKind k);

struct FaninStats {
  int fanin = 0;
  std::vector<double> samples; ///< in Monte Carlo order
  double mean = 0.0;
  double stddev = 0.0;
  std::vector<double> density; ///< histogram PDF on the set's common bin grid

  /// Empirical CDF at x.
  double cdf(double x) const;
};

/// The adversary's pre-calculated side-channel model for one feature.
struct FaninModelSet {
  Architecture arch = Architecture::Dcim;
  std::string gate; ///< "or" | "and" | "precharge" (DCIM), "and" | "or" | "nor" | "init_write" (MAGIC)
  FeatureKind feature = FeatureKind::WindowMeanCurrent;
  double vdd = 1.2;
  trace::MeasurementWindow window{}; ///< shared measurement window (zero for op-time)
  int sample_count = 0;
  uint64_t seed = 0;
  std::vector<double> bin_edges; ///< common histogram grid over the pooled range
  std::vector<FaninStats> fanins;

  const FaninStats* find(int fanin) const;
  int min_fanin() const;
  int max_fanin() const;
};

struct CalibrationConfig {
  Architecture arch = Architecture::Dcim;
  std::string gate = "or";
  int fanin_min = 0;
  int fanin_max = 8;
  int n_mc = 1000;
  double vdd = 0.0; ///< 0 = architecture default
  FeatureKind feature = FeatureKind::OpTime; ///< for MAGIC gates: OpTime or WindowMeanCurrent
  device::VariationSpec variation{};
  uint64_t seed = 1;
  int jobs = 1;
  dcim::DcimParams dcim{};
  magic::MagicParams magic{};
  device::RramParams rram{};
  device::SelectorParams selector{};

  FeatureKind feature_hint() const;
};

/// Monte Carlo calibration with the attack-aligned stimulus (all-ones for
/// charge features, all-zeros for discharge/steady features). Sample i of
/// every fanin shares one device instance seed (common random numbers), so
/// fanin trends survive estimation noise. Deterministic under `seed`.
FaninModelSet calibrate(const CalibrationConfig& cfg);

/// Overlap coefficient between the PDFs of fanin n and n+1 on the common grid.
double adjacent_overlap(const FaninModelSet& model, int fanin);

/// Simulate one chip's feature for a given fanin (the attack-side measurement).
double simulate_feature(const CalibrationConfig& cfg, int fanin, const device::DeviceInstance& inst);

/// Window-mean feature for a DCIM trace with the quiet-window leakage
/// baseline subtracted; shared by calibration and the attack side.
/// gate: "or" (cycle-2 supply draw), "and" (cycle-1 ground), "precharge"
/// (cycle-1 supply draw).
double dcim_window_feature(const trace::CurrentTrace& tr, const std::string& gate,
                           const trace::MeasurementWindow& window,
                           const dcim::PhaseSchedule& sched);

struct SubsampleRow {
  int chips = 0;
  double margin_degradation = 0.0; ///< mean |margin_sub - margin_full| / margin_full
  double margin_estimator_std = 0.0; ///< std of margin_sub across trials / margin_full
};

struct SubsampleStudy {
  int worst_fanin_low = 0; ///< worst-case adjacent pair of the full model
  int worst_fanin_high = 0;
  double full_margin = 0.0;
  std::vector<SubsampleRow> rows;
};

/// How much an adversary loses by owning `chips` test chips instead of the
/// full calibration population.
SubsampleStudy subsample_study(const FaninModelSet& model, const std::vector<int>& chip_counts,
                               int trials, uint64_t seed);

std::string model_to_json(const FaninModelSet& model);
FaninModelSet model_from_json(const std::string& text);
void save_model(const std::string& path, const FaninModelSet& model);
FaninModelSet load_model(const std::string& path);

struct SweepRow {
  double vdd = 0.0;
  std::string gate;
  int fanin = 0;
  double mean = 0.0;
  double stddev = 0.0;
  double overlap_with_next = 0.0; ///< -1 when no next fanin
};

std::vector<double> dcim_sweep_grid();  ///< 0.75 .. 2.0 V, 50 mV steps
std::vector<double> magic_sweep_grid(); ///< 2.2 .. 3.0 V, 100 mV steps

std::vector<SweepRow> voltage_sweep(const CalibrationConfig& base, const std::vector<double>& grid);
void write_sweep_csv(const std::string& path, const std::vector<SweepRow>& rows);

} // namespace scare::profile
