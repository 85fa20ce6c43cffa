#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "scare/profile.hpp"

using namespace scare;
using namespace scare::profile;

namespace {

CalibrationConfig dcim_cfg(const std::string& gate, int n_mc = 200, bool varied = true) {
  CalibrationConfig cfg;
  cfg.arch = Architecture::Dcim;
  cfg.gate = gate;
  cfg.n_mc = n_mc;
  if (varied) cfg.variation = device::table_variation();
  cfg.seed = 314;
  return cfg;
}

} // namespace

TEST_CASE("calibration is deterministic under a fixed seed") {
  auto cfg = dcim_cfg("or", 32);
  auto a = calibrate(cfg);
  auto b = calibrate(cfg);
  REQUIRE(a.fanins.size() == b.fanins.size());
  for (size_t i = 0; i < a.fanins.size(); ++i) {
    CHECK(a.fanins[i].samples == b.fanins[i].samples);
  }
  cfg.jobs = 4; // parallel fan-out must merge to the identical model
  auto c = calibrate(cfg);
  for (size_t i = 0; i < a.fanins.size(); ++i) CHECK(a.fanins[i].samples == c.fanins[i].samples);
}

TEST_CASE("zero variation collapses to delta distributions with ordered means") {
  auto cfg = dcim_cfg("or", 8, false);
  auto model = calibrate(cfg);
  double prev = -1e18;
  for (const auto& f : model.fanins) {
    CHECK(f.stddev == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(f.mean > prev);
    prev = f.mean;
  }
}

TEST_CASE("DCIM AND model: mean and STD both rise monotonically with fanin") {
  auto model = calibrate(dcim_cfg("and", 400));
  double pm = -1e18, ps = -1e18;
  for (const auto& f : model.fanins) {
    CHECK(f.mean > pm);
    CHECK(f.stddev > ps);
    pm = f.mean;
    ps = f.stddev;
  }
}

TEST_CASE("DCIM OR model: means rise monotonically (STD trend unconstrained)") {
  auto model = calibrate(dcim_cfg("or", 400));
  double pm = -1e18;
  for (const auto& f : model.fanins) {
    CHECK(f.mean > pm);
    pm = f.mean;
  }
}

TEST_CASE("precharge model rises with the active BL count") {
  auto model = calibrate(dcim_cfg("precharge", 200));
  double pm = -1e18;
  for (const auto& f : model.fanins) {
    CHECK(f.mean > pm);
    pm = f.mean;
  }
}

TEST_CASE("adjacent overlap coefficient") {
  auto degenerate = calibrate(dcim_cfg("or", 8, false));
  for (int k = 0; k < 8; ++k) CHECK(adjacent_overlap(degenerate, k) == 0.0);

  auto model = calibrate(dcim_cfg("or", 400));
  // identical distributions overlap fully
  auto twin = model;
  twin.fanins[1] = twin.fanins[0];
  twin.fanins[1].fanin = 1;
  CHECK(adjacent_overlap(twin, 0) == doctest::Approx(1.0).epsilon(1e-9));
  // the crowded top of the fanin range keeps a noticeable overlap
  CHECK(adjacent_overlap(model, 7) > 0.0);
  CHECK_THROWS_AS(adjacent_overlap(model, 8), std::invalid_argument);
}

TEST_CASE("MAGIC op-time models keep their fanin trends under variation") {
  CalibrationConfig cfg;
  cfg.arch = Architecture::Magic;
  cfg.gate = "and";
  cfg.feature = FeatureKind::OpTime;
  cfg.fanin_min = 2;
  cfg.fanin_max = 8;
  cfg.n_mc = 150;
  cfg.variation = device::table_variation();
  cfg.seed = 11;
  auto and_model = calibrate(cfg);
  double prev = -1e18;
  for (const auto& f : and_model.fanins) {
    CHECK(f.mean > prev);
    prev = f.mean;
  }
  cfg.gate = "or";
  auto or_model = calibrate(cfg);
  prev = 1e18;
  for (const auto& f : or_model.fanins) {
    CHECK(f.mean < prev);
    prev = f.mean;
  }
}

TEST_CASE("model JSON round trip") {
  auto model = calibrate(dcim_cfg("or", 32));
  auto path = std::filesystem::temp_directory_path() / "scare_model_roundtrip.json";
  save_model(path.string(), model);
  auto loaded = load_model(path.string());
  CHECK(loaded.gate == model.gate);
  CHECK(loaded.vdd == model.vdd);
  CHECK(loaded.window == model.window);
  REQUIRE(loaded.fanins.size() == model.fanins.size());
  for (size_t i = 0; i < model.fanins.size(); ++i) {
    CHECK(loaded.fanins[i].samples == model.fanins[i].samples);
    CHECK(loaded.fanins[i].mean == model.fanins[i].mean);
  }
  std::filesystem::remove(path);
}

TEST_CASE("subsampling the full population shows zero degradation") {
  auto model = calibrate(dcim_cfg("and", 64));
  auto study = subsample_study(model, {64}, 10, 5);
  CHECK(study.rows[0].margin_degradation == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(study.rows[0].margin_estimator_std == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("chip-count study: fewer chips degrade the worst-case margin more") {
  auto model = calibrate(dcim_cfg("and", 500));
  auto study = subsample_study(model, {25, 50, 100}, 150, 17);
  REQUIRE(study.rows.size() == 3);
  CHECK(study.full_margin > 0.0);
  // worst adjacent pair of the AND model is the top of the fanin range
  CHECK(study.worst_fanin_high == study.worst_fanin_low + 1);
  CHECK(study.rows[0].margin_degradation >= study.rows[1].margin_degradation);
  CHECK(study.rows[1].margin_degradation >= study.rows[2].margin_degradation);
  CHECK(study.rows[0].margin_estimator_std > 0.0);
  CHECK(study.rows[0].margin_estimator_std >= study.rows[2].margin_estimator_std);
  CHECK_THROWS_AS(subsample_study(model, {501}, 10, 1), std::invalid_argument);
}

TEST_CASE("DCIM mean current rises strictly with vdd for every fanin") {
  auto cfg = dcim_cfg("or", 24);
  std::vector<double> grid{0.9, 1.2, 1.5, 1.8};
  auto rows = voltage_sweep(cfg, grid);
  for (int fanin = 0; fanin <= 8; ++fanin) {
    double prev = -1e18;
    for (const auto& r : rows) {
      if (r.fanin != fanin) continue;
      CHECK(r.mean > prev);
      prev = r.mean;
    }
  }
}

TEST_CASE("MAGIC op-time falls strictly with v_write in the sweep") {
  CalibrationConfig cfg;
  cfg.arch = Architecture::Magic;
  cfg.gate = "nor";
  cfg.feature = FeatureKind::OpTime;
  cfg.fanin_min = 2;
  cfg.fanin_max = 4;
  cfg.n_mc = 16;
  cfg.variation = device::table_variation();
  std::vector<double> grid{2.2, 2.6, 3.0};
  auto rows = voltage_sweep(cfg, grid);
  for (int fanin = 2; fanin <= 4; ++fanin) {
    double prev = 1e18;
    for (const auto& r : rows) {
      if (r.fanin != fanin) continue;
      CHECK(r.mean < prev);
      prev = r.mean;
    }
  }
}

TEST_CASE("sweep grids match the published voltage ranges") {
  auto d = dcim_sweep_grid();
  CHECK(d.size() == 26);
  CHECK(d.front() == doctest::Approx(0.75));
  CHECK(d.back() == doctest::Approx(2.0));
  auto m = magic_sweep_grid();
  CHECK(m.size() == 9);
  CHECK(m.front() == doctest::Approx(2.2));
  CHECK(m.back() == doctest::Approx(3.0));
}

TEST_CASE("init-write current model counts switching cells") {
  CalibrationConfig cfg;
  cfg.arch = Architecture::Magic;
  cfg.gate = "init_write";
  cfg.fanin_min = 1;
  cfg.fanin_max = 9;
  cfg.n_mc = 32;
  cfg.variation = device::table_variation();
  auto model = calibrate(cfg);
  double prev = 0.0;
  for (const auto& f : model.fanins) {
    CHECK(f.mean > prev);
    prev = f.mean;
  }
  // amplitude is close to k times the single-cell LRS write current
  double unit = model.fanins[0].mean;
  CHECK(model.fanins[8].mean == doctest::Approx(9.0 * unit).epsilon(0.02));
}

TEST_CASE("bad calibration inputs are rejected") {
  auto cfg = dcim_cfg("or", 1);
  CHECK_THROWS_AS(calibrate(cfg), std::invalid_argument);
  cfg = dcim_cfg("bogus", 8);
  CHECK_THROWS_AS(calibrate(cfg), std::invalid_argument);
}
