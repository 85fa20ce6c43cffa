#include <cmath>

#include "doctest.h"
#include "scare/device.hpp"

using namespace scare;
using namespace scare::device;

TEST_CASE("resistance endpoints match the datasheet values") {
  RramParams p;
  CHECK(rram_resistance({p.gap_min_nm}, p) == doctest::Approx(58.9e3).epsilon(1e-12));
  CHECK(rram_resistance({p.gap_max_nm}, p) == doctest::Approx(6.7e6).epsilon(1e-12));
}

TEST_CASE("mid-gap resistance is the geometric mean of the endpoints") {
  // Independent oracle: sqrt(R_LRS * R_HRS) computed directly.
  RramParams p;
  double expected = std::sqrt(p.r_lrs * p.r_hrs); // 628.1 kOhm
  CHECK(rram_resistance({0.9}, p) == doctest::Approx(expected).epsilon(1e-9));
  CHECK(expected == doctest::Approx(628e3).epsilon(0.01));
}

TEST_CASE("resistance is strictly monotone in gap and clamps far outside") {
  RramParams p;
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    double g = p.gap_min_nm + (p.gap_max_nm - p.gap_min_nm) * i / 100.0;
    double r = rram_resistance({g}, p);
    CHECK(r > prev);
    prev = r;
  }
  CHECK(rram_resistance({-5.0}, p) == rram_resistance({-6.0}, p));
  CHECK(rram_resistance({9.0}, p) == rram_resistance({10.0}, p));
}

TEST_CASE("non-finite gap is a parameter error") {
  RramParams p;
  CHECK_THROWS_AS(rram_resistance({std::nan("")}, p), std::invalid_argument);
}

TEST_CASE("no filament motion below the thresholds") {
  RramParams p;
  RramState s{1.0};
  CHECK(rram_switch_step(s, 0.0, 1e-9, p).gap_nm == s.gap_nm);
  CHECK(rram_switch_step(s, p.v_set_threshold * 0.99, 1e-9, p).gap_nm == s.gap_nm);
  CHECK(rram_switch_step(s, -p.v_reset_threshold * 0.99, 1e-9, p).gap_nm == s.gap_nm);
  CHECK_THROWS_AS(rram_switch_step(s, 1.0, 0.0, p), std::invalid_argument);
}

TEST_CASE("full transition at the nominal write voltage takes the datasheet latency") {
  RramParams p;
  RramState s = hrs_state(p);
  const double dt = 0.1e-9;
  int steps = 0;
  while (s.gap_nm > p.gap_min_nm && steps < 10000) {
    s = rram_switch_step(s, p.v_write_nominal, dt, p);
    ++steps;
  }
  CHECK(steps * dt == doctest::Approx(25e-9).epsilon(0.01));

  // Stepwise integration oracle: half the time leaves the gap strictly
  // inside the endpoints and the resistance strictly between the rails.
  RramState h = hrs_state(p);
  for (int i = 0; i < 125; ++i) h = rram_switch_step(h, p.v_write_nominal, dt, p);
  CHECK(h.gap_nm > p.gap_min_nm);
  CHECK(h.gap_nm < p.gap_max_nm);
  double r = rram_resistance(h, p);
  CHECK(r > p.r_lrs);
  CHECK(r < p.r_hrs);
}

TEST_CASE("switching time decreases strictly with overdrive") {
  RramParams p;
  double prev = 1e9;
  for (double v = 1.0; v <= 3.0; v += 0.25) {
    double t = (p.gap_max_nm - p.gap_min_nm) / p.gap_rate(v);
    CHECK(t < prev);
    prev = t;
  }
}

TEST_CASE("variation spec validation") {
  CHECK_THROWS_AS(VariationSpec{-0.1}.validate(), std::invalid_argument);
  CHECK_THROWS_AS(VariationSpec{0.5}.validate(), std::invalid_argument);
  CHECK_NOTHROW(table_variation().validate());
}

TEST_CASE("zero variation reproduces the nominal chip exactly") {
  DeviceInstance inst({}, 42);
  CHECK(inst.cell_gap_nm(0, true) == RramParams{}.gap_min_nm);
  CHECK(inst.cell_gap_nm(7, false) == RramParams{}.gap_max_nm);
  CHECK(inst.driver_resistance_scale() == 1.0);
  CHECK(inst.bl_capacitance_scale() == 1.0);
}

TEST_CASE("sampled LRS gap spread matches the 3-sigma table entry") {
  VariationSpec spec = table_variation();
  double sum = 0.0, sum2 = 0.0;
  const int n = 1000;
  DeviceInstance inst(spec, 7);
  for (int i = 0; i < n; ++i) {
    double g = inst.cell_gap_nm(i, true);
    sum += g;
    sum2 += g * g;
  }
  double mean = sum / n;
  double sd = std::sqrt(sum2 / n - mean * mean);
  CHECK(sd / mean == doctest::Approx(0.07 / 3.0).epsilon(0.10));
}

TEST_CASE("same seed reproduces the identical instance bit for bit") {
  VariationSpec spec = table_variation();
  DeviceInstance a(spec, 1234), b(spec, 1234);
  CHECK(a.driver_resistance_scale() == b.driver_resistance_scale());
  CHECK(a.bl_capacitance_scale() == b.bl_capacitance_scale());
  for (int i = 0; i < 64; ++i) {
    CHECK(a.cell_gap_nm(i, true) == b.cell_gap_nm(i, true));
    CHECK(a.cell_gap_nm(i, false) == b.cell_gap_nm(i, false));
  }
  DeviceInstance c(spec, 1235);
  CHECK(a.cell_gap_nm(0, true) != c.cell_gap_nm(0, true));
}

TEST_CASE("resistance distribution mean stays within 2% of nominal") {
  VariationSpec spec = table_variation();
  RramParams p;
  DeviceInstance inst(spec, 99);
  for (bool lrs : {true, false}) {
    double sum = 0.0;
    const int n = 2000;
    for (int i = 0; i < n; ++i) sum += rram_resistance({inst.cell_gap_nm(i, lrs)}, p);
    double nominal = lrs ? p.r_lrs : p.r_hrs;
    CHECK(sum / n == doctest::Approx(nominal).epsilon(0.02));
  }
}

TEST_CASE("selector conducts only above its threshold") {
  SelectorParams sel;
  CHECK(cell_path_current(0.3, 58.9e3, sel) == 0.0);
  CHECK(cell_path_current(-0.3, 58.9e3, sel) == 0.0);
  double i = cell_path_current(1.2, 58.9e3, sel, 0.0);
  CHECK(i == doctest::Approx((1.2 - 0.4) / (58.9e3 + 1e3)));
  CHECK(cell_path_current(-1.2, 58.9e3, sel) == doctest::Approx(-i));
}
