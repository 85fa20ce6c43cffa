#include "doctest.h"
#include "scare/attack.hpp"
#include "scare/protect.hpp"

using namespace scare;
using namespace scare::protect;

namespace {

const profile::FaninModelSet& and_model() {
  static auto model = [] {
    profile::CalibrationConfig cfg;
    cfg.arch = profile::Architecture::Dcim;
    cfg.gate = "and";
    cfg.n_mc = 8;
    cfg.seed = 1000;
    return profile::calibrate(cfg);
  }();
  return model;
}

} // namespace

TEST_CASE("zero redundancy is the identity protection") {
  auto f = sop::parse_function("ab+c");
  auto chip = dcim::program_dcim(f);
  ProtectionConfig cfg;
  cfg.k_redundant = 0;
  auto prot = protect_redundant(chip, cfg);
  CHECK(prot.bias_rows == 0);
  EvalConfig ecfg;
  ecfg.n_mc = 8;
  auto rep = evaluate_protection(chip, prot, and_model(), cfg, ecfg);
  CHECK(rep.power_delta == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(rep.area_delta_cells == doctest::Approx(0.0));
  CHECK(rep.re_effort_factor == doctest::Approx(1.0));
}

TEST_CASE("redundant-input protection preserves the truth table exhaustively") {
  for (const char* txt : {"ab+c", "a+bc", "ab'+cd", "abc+a'd"}) {
    auto f = sop::parse_function(txt);
    ProtectionConfig cfg;
    cfg.k_redundant = 2;
    for (bool randomize : {false, true}) {
      cfg.randomize = randomize;
      cfg.seed = 5;
      auto chip = dcim::program_dcim(f);
      auto prot = protect_redundant(chip, cfg);
      for (uint32_t p = 0; p < (1u << f.variable_count()); ++p) {
        auto run = dcim::run_dcim(prot, p);
        REQUIRE(static_cast<bool>(run.outputs[0]) == sop::evaluate(f, p));
      }
    }
  }
}

TEST_CASE("MAGIC redundant padding preserves the truth table") {
  for (const char* txt : {"ab+c", "a'b+cd"}) {
    auto f = sop::parse_function(txt);
    auto prog = magic::compile_magic(f);
    ProtectionConfig cfg;
    cfg.k_redundant = 2;
    auto prot = protect_redundant(prog, cfg);
    for (const auto& g : prot.gates) CHECK(g.inputs.size() >= 3);
    for (uint32_t p = 0; p < (1u << f.variable_count()); ++p) {
      auto fresh = protect_redundant(magic::compile_magic(f), cfg);
      auto run = magic::run_program(fresh, p);
      REQUIRE(static_cast<bool>(run.output) == sop::evaluate(f, p));
    }
  }
}

TEST_CASE("redundant rows respect array capacity") {
  auto f = sop::parse_function("abcdefgh"); // 8 literal rows in a 16-row array
  auto chip = dcim::program_dcim(f);
  ProtectionConfig cfg;
  cfg.k_redundant = 9;
  CHECK_THROWS_AS(protect_redundant(chip, cfg), std::invalid_argument);
  cfg.k_redundant = 20;
  CHECK_THROWS_AS(protect_redundant(chip, cfg), std::invalid_argument);
}

TEST_CASE("expansion is the canonical maximization and preserves logic") {
  auto f = sop::parse_function("a+bc", 4);
  auto e = protect_expand(f);
  CHECK(e.minterm_count() == 10);
  CHECK(sop::truth_table(e) == sop::truth_table(f));
}

TEST_CASE("a+bc and ab+ac+ad+bd+cd expand to identical structure descriptors") {
  auto e1 = protect_expand(sop::parse_function("a+bc", 4));
  auto e2 = protect_expand(sop::parse_function("ab+ac+ad+bd+cd", 4));
  CHECK(sop::structure_of(e1) == sop::structure_of(e2));
}

TEST_CASE("expanded MAGIC programs are gate-for-gate uniform at full fanin") {
  // Every AND gate of both expanded programs reads all variables, so the
  // per-gate side channel cannot tell the two functions apart.
  auto f1 = sop::parse_function("a+bc", 3);
  auto f2 = sop::parse_function("abd+a'b'd+a'bd'");
  for (const auto& f : {f1, f2}) {
    auto prog = magic::compile_magic(protect_expand(f));
    REQUIRE(!prog.gates.empty());
    for (size_t g = 0; g + 1 < prog.gates.size(); ++g) {
      CHECK(prog.gates[g].type == magic::GateType::And);
      CHECK(static_cast<int>(prog.gates[g].inputs.size()) == f.variable_count());
    }
  }
}

TEST_CASE("redundant protection increases power and obfuscates the fanin") {
  auto f = sop::parse_function("ab", 8);
  auto chip = dcim::program_dcim(f);
  ProtectionConfig cfg;
  cfg.k_redundant = 2;
  auto prot = protect_redundant(chip, cfg);
  EvalConfig ecfg;
  ecfg.n_mc = 200;
  ecfg.variation = device::table_variation();
  auto rep = evaluate_protection(chip, prot, and_model(), cfg, ecfg);
  CHECK(rep.power_delta > 0.0);
  CHECK(rep.area_delta_cells > 0.0);
  CHECK(rep.obfuscation_score > 0.0);
  CHECK(rep.re_effort_factor >= 1.0);
}

TEST_CASE("AND2 plus two redundant cells lands on the unprotected AND3 distribution") {
  // Each VDD/3-biased cell carries half a literal's current, so the decoy
  // class sits one fanin up, not two.
  dcim::DcimParams params;
  device::SelectorParams sel;
  CHECK(effective_redundant_fanin(2, 2, params, sel, 1.0 / 3.0) == 3);

  auto f = sop::parse_function("ab", 8);
  auto chip = dcim::program_dcim(f);
  ProtectionConfig cfg;
  cfg.k_redundant = 2;
  auto prot = protect_redundant(chip, cfg);
  EvalConfig ecfg;
  ecfg.n_mc = 400;
  ecfg.variation = device::table_variation();
  auto rep = evaluate_protection(chip, prot, and_model(), cfg, ecfg);
  CHECK(rep.obfuscation_score > 0.8);
}

TEST_CASE("expansion forces the attack to see the uniform structure") {
  auto f = sop::parse_function("abc+abd'+cd", 4);
  auto expanded = protect_expand(f);
  dcim::ChipDims dims;
  dims.and_bl = std::max(dims.and_bl, expanded.minterm_count());
  dims.or_wl = std::max(dims.or_wl, expanded.minterm_count());
  auto chip = dcim::program_dcim(expanded, dims);
  attack::DcimChipOracle oracle(chip);
  profile::CalibrationConfig ccal;
  ccal.arch = profile::Architecture::Dcim;
  ccal.gate = "or";
  ccal.n_mc = 8;
  auto or_model = profile::calibrate(ccal);
  auto report = attack::attack_dcim_m1(oracle, or_model, and_model());
  CHECK(report.structure.or_fanin == expanded.minterm_count());
  for (int k : report.structure.and_fanins) CHECK(k == 4);
}

TEST_CASE("overhead report serializes") {
  OverheadReport r;
  r.power_delta = 0.21;
  auto j = overhead_to_json(r);
  CHECK(j.find("\"power_delta\": 0.21") != std::string::npos);
}

TEST_CASE("protection config validation") {
  ProtectionConfig cfg;
  cfg.k_redundant = -1;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.k_redundant = 1;
  cfg.bias_and_frac = 1.5;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
