#include <bit>
#include <functional>
#include <map>
#include <tuple>

#include "doctest.h"
#include "scare/attack.hpp"
#include "scare/rng.hpp"

using namespace scare;
using namespace scare::attack;

namespace {

const profile::FaninModelSet& dcim_model(const std::string& gate) {
  static std::map<std::string, profile::FaninModelSet> cache;
  auto it = cache.find(gate);
  if (it == cache.end()) {
    profile::CalibrationConfig cfg;
    cfg.arch = profile::Architecture::Dcim;
    cfg.gate = gate;
    cfg.n_mc = 8; // zero variation: delta models
    cfg.seed = 900;
    it = cache.emplace(gate, profile::calibrate(cfg)).first;
  }
  return it->second;
}

const profile::FaninModelSet& magic_model(const std::string& gate) {
  static std::map<std::string, profile::FaninModelSet> cache;
  auto it = cache.find(gate);
  if (it == cache.end()) {
    profile::CalibrationConfig cfg;
    cfg.arch = profile::Architecture::Magic;
    cfg.gate = gate;
    cfg.feature = profile::FeatureKind::WindowMeanCurrent;
    cfg.fanin_min = 1;
    cfg.fanin_max = 8;
    cfg.n_mc = 8;
    cfg.seed = 901;
    it = cache.emplace(gate, profile::calibrate(cfg)).first;
  }
  return it->second;
}

sop::StructureDescriptor run_dcim_m1(const sop::SopFunction& f) {
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  return attack_dcim_m1(oracle, dcim_model("or"), dcim_model("and")).structure;
}

} // namespace

TEST_CASE("closed-form rule inversions on exact algebra") {
  FaninInferenceParams p;
  CHECK(and_rule_fanin(p.v_write / (3.0 * p.r_hrs), p) == doctest::Approx(2.0));
  CHECK(or_rule_fanin(2.0 * p.v_write / (3.0 * p.r_hrs), p) == doctest::Approx(2.0));
  CHECK(nor_rule_fanin(5.0 * p.v_write / p.r_hrs, p) == doctest::Approx(5.0));
}

TEST_CASE("rule inversions are exact round trips of simulated steady currents") {
  FaninInferenceParams rules;
  for (int n = 2; n <= 8; ++n) {
    auto pa = magic::single_gate_program(magic::GateType::And, n);
    double ia = magic::run_program(pa, 0u).gate_results[0].steady_current;
    CHECK(std::llround(and_rule_fanin(ia, rules)) == n);

    auto po = magic::single_gate_program(magic::GateType::Or, n);
    double io = magic::run_program(po, 0u).gate_results[0].steady_current;
    CHECK(std::llround(or_rule_fanin(io, rules)) == n);

    auto pn = magic::single_gate_program(magic::GateType::Nor, n);
    double in = magic::run_program(pn, 0u).gate_results[0].steady_current;
    CHECK(std::llround(nor_rule_fanin(in, rules)) == n);
  }
}

TEST_CASE("classifier basics") {
  const auto& model = dcim_model("or");
  for (int k = 0; k <= 8; ++k) {
    auto cls = classify_fanin(model.find(k)->mean, model);
    CHECK(cls.best_fanin == k);
    CHECK(cls.ambiguity == std::vector<int>{k});
  }
  CHECK_THROWS_AS(classify_fanin(model.find(8)->mean * 50.0, model), OutOfModelError);
}

TEST_CASE("a feature midway between overlapping models keeps both candidates") {
  profile::FaninModelSet m;
  m.gate = "or";
  m.bin_edges = {0.0, 1.0};
  for (int k = 7; k <= 8; ++k) {
    profile::FaninStats st;
    st.fanin = k;
    st.mean = k * 1e-6;
    st.stddev = 0.8e-6; // heavy overlap
    m.fanins.push_back(st);
  }
  auto cls = classify_fanin(7.5e-6, m, 0.2);
  CHECK(cls.ambiguity == std::vector<int>{7, 8});
}

TEST_CASE("DCIM attack model 1 recovers the example structures") {
  auto s1 = run_dcim_m1(sop::parse_function("a+bc"));
  CHECK(s1.or_fanin == 2);
  CHECK(s1.and_fanins == std::vector<int>{1, 2});

  auto s2 = run_dcim_m1(sop::parse_function("ab+cd"));
  CHECK(s2.or_fanin == 2);
  CHECK(s2.and_fanins == std::vector<int>{2, 2});

  auto s3 = run_dcim_m1(sop::SopFunction(3));
  CHECK(s3.or_fanin == 0);
  CHECK(s3.and_fanins.empty());

  auto s4 = run_dcim_m1(sop::parse_function("ab+cde+fgh"));
  CHECK(s4.or_fanin == 3);
  CHECK(s4.and_fanins == std::vector<int>{2, 3, 3});
}

TEST_CASE("DCIM model-1 structure recovery over a random true-literal corpus") {
  Rng rng(4242);
  int checked = 0;
  while (checked < 40) {
    int n = 2 + static_cast<int>(rng.next_below(7));
    sop::SopFunction f(n);
    int m = 1 + static_cast<int>(rng.next_below(8));
    for (int j = 0; j < m; ++j) {
      sop::Minterm mt;
      int fanin = 1 + static_cast<int>(rng.next_below(n));
      while (std::popcount(mt.pos) < fanin) mt.pos |= 1u << rng.next_below(n);
      try {
        f.add_minterm(mt);
      } catch (const std::invalid_argument&) {
      }
    }
    auto expect = sop::structure_of(f);
    auto got = run_dcim_m1(f);
    REQUIRE(got.or_fanin == expect.or_fanin);
    REQUIRE(got.and_fanins == expect.and_fanins);
    ++checked;
  }
}

TEST_CASE("DCIM attack model 2 finds the BL count from the refill charge") {
  auto f = sop::parse_function("ab'+c");
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  auto report = attack_dcim_m2(oracle, dcim_model("or"), dcim_model("and"), dcim_model("precharge"));
  CHECK(report.active_bls == 2);
  CHECK(report.structure.or_fanin == 2);
  CHECK(report.structure.and_fanins == std::vector<int>{1, 2});
}

TEST_CASE("DCIM model 2 on complemented corpora") {
  for (const char* txt : {"a'b+c'd", "ab'c+a'bc'", "a'+bc'd", "abc'd+ab'cd+a'bcd"}) {
    auto f = sop::parse_function(txt);
    auto chip = dcim::program_dcim(f);
    DcimChipOracle oracle(chip);
    auto report =
        attack_dcim_m2(oracle, dcim_model("or"), dcim_model("and"), dcim_model("precharge"));
    auto expect = sop::structure_of(f);
    CHECK(report.structure.or_fanin == expect.or_fanin);
    CHECK(report.structure.and_fanins == expect.and_fanins);
    CHECK(report.patterns_used <= report.brute_force_patterns);
  }
}

TEST_CASE("a tautology exhausts the model-2 pattern budget") {
  auto f = sop::parse_function("a+a'");
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  CHECK_THROWS_AS(
      attack_dcim_m2(oracle, dcim_model("or"), dcim_model("and"), dcim_model("precharge")),
      BudgetError);
}

TEST_CASE("precharge charge scales linearly with the BL count") {
  auto pre = dcim_model("precharge");
  double unit = pre.find(1)->mean;
  for (int k = 2; k <= 8; ++k)
    CHECK(pre.find(k)->mean == doctest::Approx(k * unit).epsilon(0.05));
}

TEST_CASE("MAGIC attack model 1 recovers the gate sequence") {
  auto f = sop::parse_function("ab+cd");
  auto prog = magic::compile_magic(f);
  MagicChipOracle oracle(prog);
  std::vector<const profile::FaninModelSet*> models{&magic_model("and"), &magic_model("or")};
  auto report = attack_magic_m1(oracle, models);
  REQUIRE(report.gate_sequence.size() == 3);
  CHECK(report.gate_sequence[0] == "and2");
  CHECK(report.gate_sequence[1] == "and2");
  CHECK(report.gate_sequence[2] == "or2");
  CHECK(report.structure.or_fanin == 2);
  CHECK(report.structure.and_fanins == std::vector<int>{2, 2});
  CHECK(report.ambiguity_notes.empty());
}

TEST_CASE("MAGIC model 1 handles single-literal minterms and single-minterm programs") {
  {
    auto f = sop::parse_function("a+bc");
    auto prog = magic::compile_magic(f);
    MagicChipOracle oracle(prog);
    auto report = attack_magic_m1(oracle, {});
    CHECK(report.structure.or_fanin == 2);
    CHECK(report.structure.and_fanins == std::vector<int>{1, 2});
  }
  {
    auto f = sop::parse_function("abc");
    auto prog = magic::compile_magic(f);
    MagicChipOracle oracle(prog);
    auto report = attack_magic_m1(oracle, {});
    CHECK(report.structure.or_fanin == 1);
    CHECK(report.structure.and_fanins == std::vector<int>{3});
  }
}

TEST_CASE("MAGIC attack model 2 recovers polarity flags") {
  auto f = sop::parse_function("ab'd", 4);
  auto prog = magic::compile_magic(f);
  MagicChipOracle oracle(prog);
  auto report = attack_magic_m2(oracle);
  REQUIRE(report.complement_flags.size() == 4);
  CHECK(report.complement_flags[0] == 1);  // a used true
  CHECK(report.complement_flags[1] == -1); // b used complemented
  CHECK(report.complement_flags[2] == 0);  // c unused: flip changes nothing
  CHECK(report.complement_flags[3] == 1);
  CHECK(report.structure.or_fanin == 1);
  CHECK(report.structure.and_fanins == std::vector<int>{3});
}

TEST_CASE("MAGIC model 2 structure recovery on complemented functions") {
  for (const char* txt : {"a'b+cd'", "ab'c'+a'bc", "a'+b'c"}) {
    auto f = sop::parse_function(txt);
    auto prog = magic::compile_magic(f);
    MagicChipOracle oracle(prog);
    auto report = attack_magic_m2(oracle);
    auto expect = sop::structure_of(f);
    CHECK(report.structure.or_fanin == expect.or_fanin);
    CHECK(report.structure.and_fanins == expect.and_fanins);
  }
}

TEST_CASE("paradigm identification") {
  auto f = sop::parse_function("ab+cd");
  int dcim_hits = 0, magic_hits = 0;
  const int trials = 20;
  Rng rng(5150);
  for (int t = 0; t < trials; ++t) {
    uint32_t p = static_cast<uint32_t>(rng.next_below(16));
    auto chip = dcim::program_dcim(f);
    dcim_hits += identify_paradigm(dcim::run_dcim(chip, p).trace) == Paradigm::Dcim;
    auto prog = magic::compile_magic(f);
    magic_hits += identify_paradigm(magic::run_program(prog, p).trace) == Paradigm::Magic;
  }
  CHECK(dcim_hits == trials);
  CHECK(magic_hits == trials);
  CHECK(identify_paradigm(trace::CurrentTrace(1e-11, 1000)) == Paradigm::Unknown);
}

TEST_CASE("extraction on ab+cd stays within the published pattern budget") {
  auto f = sop::parse_function("ab+cd");
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  auto res = extract_function(oracle, sop::structure_of(f), false);
  CHECK(sop::truth_table(res.function) == sop::truth_table(f));
  CHECK(res.patterns_used <= 6); // at least 62.5% below the 16-pattern brute force
}

TEST_CASE("extraction on a+bc beats half the brute-force budget") {
  auto f = sop::parse_function("a+bc");
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  auto res = extract_function(oracle, sop::structure_of(f), false);
  CHECK(sop::truth_table(res.function) == sop::truth_table(f));
  CHECK(res.patterns_used <= 4); // >= 50% reduction vs the 8-pattern brute force
}

TEST_CASE("a unique candidate needs at most one confirmation pattern") {
  auto f = sop::parse_function("abc");
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  auto res = extract_function(oracle, sop::structure_of(f), false);
  CHECK(res.patterns_used <= 1);
  CHECK(sop::truth_table(res.function) == sop::truth_table(f));
}

TEST_CASE("extraction never exceeds the brute-force budget and stays consistent") {
  Rng rng(31337);
  for (int iter = 0; iter < 20; ++iter) {
    int n = 2 + static_cast<int>(rng.next_below(5));
    sop::SopFunction f(n);
    int m = 1 + static_cast<int>(rng.next_below(4));
    for (int j = 0; j < m; ++j) {
      sop::Minterm mt;
      int fanin = 1 + static_cast<int>(rng.next_below(n));
      while (std::popcount(mt.pos) < fanin) mt.pos |= 1u << rng.next_below(n);
      try {
        f.add_minterm(mt);
      } catch (const std::invalid_argument&) {
      }
    }
    auto chip = dcim::program_dcim(f);
    DcimChipOracle oracle(chip);
    auto res = extract_function(oracle, sop::structure_of(f), false);
    CHECK(res.patterns_used <= (1u << n));
    // recovered function agrees with the chip on every probed pattern
    for (uint32_t p = 0; p < (1u << n); ++p)
      CHECK(sop::evaluate(res.function, p) == sop::evaluate(f, p));
  }
}

TEST_CASE("complemented extraction uses the polarity flags from model 2") {
  auto f = sop::parse_function("a'b+cd'");
  auto prog = magic::compile_magic(f);
  MagicChipOracle oracle(prog);
  auto report = attack_magic_m2(oracle);
  auto res = extract_function(oracle, report.structure, true, report.complement_flags);
  CHECK(sop::truth_table(res.function) == sop::truth_table(f));
}

TEST_CASE("a wrong structure raises a contradiction") {
  auto f = sop::parse_function("ab+cd");
  auto chip = dcim::program_dcim(f);
  DcimChipOracle oracle(chip);
  sop::StructureDescriptor wrong{1, {4}, {}};
  CHECK_THROWS_AS(extract_function(oracle, wrong, false), ContradictionError);
}

TEST_CASE("attack reports serialize to JSON") {
  AttackReport r;
  r.architecture = "dcim";
  r.structure = {2, {1, 2}, {}};
  r.patterns_used = 3;
  r.brute_force_patterns = 8;
  auto j = report_to_json(r);
  CHECK(j.find("\"or_fanin\": 2") != std::string::npos);
  CHECK(j.find("\"patterns_used\": 3") != std::string::npos);
}

TEST_CASE("fanin multiset aggregates identify every realizable structure") {
  // The model-2 solver keys a structure by (minterm count, total literals,
  // satisfied-pattern count, max fanin); verify the key is collision-free
  // over every multiset it can ever see.
  for (int n = 2; n <= 8; ++n) {
    std::map<std::tuple<size_t, int64_t, int64_t, int>, std::vector<std::vector<int>>> seen;
    std::vector<int> cur;
    std::function<void(int)> rec = [&](int lo) {
      if (!cur.empty()) {
        int64_t sum = 0, zeros = 0;
        for (int f : cur) {
          sum += f;
          zeros += int64_t{1} << (n - f);
        }
        seen[{cur.size(), sum, zeros, cur.back()}].push_back(cur);
      }
      if (cur.size() == 8) return;
      for (int v = lo; v <= n; ++v) {
        cur.push_back(v);
        rec(v);
        cur.pop_back();
      }
    };
    rec(1);
    for (auto& [key, group] : seen) {
      INFO("n=", n);
      CHECK(group.size() == 1);
    }
  }
}
