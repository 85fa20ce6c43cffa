// scare: behavioral side-channel workbench for RRAM in-memory computing.
// Subcommands mirror the attack workflow: simulate victim chips, calibrate
// side-channel models, run the attacks, apply countermeasures, sweep supply
// voltages, and emit plot-ready report data.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "scare/attack.hpp"
#include "scare/config.hpp"
#include "scare/dcim.hpp"
#include "scare/magic.hpp"
#include "scare/profile.hpp"
#include "scare/protect.hpp"
#include "scare/rng.hpp"
#include "scare/sop.hpp"
#include "scare/trace.hpp"

namespace fs = std::filesystem;
using namespace scare;

namespace {

struct CliState {
  config::RunConfig cfg;
  std::string config_path;
  std::string inputs;
  bool all_inputs = false;
  bool dump_chip = false;
  bool extract = false;
  std::vector<std::string> model_paths;
  std::string report_dir;
  std::string protect_kind;
};

// --config is applied at the position it appears on the command line; flags
// after it override the file, flags before it are replaced by it.
void load_config_if_any(CliState& st) {
  if (!st.config_path.empty()) st.cfg = config::load_config_file(st.config_path);
}

std::vector<int> parse_inputs(const std::string& s, int n) {
  if (static_cast<int>(s.size()) != n)
    throw std::invalid_argument("--inputs needs exactly " + std::to_string(n) + " bits");
  std::vector<int> v(n);
  for (int i = 0; i < n; ++i) {
    if (s[i] != '0' && s[i] != '1') throw std::invalid_argument("--inputs must be a bit string");
    v[i] = s[i] - '0';
  }
  return v;
}

profile::CalibrationConfig calibration_config(const config::RunConfig& cfg) {
  profile::CalibrationConfig c;
  c.arch = profile::architecture_from_name(cfg.architecture);
  c.gate = cfg.gate;
  c.fanin_min = cfg.fanin_min;
  c.fanin_max = cfg.fanin_max;
  c.n_mc = cfg.n_mc;
  c.variation = cfg.variation;
  c.seed = split_seed(cfg.seed, 0xca1);
  c.jobs = cfg.jobs;
  c.dcim = cfg.dcim;
  c.magic = cfg.magic;
  c.rram = cfg.rram;
  c.selector = cfg.selector;
  if (c.arch == profile::Architecture::Magic && cfg.gate != "init_write")
    c.feature = profile::FeatureKind::WindowMeanCurrent;
  return c;
}

attack::AttackConfig attack_config(const config::RunConfig& cfg) {
  attack::AttackConfig a;
  a.dcim = cfg.dcim;
  a.magic = cfg.magic;
  a.rram = cfg.rram;
  a.selector = cfg.selector;
  a.rules.v_write = cfg.magic.v_write;
  a.rules.r_lrs = cfg.rram.r_lrs;
  a.rules.r_hrs = cfg.rram.r_hrs;
  a.rho = cfg.rho;
  return a;
}

int cmd_simulate(CliState& st) {
  auto& cfg = st.cfg;
  auto f = sop::parse_function(cfg.function_text, cfg.variable_count);
  fs::path out = cfg.resolved_out_dir();
  fs::create_directories(out);

  std::vector<uint32_t> patterns;
  if (st.all_inputs) {
    for (uint32_t p = 0; p < (1u << f.variable_count()); ++p) patterns.push_back(p);
  } else {
    auto bits = parse_inputs(st.inputs, f.variable_count());
    uint32_t p = 0;
    for (int i = 0; i < f.variable_count(); ++i) p |= bits[i] ? 1u << i : 0;
    patterns.push_back(p);
  }

  device::DeviceInstance inst(cfg.variation, split_seed(cfg.seed, 0x51), cfg.rram);
  if (cfg.architecture == "dcim") {
    auto chip = dcim::program_dcim(f, {}, cfg.dcim, inst, cfg.rram, cfg.selector);
    if (st.dump_chip) {
      std::ofstream os(out / "chip.json");
      os << dcim::chip_to_json(chip) << "\n";
    }
    for (uint32_t p : patterns) {
      auto run = dcim::run_dcim(chip, p);
      std::string name = "trace_dcim_" + std::to_string(p) + ".csv";
      trace::write_trace_file((out / name).string(), run.trace);
      std::cout << "pattern=" << p << " output=" << run.outputs[0] << " trace=" << name << "\n";
    }
  } else if (cfg.architecture == "magic") {
    auto prog = magic::compile_magic(f, cfg.magic, inst, cfg.rram);
    if (st.dump_chip) {
      std::ofstream os(out / "chip.json");
      os << magic::program_to_json(prog) << "\n";
    }
    for (uint32_t p : patterns) {
      auto run = magic::run_program(prog, p);
      std::string name = "trace_magic_" + std::to_string(p) + ".csv";
      trace::write_trace_file((out / name).string(), run.trace);
      std::cout << "pattern=" << p << " output=" << run.output << " trace=" << name << "\n";
    }
  } else {
    throw std::invalid_argument("unknown architecture: " + cfg.architecture);
  }
  std::ofstream cfg_os(out / "effective_config.txt");
  cfg_os << config::dump_config(cfg);
  return 0;
}

int cmd_calibrate(CliState& st) {
  auto& cfg = st.cfg;
  fs::path out = cfg.resolved_out_dir();
  fs::create_directories(out);
  auto model = profile::calibrate(calibration_config(cfg));
  std::string name = "model_" + cfg.architecture + "_" + cfg.gate + ".json";
  profile::save_model((out / name).string(), model);
  std::cout << "model=" << (out / name).string() << " fanins=" << model.fanins.size()
            << " n_mc=" << model.sample_count << "\n";
  return 0;
}

profile::FaninModelSet need_model(const std::vector<profile::FaninModelSet>& models,
                                  profile::Architecture arch, const std::string& gate) {
  for (const auto& m : models)
    if (m.arch == arch && m.gate == gate) return m;
  throw std::runtime_error("attack needs a calibrated '" + gate +
                           "' model; pass it with --model (run `scare calibrate` first)");
}

int cmd_attack(CliState& st) {
  auto& cfg = st.cfg;
  auto f = sop::parse_function(cfg.function_text, cfg.variable_count);
  fs::path out = cfg.resolved_out_dir();
  fs::create_directories(out);

  std::vector<profile::FaninModelSet> models;
  for (const auto& p : st.model_paths) models.push_back(profile::load_model(p));

  device::DeviceInstance inst(cfg.variation, split_seed(cfg.seed, 0x57), cfg.rram);
  attack::AttackConfig acfg = attack_config(cfg);
  attack::AttackReport report;

  if (cfg.architecture == "dcim") {
    auto chip = dcim::program_dcim(f, {}, cfg.dcim, inst, cfg.rram, cfg.selector);
    attack::DcimChipOracle oracle(chip);
    auto or_model = need_model(models, profile::Architecture::Dcim, "or");
    auto and_model = need_model(models, profile::Architecture::Dcim, "and");
    if (cfg.attack_model == 1) {
      report = attack::attack_dcim_m1(oracle, or_model, and_model, acfg);
    } else {
      auto pre_model = need_model(models, profile::Architecture::Dcim, "precharge");
      report = attack::attack_dcim_m2(oracle, or_model, and_model, pre_model, acfg);
    }
    if (st.extract) {
      auto ext = attack::extract_function(oracle, report.structure, f.uses_complements(),
                                          report.complement_flags, acfg);
      report.has_function = true;
      report.recovered_function = ext.function;
      report.patterns_used = oracle.distinct_patterns();
    }
  } else {
    auto prog = magic::compile_magic(f, cfg.magic, inst, cfg.rram);
    attack::MagicChipOracle oracle(prog);
    if (cfg.attack_model == 1) {
      std::vector<const profile::FaninModelSet*> current_models;
      for (const auto& m : models)
        if (m.arch == profile::Architecture::Magic) current_models.push_back(&m);
      report = attack::attack_magic_m1(oracle, current_models, acfg);
    } else {
      report = attack::attack_magic_m2(oracle, acfg);
    }
    if (st.extract) {
      auto ext = attack::extract_function(oracle, report.structure, f.uses_complements(),
                                          report.complement_flags, acfg);
      report.has_function = true;
      report.recovered_function = ext.function;
      report.patterns_used = oracle.distinct_patterns();
    }
  }

  std::ofstream os(out / "attack_report.json");
  os << attack::report_to_json(report) << "\n";
  std::cout << attack::report_to_json(report) << "\n";
  return 0;
}

int cmd_protect(CliState& st) {
  auto& cfg = st.cfg;
  auto f = sop::parse_function(cfg.function_text, cfg.variable_count);
  fs::path out = cfg.resolved_out_dir();
  fs::create_directories(out);
  if (!st.protect_kind.empty())
    cfg.protection.kind = st.protect_kind == "expand"
                              ? protect::ProtectionConfig::Kind::ExpandLiterals
                              : protect::ProtectionConfig::Kind::RedundantInputs;

  protect::EvalConfig ecfg;
  ecfg.variation = cfg.variation;
  ecfg.n_mc = std::min(cfg.n_mc, 500);
  ecfg.seed = split_seed(cfg.seed, 0x9a0);

  profile::CalibrationConfig ccal = calibration_config(cfg);
  ccal.arch = profile::architecture_from_name(cfg.architecture);
  ccal.gate = "and";
  ccal.n_mc = std::max(64, std::min(cfg.n_mc, 300));

  protect::OverheadReport rep;
  if (cfg.architecture == "dcim") {
    auto and_model = profile::calibrate(ccal);
    device::DeviceInstance nominal;
    auto chip = dcim::program_dcim(f, {}, cfg.dcim, nominal, cfg.rram, cfg.selector);
    dcim::DcimChip prot_chip;
    if (cfg.protection.kind == protect::ProtectionConfig::Kind::ExpandLiterals) {
      auto fe = protect::protect_expand(f);
      dcim::ChipDims dims;
      dims.and_wl = std::max(dims.and_wl, 2 * fe.variable_count());
      dims.and_bl = std::max(dims.and_bl, fe.minterm_count());
      dims.or_wl = std::max(dims.or_wl, fe.minterm_count());
      prot_chip = dcim::program_dcim(fe, dims, cfg.dcim, nominal, cfg.rram, cfg.selector);
      std::ofstream fos(out / "protected_function.txt");
      fos << sop::format_function(fe) << "\n";
    } else {
      prot_chip = protect::protect_redundant(chip, cfg.protection);
    }
    rep = protect::evaluate_protection(chip, prot_chip, and_model, cfg.protection, ecfg);
    std::ofstream cos(out / "protected_chip.json");
    cos << dcim::chip_to_json(prot_chip) << "\n";
  } else {
    device::DeviceInstance nominal;
    auto prog = magic::compile_magic(f, cfg.magic, nominal, cfg.rram);
    magic::MagicProgram prot_prog;
    if (cfg.protection.kind == protect::ProtectionConfig::Kind::ExpandLiterals) {
      prot_prog = magic::compile_magic(protect::protect_expand(f), cfg.magic, nominal, cfg.rram);
    } else {
      prot_prog = protect::protect_redundant(prog, cfg.protection);
    }
    rep = protect::evaluate_protection(prog, prot_prog, cfg.protection, ecfg);
    std::ofstream cos(out / "protected_chip.json");
    cos << magic::program_to_json(prot_prog) << "\n";
  }
  std::ofstream os(out / "overhead_report.json");
  os << protect::overhead_to_json(rep) << "\n";
  std::cout << protect::overhead_to_json(rep) << "\n";
  return 0;
}

int cmd_sweep(CliState& st) {
  auto& cfg = st.cfg;
  fs::path out = cfg.resolved_out_dir();
  fs::create_directories(out);
  auto cal = calibration_config(cfg);
  bool is_dcim = cfg.architecture == "dcim";
  if (!is_dcim) {
    cal.feature = profile::FeatureKind::OpTime;
    if (cal.fanin_min < 2) cal.fanin_min = 2;
  }
  auto grid = is_dcim ? profile::dcim_sweep_grid() : profile::magic_sweep_grid();
  auto rows = profile::voltage_sweep(cal, grid);
  std::string name = "sweep_" + cfg.architecture + "_" + cfg.gate + ".csv";
  profile::write_sweep_csv((out / name).string(), rows);
  std::cout << "sweep=" << (out / name).string() << " voltages=" << grid.size()
            << " rows=" << rows.size() << "\n";
  return 0;
}

int cmd_report(CliState& st) {
  auto& cfg = st.cfg;
  fs::path in = st.report_dir.empty() ? fs::path(cfg.resolved_out_dir()) : fs::path(st.report_dir);
  fs::path out = cfg.resolved_out_dir();
  fs::create_directories(out);

  std::ofstream md(out / "report.md");
  md << "# Side-channel model report\n\n";
  std::ofstream fanin_csv(out / "fanin_stats.csv");
  fanin_csv << "architecture,gate,feature,fanin,mean,std\n";
  std::ofstream pdf_csv(out / "fanin_pdf.csv");
  pdf_csv << "architecture,gate,fanin,bin_center,density\n";
  std::ofstream cdf_csv(out / "fanin_cdf.csv");
  cdf_csv << "architecture,gate,fanin,value,prob\n";
  std::ofstream ov_csv(out / "adjacent_overlap.csv");
  ov_csv << "architecture,gate,fanin_low,fanin_high,overlap\n";

  int model_count = 0;
  for (const auto& entry : fs::directory_iterator(in)) {
    auto name = entry.path().filename().string();
    if (name.rfind("model_", 0) != 0 || entry.path().extension() != ".json") continue;
    auto model = profile::load_model(entry.path().string());
    ++model_count;
    const char* arch = profile::architecture_name(model.arch);
    md << "## " << arch << " " << model.gate << " (" << profile::feature_kind_name(model.feature)
       << ", n_mc=" << model.sample_count << ", vdd=" << model.vdd << ")\n\n";
    md << "| fanin | mean | std |\n|---|---|---|\n";
    for (const auto& f : model.fanins) {
      fanin_csv << arch << "," << model.gate << "," << profile::feature_kind_name(model.feature)
                << "," << f.fanin << "," << f.mean << "," << f.stddev << "\n";
      md << "| " << f.fanin << " | " << f.mean << " | " << f.stddev << " |\n";
      for (size_t b = 0; b + 1 < model.bin_edges.size(); ++b)
        pdf_csv << arch << "," << model.gate << "," << f.fanin << ","
                << 0.5 * (model.bin_edges[b] + model.bin_edges[b + 1]) << "," << f.density[b]
                << "\n";
      auto sorted = f.samples;
      std::sort(sorted.begin(), sorted.end());
      for (size_t q = 0; q < sorted.size(); ++q)
        cdf_csv << arch << "," << model.gate << "," << f.fanin << "," << sorted[q] << ","
                << static_cast<double>(q + 1) / sorted.size() << "\n";
    }
    for (size_t i = 0; i + 1 < model.fanins.size(); ++i)
      ov_csv << arch << "," << model.gate << "," << model.fanins[i].fanin << ","
             << model.fanins[i + 1].fanin << ","
             << profile::adjacent_overlap(model, model.fanins[i].fanin) << "\n";
    md << "\n";
  }
  // Copy voltage-sweep CSVs into the overlap-vs-voltage summary if present.
  std::ofstream sweep_md(out / "report.md", std::ios::app);
  for (const auto& entry : fs::directory_iterator(in)) {
    auto name = entry.path().filename().string();
    if (name.rfind("sweep_", 0) == 0) sweep_md << "- sweep data: " << name << "\n";
  }
  std::cout << "report models=" << model_count << " out=" << out.string() << "\n";
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"behavioral RRAM in-memory-computing side-channel workbench"};
  app.require_subcommand(1);
  CliState st;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", st.config_path, "key = value config file")
        ->check(CLI::ExistingFile)
        ->each([&](const std::string&) { load_config_if_any(st); });
    sub->add_option("--arch", st.cfg.architecture, "dcim | magic");
    sub->add_option("--function", st.cfg.function_text, "SOP text, e.g. a+bc or ab'c");
    sub->add_option("--variables", st.cfg.variable_count, "explicit variable count");
    sub->add_option("--seed", st.cfg.seed, "root seed");
    sub->add_option("--n-mc", st.cfg.n_mc, "Monte Carlo points");
    sub->add_option("--jobs", st.cfg.jobs, "parallel workers for Monte Carlo fan-out");
    sub->add_option("--vdd", st.cfg.dcim.vdd, "DCIM supply voltage");
    sub->add_option("--v-write", st.cfg.magic.v_write, "MAGIC write voltage");
    sub->add_option("--rho", st.cfg.rho, "ambiguity likelihood ratio");
    sub->add_flag_callback("--variation", [&] { st.cfg.variation = device::table_variation(); },
                           "enable the Monte Carlo process-variation table");
    sub->add_option("--out", st.cfg.out_dir, "output directory (default $SCARE_OUT_DIR or .)");
  };

  auto* sim = app.add_subcommand("simulate", "program a chip and emit traces");
  add_common(sim);
  sim->add_option("--inputs", st.inputs, "input bit string, e.g. 101");
  sim->add_flag("--all-inputs", st.all_inputs, "run every input pattern");
  sim->add_flag("--dump-chip", st.dump_chip, "write the programmed cell map");

  auto* cal = app.add_subcommand("calibrate", "Monte Carlo side-channel model for a gate family");
  add_common(cal);
  cal->add_option("--gate", st.cfg.gate, "or | and | precharge | nor | init_write");
  cal->add_option("--fanin-min", st.cfg.fanin_min);
  cal->add_option("--fanin-max", st.cfg.fanin_max);

  auto* att = app.add_subcommand("attack", "run an attack model against a simulated chip");
  add_common(att);
  att->add_option("--model", st.model_paths, "calibrated model JSON (repeatable)");
  att->add_option("--attack-model", st.cfg.attack_model, "1 or 2");
  att->add_flag("--extract", st.extract, "follow up with exact-function extraction");

  auto* prot = app.add_subcommand("protect", "apply a countermeasure and report overheads");
  add_common(prot);
  prot->add_option("--kind", st.protect_kind, "redundant | expand");
  prot->add_option("--k", st.cfg.protection.k_redundant, "redundant cells per BL/gate");
  prot->add_flag("--randomize", st.cfg.protection.randomize, "randomize per-BL redundant counts");

  auto* swp = app.add_subcommand("sweep", "voltage sweep of the side-channel models");
  add_common(swp);
  swp->add_option("--gate", st.cfg.gate);
  swp->add_option("--fanin-min", st.cfg.fanin_min);
  swp->add_option("--fanin-max", st.cfg.fanin_max);

  auto* rep = app.add_subcommand("report", "summarize model/sweep artifacts as CSV + Markdown");
  add_common(rep);
  rep->add_option("--from", st.report_dir, "directory holding model_*.json / sweep_*.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(st);
    if (cal->parsed()) return cmd_calibrate(st);
    if (att->parsed()) return cmd_attack(st);
    if (prot->parsed()) return cmd_protect(st);
    if (swp->parsed()) return cmd_sweep(st);
    if (rep->parsed()) return cmd_report(st);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
