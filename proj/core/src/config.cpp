#include "scare/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scare::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& v) {
  size_t pos = 0;
  double d = std::stod(v, &pos);
  if (trim(v.substr(pos)) != "") throw std::invalid_argument("bad numeric value: " + v);
  return d;
}

int to_int(const std::string& v) { return static_cast<int>(to_double(v)); }

bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("bad boolean value: " + v);
}

} // namespace

std::string RunConfig::resolved_out_dir() const {
  if (!out_dir.empty()) return out_dir;
  if (const char* env = std::getenv("SCARE_OUT_DIR"); env && *env) return env;
  return ".";
}

void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value) {
  auto unknown = [&]() -> void {
    throw std::invalid_argument("unknown config key [" + section + "] " + key);
  };
  if (section == "run" || section.empty()) {
    if (key == "architecture") cfg.architecture = value;
    else if (key == "function") cfg.function_text = value;
    else if (key == "variables") cfg.variable_count = to_int(value);
    else if (key == "seed") cfg.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "n_mc") cfg.n_mc = to_int(value);
    else if (key == "jobs") cfg.jobs = to_int(value);
    else if (key == "attack_model") cfg.attack_model = to_int(value);
    else if (key == "gate") cfg.gate = value;
    else if (key == "fanin_min") cfg.fanin_min = to_int(value);
    else if (key == "fanin_max") cfg.fanin_max = to_int(value);
    else if (key == "rho") cfg.rho = to_double(value);
    else if (key == "out_dir") cfg.out_dir = value;
    else unknown();
    return;
  }
  if (section == "variation") {
    if (key == "preset" && value == "table") cfg.variation = device::table_variation();
    else if (key == "preset" && value == "none") cfg.variation = {};
    else if (key == "lrs_gap") cfg.variation.lrs_gap = to_double(value);
    else if (key == "hrs_gap") cfg.variation.hrs_gap = to_double(value);
    else if (key == "mos_oxide_thickness") cfg.variation.mos_oxide_thickness = to_double(value);
    else if (key == "mos_gate_length") cfg.variation.mos_gate_length = to_double(value);
    else unknown();
    return;
  }
  if (section == "device") {
    auto& r = cfg.rram;
    if (key == "gap_min_nm") r.gap_min_nm = to_double(value);
    else if (key == "gap_max_nm") r.gap_max_nm = to_double(value);
    else if (key == "r_lrs") r.r_lrs = to_double(value);
    else if (key == "r_hrs") r.r_hrs = to_double(value);
    else if (key == "write_latency_ns") r.write_latency = to_double(value) * 1e-9;
    else if (key == "v_write_nominal") r.v_write_nominal = to_double(value);
    else if (key == "v_set_threshold") r.v_set_threshold = to_double(value);
    else if (key == "v_reset_threshold") r.v_reset_threshold = to_double(value);
    else if (key == "v_accel") r.v_accel = to_double(value);
    else if (key == "selector_v_threshold") cfg.selector.v_threshold = to_double(value);
    else if (key == "selector_r_on") cfg.selector.r_on = to_double(value);
    else unknown();
    return;
  }
  if (section == "dcim") {
    auto& d = cfg.dcim;
    if (key == "vdd") d.vdd = to_double(value);
    else if (key == "c_bl_ff") d.c_bl = to_double(value) * 1e-15;
    else if (key == "v_ref_and_frac") d.v_ref_and_frac = to_double(value);
    else if (key == "v_ref_or_frac") d.v_ref_or_frac = to_double(value);
    else if (key == "r_wl_driver") d.r_wl_driver = to_double(value);
    else if (key == "r_precharge") d.r_precharge = to_double(value);
    else if (key == "dt_ps") d.dt = to_double(value) * 1e-12;
    else if (key == "t_precharge_ns") d.t_precharge = to_double(value) * 1e-9;
    else if (key == "t_compute_ns") d.t_compute = to_double(value) * 1e-9;
    else if (key == "en_buffer_unit_ua") d.en_buffer_unit = to_double(value) * 1e-6;
    else if (key == "functional_check") d.functional_check = to_bool(value);
    else unknown();
    return;
  }
  if (section == "magic") {
    auto& m = cfg.magic;
    if (key == "v_write") m.v_write = to_double(value);
    else if (key == "t_slot_ns") m.t_slot = to_double(value) * 1e-9;
    else if (key == "t_init_slot_ns") m.t_init_slot = to_double(value) * 1e-9;
    else if (key == "t_arm_ns") m.t_arm = to_double(value) * 1e-9;
    else if (key == "dt_ps") m.dt = to_double(value) * 1e-12;
    else if (key == "r_and_series") m.r_and_series = to_double(value);
    else if (key == "r_nor_parallel") m.r_nor_parallel = to_double(value);
    else if (key == "functional_check") m.functional_check = to_bool(value);
    else unknown();
    return;
  }
  if (section == "protect") {
    auto& p = cfg.protection;
    if (key == "kind") {
      if (value == "redundant-inputs") p.kind = protect::ProtectionConfig::Kind::RedundantInputs;
      else if (value == "expand-literals") p.kind = protect::ProtectionConfig::Kind::ExpandLiterals;
      else throw std::invalid_argument("unknown protection kind: " + value);
    } else if (key == "k_redundant") p.k_redundant = to_int(value);
    else if (key == "randomize") p.randomize = to_bool(value);
    else if (key == "seed") p.seed = static_cast<uint64_t>(std::stoull(value));
    else if (key == "bias_and_frac") p.bias_and_frac = to_double(value);
    else if (key == "bias_or_frac") p.bias_or_frac = to_double(value);
    else unknown();
    return;
  }
  unknown();
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::istringstream is(text);
  std::string line, section = "run";
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[' && t.back() == ']') {
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key = value");
    try {
      apply_key(cfg, section, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    } catch (const std::exception& e) {
      throw std::invalid_argument("config line " + std::to_string(lineno) + ": " + e.what());
    }
  }
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config file: " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str());
  return cfg;
}

std::string dump_config(const RunConfig& cfg) {
  std::ostringstream os;
  os.precision(12);
  os << "[run]\n";
  os << "architecture = " << cfg.architecture << "\n";
  if (!cfg.function_text.empty()) os << "function = " << cfg.function_text << "\n";
  if (cfg.variable_count >= 0) os << "variables = " << cfg.variable_count << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "n_mc = " << cfg.n_mc << "\n";
  os << "jobs = " << cfg.jobs << "\n";
  os << "attack_model = " << cfg.attack_model << "\n";
  os << "gate = " << cfg.gate << "\n";
  os << "fanin_min = " << cfg.fanin_min << "\n";
  os << "fanin_max = " << cfg.fanin_max << "\n";
  os << "rho = " << cfg.rho << "\n";
  os << "[variation]\n";
  os << "lrs_gap = " << cfg.variation.lrs_gap << "\n";
  os << "hrs_gap = " << cfg.variation.hrs_gap << "\n";
  os << "mos_oxide_thickness = " << cfg.variation.mos_oxide_thickness << "\n";
  os << "mos_gate_length = " << cfg.variation.mos_gate_length << "\n";
  os << "[device]\n";
  os << "r_lrs = " << cfg.rram.r_lrs << "\n";
  os << "r_hrs = " << cfg.rram.r_hrs << "\n";
  os << "gap_min_nm = " << cfg.rram.gap_min_nm << "\n";
  os << "gap_max_nm = " << cfg.rram.gap_max_nm << "\n";
  os << "write_latency_ns = " << cfg.rram.write_latency * 1e9 << "\n";
  os << "selector_v_threshold = " << cfg.selector.v_threshold << "\n";
  os << "[dcim]\n";
  os << "vdd = " << cfg.dcim.vdd << "\n";
  os << "c_bl_ff = " << cfg.dcim.c_bl * 1e15 << "\n";
  os << "[magic]\n";
  os << "v_write = " << cfg.magic.v_write << "\n";
  return os.str();
}

} // namespace scare::config
