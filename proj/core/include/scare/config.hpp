#pragma once

#include <string>

#include "scare/device.hpp"
#include "scare/dcim.hpp"
#include "scare/magic.hpp"
#include "scare/protect.hpp"

namespace scare::config {

/// One experiment description: line-oriented `key = value` text with
/// [sections]; every CLI flag overrides the file.
struct RunConfig {
  // [run]
  std::string architecture = "dcim";
  std::string function_text;
  int variable_count = -1; ///< -1: inferred from the function text
  uint64_t seed = 1;
  int n_mc = 1000;
  int jobs = 1;
  int attack_model = 1;
  std::string gate = "or";
  int fanin_min = 0;
  int fanin_max = 8;
  double rho = 0.2;
  std::string out_dir;

  // [variation]
  device::VariationSpec variation{};

  // [device] / [dcim] / [magic] / [protect]
  device::RramParams rram{};
  device::SelectorParams selector{};
  dcim::DcimParams dcim{};
  magic::MagicParams magic{};
  protect::ProtectionConfig protection{};

  std::string resolved_out_dir() const; ///< out_dir, else $SCARE_OUT_DIR, else "."
};

RunConfig load_config_file(const std::string& path);
void apply_config_text(RunConfig& cfg, const std::string& text);
void apply_key(RunConfig& cfg, const std::string& section, const std::string& key,
               const std::string& value);
std::string dump_config(const RunConfig& cfg);

} // namespace scare::config
