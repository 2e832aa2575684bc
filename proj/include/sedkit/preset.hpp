#pragma once

// Scenario presets: everything that differs between the two evaluation
// scenarios in one record (pooling plan, augmentation mask maxima, median
// window, gap tolerance, PSDS parameters and the decision threshold set),
// with JSON files as the on-disk form. Two presets ship built in:
// "scenario1" and "scenario2".

#include <filesystem>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sedkit/errors.hpp"
#include "sedkit/psds.hpp"

namespace sedkit {

struct ScenarioPreset {
  int scenario_id = 0;
  std::vector<std::pair<int, int>> pool_specs;  // (time, freq) kernel == stride per block
  int time_mask_max = 0;                        // frames
  int freq_mask_max = 0;                        // bins
  int median_window = 7;                        // frames
  double gap_tolerance = 0.2;                   // seconds
  PsdsParams psds;
  std::vector<double> thresholds;

  int time_factor() const {
    int factor = 1;
    for (const auto& [kt, kf] : pool_specs) factor *= kt;
    return factor;
  }

  int freq_factor() const {
    int factor = 1;
    for (const auto& [kt, kf] : pool_specs) factor *= kf;
    return factor;
  }

  void validate() const {
    if (pool_specs.size() != 7) throw ConfigError("preset: expected 7 pooling blocks");
    for (const auto& [kt, kf] : pool_specs)
      if (kt < 1 || kf < 1) throw ConfigError("preset: pooling kernels must be >= 1");
    if (freq_factor() != 128) throw ConfigError("preset: frequency pooling must reduce 128 bins to 1");
    if (median_window < 1 || median_window % 2 == 0) throw ConfigError("preset: median window must be odd");
    if (time_mask_max < 0 || freq_mask_max < 0) throw ConfigError("preset: mask maxima must be >= 0");
    if (!(gap_tolerance >= 0.0)) throw ConfigError("preset: gap tolerance must be >= 0");
    if (thresholds.empty()) throw ConfigError("preset: threshold list is empty");
    double prev = 0.0;
    for (double t : thresholds) {
      if (!(t > 0.0 && t < 1.0)) throw ConfigError("preset: thresholds must lie in (0,1)");
      if (!(t > prev)) throw ConfigError("preset: thresholds must be strictly increasing");
      prev = t;
    }
    psds.validate();
  }
};

inline std::vector<double> default_thresholds() {
  std::vector<double> out;
  for (int k = 0; k < 50; ++k) out.push_back(0.01 + 0.02 * k);
  return out;
}

inline ScenarioPreset scenario1_preset() {
  ScenarioPreset p;
  p.scenario_id = 1;
  p.pool_specs = {{2, 2}, {2, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}, {1, 2}};
  p.time_mask_max = 25;
  p.freq_mask_max = 32;
  p.psds.dtc = 0.7;
  p.psds.gtc = 0.7;
  p.psds.cttc.reset();
  p.psds.alpha_st = 1.0;
  p.psds.alpha_ct = 0.0;
  p.psds.e_max = 100.0;
  p.thresholds = default_thresholds();
  return p;
}

inline ScenarioPreset scenario2_preset() {
  ScenarioPreset p;
  p.scenario_id = 2;
  p.pool_specs = {{2, 2}, {2, 2}, {2, 2}, {2, 2}, {2, 2}, {1, 2}, {1, 2}};
  p.time_mask_max = 100;
  p.freq_mask_max = 16;
  p.psds.dtc = 0.1;
  p.psds.gtc = 0.1;
  p.psds.cttc = 0.3;
  p.psds.alpha_st = 1.0;
  p.psds.alpha_ct = 0.5;
  p.psds.e_max = 100.0;
  p.thresholds = default_thresholds();
  return p;
}

inline nlohmann::json preset_to_json(const ScenarioPreset& p) {
  nlohmann::json j;
  j["scenario_id"] = p.scenario_id;
  j["pool_specs"] = nlohmann::json::array();
  for (const auto& [kt, kf] : p.pool_specs) j["pool_specs"].push_back({kt, kf});
  j["time_mask_max"] = p.time_mask_max;
  j["freq_mask_max"] = p.freq_mask_max;
  j["median_window"] = p.median_window;
  j["gap_tolerance"] = p.gap_tolerance;
  j["psds"]["dtc"] = p.psds.dtc;
  j["psds"]["gtc"] = p.psds.gtc;
  if (p.psds.cttc)
    j["psds"]["cttc"] = *p.psds.cttc;
  else
    j["psds"]["cttc"] = nullptr;
  j["psds"]["alpha_st"] = p.psds.alpha_st;
  j["psds"]["alpha_ct"] = p.psds.alpha_ct;
  j["psds"]["e_max"] = p.psds.e_max;
  j["thresholds"] = p.thresholds;
  return j;
}

inline ScenarioPreset preset_from_json(const nlohmann::json& j) {
  ScenarioPreset p;
  try {
    p.scenario_id = j.at("scenario_id").get<int>();
    for (const auto& pair : j.at("pool_specs"))
      p.pool_specs.emplace_back(pair.at(0).get<int>(), pair.at(1).get<int>());
    p.time_mask_max = j.at("time_mask_max").get<int>();
    p.freq_mask_max = j.at("freq_mask_max").get<int>();
    p.median_window = j.at("median_window").get<int>();
    p.gap_tolerance = j.at("gap_tolerance").get<double>();
    const auto& ps = j.at("psds");
    p.psds.dtc = ps.at("dtc").get<double>();
    p.psds.gtc = ps.at("gtc").get<double>();
    if (!ps.at("cttc").is_null()) p.psds.cttc = ps.at("cttc").get<double>();
    p.psds.alpha_st = ps.at("alpha_st").get<double>();
    p.psds.alpha_ct = ps.at("alpha_ct").get<double>();
    p.psds.e_max = ps.at("e_max").get<double>();
    p.thresholds = j.at("thresholds").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("preset: ") + e.what());
  }
  p.validate();
  return p;
}

inline void save_preset(const std::string& path, const ScenarioPreset& p) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path);
  os << preset_to_json(p).dump(2) << "\n";
}

inline ScenarioPreset load_preset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open " + path);
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  return preset_from_json(j);
}

// Accepts the built-in names "scenario1"/"scenario2" or a path to a preset
// file; anything else is a ConfigError.
inline ScenarioPreset resolve_preset(const std::string& name_or_path) {
  if (name_or_path == "scenario1") return scenario1_preset();
  if (name_or_path == "scenario2") return scenario2_preset();
  if (std::filesystem::exists(name_or_path)) return load_preset(name_or_path);
  throw ConfigError("unknown preset '" + name_or_path + "' (use scenario1, scenario2 or a preset file)");
}

}  // namespace sedkit
