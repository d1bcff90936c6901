#pragma once

// Flat JSON configuration files. Keys are the field names in SI units;
// pressure keys may instead carry a `_bar` suffix and are converted to Pa.

#include <filesystem>
#include <string>

#include <json.hpp>

#include "ofotune/controller.hpp"
#include "ofotune/metrics.hpp"
#include "ofotune/plant.hpp"
#include "ofotune/simloop.hpp"

namespace ofotune {

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

/// Starts from `base` and overrides every key present. Unknown keys and
/// invalid results throw ConfigError.
CompressorParams params_from_json(const nlohmann::json& j,
                                  const CompressorParams& base);
nlohmann::json params_to_json(const CompressorParams& params);

CalibrationTargets targets_from_json(const nlohmann::json& j);

/// Controller, simulation and metric settings that may share one file.
struct RunSettings {
  OfoConfig ofo;
  SimSpec sim;
  MetricConfig metrics;
};

/// Applies the keys of a flat config object on top of `settings`.
void apply_config(const nlohmann::json& j, RunSettings& settings);
nlohmann::json config_to_json(const RunSettings& settings);

/// Reads a CSV with header `t,ysp` (Pa) or `t,ysp_bar`.
Setpoint load_setpoint_csv(const std::filesystem::path& path);

}  // namespace ofotune
