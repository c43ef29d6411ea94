#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfop/losses.hpp"
#include "rfop/train.hpp"

namespace rfop {

struct RunPaths {
  std::filesystem::path train_manifest;
  std::filesystem::path train_blob;
  std::filesystem::path validation_manifest;
  std::filesystem::path validation_blob;
  /// Training-log CSV; defaults to "<checkpoint>.log.csv" when empty.
  std::filesystem::path log;
};

/// Everything `rfop train` needs, loaded from one JSON document.
struct RunConfig {
  ModelConfig model;
  LossWeights loss_weights;
  TrainPlan plan;
  RunPaths paths;
  std::string train_lang = "L1";
  std::vector<std::string> test_langs;

  /// Checks values and that all referenced paths are distinct. Relative
  /// paths are resolved against `base` by load_run_config().
  void validate() const;
};

/// Parses a run config. Missing keys keep defaults; unknown keys are
/// rejected. Throws ConfigError.
RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& cfg);

}  // namespace rfop
