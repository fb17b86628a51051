#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "hybrid/data_io.hpp"
#include "hybrid/trainer.hpp"

namespace hybrid {

struct DataConfig {
  // "cifar10:<dir>" or "synthetic:<key=value,...>" (keys: classes, per_class,
  // channels, size, height, width, noise, seed).
  std::string source = "synthetic:";
  std::size_t subset = 0;  // stratified sample of this many images; 0 keeps all
  SplitSpec split;
};

/// Fully resolved settings of one CLI invocation.
struct ExperimentConfig {
  Method method = Method::kHybrid;
  TrainConfig train;
  DataConfig data;
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::size_t jobs = 1;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
/// Overlays the keys present in `j` onto `cfg`. Unknown keys are rejected.
void apply_json(ExperimentConfig& cfg, const nlohmann::json& j);
ExperimentConfig load_config_file(const std::filesystem::path& path, ExperimentConfig base = {});

SyntheticSpec parse_synthetic_spec(const std::string& text);
// Syntax only; does not touch the filesystem.
void check_data_source(const std::string& source);
/// Loads the configured source, applies the optional subset and splits it.
Splits load_splits(const DataConfig& cfg);

}  // namespace hybrid
