#pragma once

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "hybrid/config.hpp"
#include "hybrid/trainer.hpp"

namespace hybrid {

/// `epoch,train_loss,val_acc,test_acc,wall_s,evo_gen_best_1..evo_gen_best_g`
std::string metrics_header(std::size_t generations);
/// One CSV row; generation cells stay empty on non-evolution epochs.
std::string metrics_row(const EpochRecord& rec, std::size_t generations);

/// Append-only per-run metrics file. Every row is flushed as it is written,
/// so an interrupted run leaves a parsable prefix.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& path, std::size_t generations);
  void append(const EpochRecord& rec);

 private:
  std::ofstream out_;
  std::size_t generations_;
};

std::string utc_timestamp();

nlohmann::json manifest_json(const std::string& command, const ExperimentConfig& cfg,
                             const std::string& started, const std::string& finished);

nlohmann::json report_json(const ComparisonReport& report, const ExperimentConfig& cfg);
/// Human-readable rendering of the per-generation and final-accuracy tables.
std::string report_markdown(const ComparisonReport& report, const TrainConfig& cfg);

void write_text(const std::filesystem::path& path, const std::string& text);

inline constexpr const char* kArtifactVersion = "1.0.0";

}  // namespace hybrid
