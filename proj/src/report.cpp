#include "hybrid/report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

#include "hybrid/errors.hpp"

namespace hybrid {

using nlohmann::json;

namespace {

std::string exact(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

json stat_json(const Stat& s) { return {{"mean", s.mean}, {"std", s.std}}; }

std::string pct(const Stat& s) { return fixed(100.0 * s.mean, 2) + " ± " + fixed(100.0 * s.std, 2); }

}  // namespace

std::string metrics_header(std::size_t generations) {
  std::string header = "epoch,train_loss,val_acc,test_acc,wall_s";
  for (std::size_t g = 1; g <= generations; ++g) {
    header += ",evo_gen_best_" + std::to_string(g);
  }
  return header;
}

std::string metrics_row(const EpochRecord& rec, std::size_t generations) {
  std::string row = std::to_string(rec.epoch) + "," + exact(rec.train_loss) + "," +
                    exact(rec.val_acc) + "," + (rec.test_acc ? exact(*rec.test_acc) : "") + "," +
                    fixed(rec.wall_s, 6);
  for (std::size_t g = 1; g <= generations; ++g) {
    row += ",";
    if (rec.evolution_trace && g < rec.evolution_trace->size()) {
      row += exact((*rec.evolution_trace)[g]);
    }
  }
  return row;
}

MetricsWriter::MetricsWriter(const std::filesystem::path& path, std::size_t generations)
    : out_(path, std::ios::trunc), generations_(generations) {
  if (!out_) {
    throw InputError("cannot write metrics file " + path.string());
  }
  out_ << metrics_header(generations_) << '\n' << std::flush;
}

void MetricsWriter::append(const EpochRecord& rec) {
  out_ << metrics_row(rec, generations_) << '\n' << std::flush;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

json manifest_json(const std::string& command, const ExperimentConfig& cfg,
                   const std::string& started, const std::string& finished) {
  return {{"command", command},
          {"config", to_json(cfg)},
          {"seed", cfg.train.seed},
          {"version", kArtifactVersion},
          {"started", started},
          {"finished", finished.empty() ? json(nullptr) : json(finished)}};
}

json report_json(const ComparisonReport& report, const ExperimentConfig& cfg) {
  json runs = json::array();
  for (const auto& r : report.runs) {
    json run = {{"seed", r.seed}, {"method", method_name(r.method)}, {"ok", r.ok}};
    if (r.ok) {
      run["val_acc"] = r.val_acc;
      run["test_acc"] = r.test_acc;
      run["wall_s"] = r.wall_s;
    } else {
      run["error"] = r.error;
    }
    runs.push_back(run);
  }

  json final_rows = json::array();
  for (const auto& [name, s] : {std::pair{"hybrid", report.hybrid}, std::pair{"regular", report.regular}}) {
    final_rows.push_back({{"method", name},
                          {"runs", s.runs},
                          {"val_acc", stat_json(s.val_acc)},
                          {"test_acc", stat_json(s.test_acc)},
                          {"wall_s", stat_json(s.wall_s)}});
  }

  json generation_rows = json::array();
  for (const auto& row : report.evolution_rows()) {
    json gens = json::array();
    for (const auto& s : row.hybrid_generations) {
      gens.push_back(stat_json(s));
    }
    generation_rows.push_back({{"epoch", row.epoch},
                               {"hybrid_generations", gens},
                               {"regular_val_acc", stat_json(row.regular_val)}});
  }

  json curves = json::array();
  for (const auto& row : report.epochs) {
    curves.push_back({{"epoch", row.epoch},
                      {"regular_val_acc", stat_json(row.regular_val)},
                      {"hybrid_val_acc", stat_json(row.hybrid_val)}});
  }

  return {{"complete", report.complete},
          {"version", kArtifactVersion},
          {"config", to_json(cfg)},
          {"runs", runs},
          {"final_accuracy", final_rows},
          {"generation_accuracy", generation_rows},
          {"epoch_curves", curves}};
}

std::string report_markdown(const ComparisonReport& report, const TrainConfig& cfg) {
  std::ostringstream out;
  const std::size_t g = cfg.evolution.generations;
  out << "Mean validation accuracy (%) per generation at each evolution epoch\n\n";
  out << "| Epoch |";
  for (std::size_t i = 1; i <= g; ++i) {
    out << " Hybrid gen " << i << " |";
  }
  out << " Regular |\n|---|";
  for (std::size_t i = 0; i <= g; ++i) {
    out << "---|";
  }
  out << '\n';
  for (const auto& row : report.evolution_rows()) {
    out << "| " << row.epoch << " |";
    for (std::size_t i = 0; i < g; ++i) {
      out << ' ' << (i < row.hybrid_generations.size() ? pct(row.hybrid_generations[i]) : "") << " |";
    }
    out << ' ' << pct(row.regular_val) << " |\n";
  }

  out << "\nMean final accuracy (%) and time cost\n\n";
  out << "| Method | Validation accuracy | Test accuracy | Time cost (s) |\n|---|---|---|---|\n";
  for (const auto& [name, s] :
       {std::pair{"Hybrid", report.hybrid}, std::pair{"Regular", report.regular}}) {
    out << "| " << name << " | " << pct(s.val_acc) << " | " << pct(s.test_acc) << " | "
        << fixed(s.wall_s.mean, 2) << " |\n";
  }
  if (!report.complete) {
    out << "\nINCOMPLETE: at least one run failed.\n";
  }
  return out.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) {
    throw InputError("cannot write " + path.string());
  }
  out << text;
}

}  // namespace hybrid
