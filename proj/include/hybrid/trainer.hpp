#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hybrid/data_io.hpp"
#include "hybrid/evolution.hpp"
#include "hybrid/nn.hpp"

namespace hybrid {

enum class Method { kRegular, kHybrid };

std::string method_name(Method method);
Method parse_method(const std::string& name);

struct TrainConfig {
  std::size_t warmup_epochs = 50;     // n: backprop-only epochs before the first event
  std::size_t evolution_period = 10;  // y: epochs between evolution events
  std::size_t max_epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 64;
  std::uint64_t seed = 0;
  EvolutionConfig evolution;

  void validate(Method method) const;
  /// True for epochs n, n+y, n+2y, ... up to max_epochs.
  bool is_evolution_epoch(std::size_t epoch) const;
  std::vector<std::size_t> evolution_epochs() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_acc = 0.0;                       // after any evolution event
  std::optional<double> val_acc_before_event;  // set on evolution epochs
  std::optional<double> test_acc;              // final epoch only
  double wall_s = 0.0;                         // seconds since the run started
  std::optional<std::vector<double>> evolution_trace;  // best fitness, generations 0..g

  /// Equality of everything except wall-clock time.
  bool same_metrics(const EpochRecord& other) const;
};

struct TrainHooks {
  /// Called after each epoch, once the record and model state are final.
  std::function<void(const EpochRecord&, const Model&)> on_epoch;
  /// Epochs already completed by the model passed in (resume point).
  std::size_t start_epoch = 0;
};

struct RunResult {
  Model model;
  std::vector<EpochRecord> records;
  double final_val_acc = 0.0;
  double test_acc = 0.0;
  double wall_s = 0.0;
};

/// Raised when the training loss stops being finite.
class DivergenceError : public NumericError {
 public:
  DivergenceError(std::size_t epoch, const std::string& what);
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

/// SmallConvNet for the split's image shape, initialized from the model-init
/// sub-stream of `seed`.
Model initial_model(const Dataset& shape_source, std::uint64_t seed);

RunResult train(Model model, const Splits& data, const TrainConfig& cfg, Method method,
                const TrainHooks& hooks = {});
RunResult train_regular(Model model, const Splits& data, const TrainConfig& cfg,
                        const TrainHooks& hooks = {});
RunResult train_hybrid(Model model, const Splits& data, const TrainConfig& cfg,
                       const TrainHooks& hooks = {});

/// Fitness over cached penultimate features: the accuracy obtained by
/// installing `genome` as the tail. Identical to evaluate() on the same split.
class TailFitness {
 public:
  TailFitness(const Model& model, const Dataset& split, std::size_t batch_size = 256);
  double operator()(std::span<const double> genome) const;

 private:
  Tensor features_;
  std::vector<int> labels_;
  std::size_t classes_;
};

// ---- Matched-seed comparison -----------------------------------------------

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};
Stat summarize(const std::vector<double>& values);

struct MethodSummary {
  Stat val_acc;
  Stat test_acc;
  Stat wall_s;
  std::size_t runs = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  Method method = Method::kRegular;
  bool ok = false;
  std::string error;
  std::vector<EpochRecord> records;
  double val_acc = 0.0;
  double test_acc = 0.0;
  double wall_s = 0.0;
};

struct EpochSummary {
  std::size_t epoch = 0;
  Stat regular_val;
  Stat hybrid_val;
  std::vector<Stat> hybrid_generations;  // generations 1..g; evolution epochs only
};

struct ComparisonReport {
  std::vector<SeedRun> runs;
  MethodSummary regular;
  MethodSummary hybrid;
  std::vector<EpochSummary> epochs;  // every epoch
  bool complete = true;

  /// Evolution-epoch rows, the per-generation table.
  std::vector<EpochSummary> evolution_rows() const;
};

/// Produces the per-epoch hook for one (seed, method) arm, e.g. a metrics writer.
using HookFactory = std::function<TrainHooks(std::uint64_t seed, Method method)>;

ComparisonReport run_comparison(const Splits& data, const TrainConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, std::size_t jobs = 1,
                                const HookFactory& hooks = {});

/// Aggregates finished runs into the report tables.
ComparisonReport build_report(std::vector<SeedRun> runs, const TrainConfig& cfg);

}  // namespace hybrid
