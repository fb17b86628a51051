// hybridtrain: command-line driver for regular and hybrid (backprop +
// tail-weight evolution) training runs.
//
//   hybridtrain train    --method hybrid --config configs/default.cfg --seed 1 --out runs/a
//   hybridtrain compare  --seeds 1,2,3 --out runs/cmp
//   hybridtrain evolve   --checkpoint runs/a/final.ckpt --out runs/evo
//   hybridtrain eval     --checkpoint runs/a/final.ckpt --split test
//
// Exit codes: 0 success, 1 config error, 2 data error, 3 numeric divergence,
// 4 incomplete comparison.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "hybrid/config.hpp"
#include "hybrid/data_io.hpp"
#include "hybrid/errors.hpp"
#include "hybrid/evolution.hpp"
#include "hybrid/report.hpp"
#include "hybrid/trainer.hpp"

namespace fs = std::filesystem;
using namespace hybrid;

namespace {

enum ExitCode { kOk = 0, kConfigError = 1, kDataError = 2, kDiverged = 3, kIncomplete = 4 };

struct Overrides {
  std::string config;
  std::string manifest;
  std::string method;
  std::optional<std::uint64_t> seed;
  std::string seeds;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> n;
  std::optional<std::size_t> y;
  std::optional<std::size_t> pop;
  std::optional<std::size_t> gens;
  std::optional<double> lr;
  std::optional<std::size_t> batch;
  std::optional<std::size_t> threads;
  std::optional<std::size_t> subset;
  std::string data;
  std::optional<std::size_t> jobs;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON config file");
  cmd->add_option("--seed", o.seed, "Master seed");
  cmd->add_option("--epochs", o.epochs, "Maximum epochs");
  cmd->add_option("--n", o.n, "Backprop-only warm-up epochs");
  cmd->add_option("--y", o.y, "Epochs between evolution events");
  cmd->add_option("--pop", o.pop, "Individuals per generation");
  cmd->add_option("--gens", o.gens, "Generations per evolution event");
  cmd->add_option("--lr", o.lr, "SGD learning rate");
  cmd->add_option("--batch", o.batch, "Mini-batch size");
  cmd->add_option("--threads", o.threads, "Concurrent fitness evaluations");
  cmd->add_option("--subset", o.subset, "Stratified subset size (0 keeps all)");
  cmd->add_option("--data", o.data, "cifar10:<dir> or synthetic:<key=value,...>");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::istringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      seeds.push_back(std::stoull(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw ConfigError("bad seed '" + item + "'");
    }
  }
  if (seeds.empty()) {
    throw ConfigError("--seeds needs at least one seed");
  }
  return seeds;
}

// Built-in defaults, then the config file (or manifest), then flags.
ExperimentConfig resolve(const Overrides& o) {
  ExperimentConfig cfg;
  if (!o.config.empty()) {
    cfg = load_config_file(o.config, cfg);
  }
  if (!o.manifest.empty()) {
    std::ifstream in(o.manifest);
    if (!in) {
      throw ConfigError("cannot open manifest " + o.manifest);
    }
    nlohmann::json m;
    try {
      m = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(o.manifest + ": " + e.what());
    }
    if (!m.contains("config")) {
      throw ConfigError(o.manifest + ": no config section");
    }
    apply_json(cfg, m.at("config"));
  }
  if (!o.method.empty()) cfg.method = parse_method(o.method);
  if (o.seed) cfg.train.seed = *o.seed;
  if (!o.seeds.empty()) cfg.seeds = parse_seeds(o.seeds);
  if (o.epochs) cfg.train.max_epochs = *o.epochs;
  if (o.n) cfg.train.warmup_epochs = *o.n;
  if (o.y) cfg.train.evolution_period = *o.y;
  if (o.pop) cfg.train.evolution.population = *o.pop;
  if (o.gens) cfg.train.evolution.generations = *o.gens;
  if (o.lr) cfg.train.learning_rate = *o.lr;
  if (o.batch) cfg.train.batch_size = *o.batch;
  if (o.threads) cfg.train.evolution.threads = *o.threads;
  if (o.subset) cfg.data.subset = *o.subset;
  if (!o.data.empty()) cfg.data.source = o.data;
  if (o.jobs) cfg.jobs = *o.jobs;
  cfg.data.split.validate();
  check_data_source(cfg.data.source);
  return cfg;
}

void write_json(const fs::path& path, const nlohmann::json& j) { write_text(path, j.dump(2) + "\n"); }

const Dataset& pick_split(const Splits& splits, const std::string& name) {
  if (name == "train") return splits.train;
  if (name == "validation") return splits.validation;
  if (name == "test") return splits.test;
  throw ConfigError("unknown split '" + name + "' (train, validation or test)");
}

int cmd_train(const Overrides& o, const std::string& out_dir, const std::string& resume,
              std::size_t save_every) {
  ExperimentConfig cfg = resolve(o);
  cfg.train.validate(cfg.method);
  fs::create_directories(out_dir);
  const std::string started = utc_timestamp();
  const std::string command = "train";
  write_json(fs::path(out_dir) / "manifest.json", manifest_json(command, cfg, started, ""));

  const Splits splits = load_splits(cfg.data);
  Model model = initial_model(splits.train, cfg.train.seed);
  TrainHooks hooks;
  if (!resume.empty()) {
    const Checkpoint ckpt = load_checkpoint(resume);
    if (ckpt.cursor.seed != cfg.train.seed) {
      throw ConfigError("checkpoint seed " + std::to_string(ckpt.cursor.seed) +
                        " differs from configured seed " + std::to_string(cfg.train.seed));
    }
    model = restore_model(ckpt);
    hooks.start_epoch = ckpt.cursor.epoch;
  }

  const auto phase = cfg.method == Method::kHybrid ? TrainingPhase::kHybrid : TrainingPhase::kRegular;
  auto writer = std::make_shared<MetricsWriter>(fs::path(out_dir) / "metrics.csv",
                                                cfg.train.evolution.generations);
  hooks.on_epoch = [&, writer](const EpochRecord& rec, const Model& net) {
    writer->append(rec);
    if (save_every > 0 && rec.epoch % save_every == 0) {
      save_checkpoint(fs::path(out_dir) / ("epoch_" + std::to_string(rec.epoch) + ".ckpt"),
                      make_checkpoint(net, {rec.epoch, cfg.train.seed, phase}));
    }
  };

  const RunResult result = train(std::move(model), splits, cfg.train, cfg.method, hooks);
  save_checkpoint(fs::path(out_dir) / "final.ckpt",
                  make_checkpoint(result.model, {cfg.train.max_epochs, cfg.train.seed, phase}));
  write_json(fs::path(out_dir) / "manifest.json",
             manifest_json(command, cfg, started, utc_timestamp()));
  std::cout << method_name(cfg.method) << ": val_acc " << result.final_val_acc << " test_acc "
            << result.test_acc << " wall_s " << result.wall_s << "\n";
  return kOk;
}

int cmd_compare(const Overrides& o, const std::string& out_dir) {
  ExperimentConfig cfg = resolve(o);
  cfg.train.validate(Method::kHybrid);
  fs::create_directories(out_dir);
  const std::string started = utc_timestamp();
  write_json(fs::path(out_dir) / "manifest.json", manifest_json("compare", cfg, started, ""));

  const Splits splits = load_splits(cfg.data);
  const std::size_t gens = cfg.train.evolution.generations;
  HookFactory factory = [&](std::uint64_t seed, Method method) {
    const fs::path dir = fs::path(out_dir) / ("seed_" + std::to_string(seed)) / method_name(method);
    fs::create_directories(dir);
    auto writer = std::make_shared<MetricsWriter>(dir / "metrics.csv", gens);
    TrainHooks hooks;
    hooks.on_epoch = [writer](const EpochRecord& rec, const Model&) { writer->append(rec); };
    return hooks;
  };
  const ComparisonReport report = run_comparison(splits, cfg.train, cfg.seeds, cfg.jobs, factory);
  write_json(fs::path(out_dir) / "report.json", report_json(report, cfg));
  const std::string tables = report_markdown(report, cfg.train);
  write_text(fs::path(out_dir) / "report.md", tables);
  write_json(fs::path(out_dir) / "manifest.json",
             manifest_json("compare", cfg, started, utc_timestamp()));
  std::cout << tables;
  for (const auto& run : report.runs) {
    if (!run.ok) {
      std::cerr << "seed " << run.seed << " " << method_name(run.method) << " failed: " << run.error
                << "\n";
    }
  }
  return report.complete ? kOk : kIncomplete;
}

int cmd_evolve(const Overrides& o, const std::string& out_dir, const std::string& checkpoint) {
  ExperimentConfig cfg = resolve(o);
  cfg.train.evolution.validate();
  const Checkpoint input = load_checkpoint(checkpoint);
  Model model = restore_model(input);
  const Splits splits = load_splits(cfg.data);
  if (model.input_shape() != splits.validation.image_shape() ||
      model.classes() != splits.validation.classes()) {
    throw FormatError("checkpoint architecture '" + input.architecture +
                      "' is incompatible with the dataset");
  }
  fs::create_directories(out_dir);
  const std::string started = utc_timestamp();
  write_json(fs::path(out_dir) / "manifest.json", manifest_json("evolve", cfg, started, ""));

  const TailFitness fitness(model, splits.validation);
  RngStream rng(derive_seed(cfg.train.seed, {stream_tag::kEvolution, 0}));
  const EvolutionResult result = run_evolution(
      model.tail_weights(), [&fitness](std::span<const double> g) { return fitness(g); },
      cfg.train.evolution, rng);
  model.set_tail_weights(result.best);

  std::ofstream trace(fs::path(out_dir) / "trace.csv");
  trace << "generation,best_fitness,mean_fitness\n";
  char line[128];
  for (const auto& rec : result.trace) {
    std::snprintf(line, sizeof line, "%zu,%.17g,%.17g\n", rec.generation, rec.best_fitness,
                  rec.mean_fitness);
    trace << line;
  }
  save_checkpoint(fs::path(out_dir) / "evolved.ckpt",
                  make_checkpoint(model, {input.cursor.epoch, cfg.train.seed, TrainingPhase::kEvolved}));
  write_json(fs::path(out_dir) / "manifest.json",
             manifest_json("evolve", cfg, started, utc_timestamp()));
  std::cout << "validation accuracy " << result.trace.front().best_fitness << " -> "
            << result.best_fitness << "\n";
  return kOk;
}

int cmd_eval(const Overrides& o, const std::string& checkpoint, const std::string& split_name) {
  ExperimentConfig cfg = resolve(o);
  const Model model = restore_model(load_checkpoint(checkpoint));
  const Splits splits = load_splits(cfg.data);
  const Dataset& split = pick_split(splits, split_name);
  if (model.input_shape() != split.image_shape()) {
    throw FormatError("checkpoint input shape does not match the dataset");
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", evaluate(model, split));
  std::cout << buf << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hybrid backprop + evolution trainer"};
  app.require_subcommand(1);
  Overrides o;
  std::string out_dir = "run";
  std::string checkpoint;
  std::string resume;
  std::string split_name = "test";
  std::size_t save_every = 0;

  auto* train = app.add_subcommand("train", "Train one model (regular or hybrid)");
  add_common(train, o);
  train->add_option("--method", o.method, "regular or hybrid");
  train->add_option("--manifest", o.manifest, "Re-run the configuration recorded in a manifest");
  train->add_option("--out", out_dir, "Output directory");
  train->add_option("--resume", resume, "Continue from a checkpoint");
  train->add_option("--save-every", save_every, "Checkpoint every K epochs");

  auto* compare = app.add_subcommand("compare", "Matched-seed regular vs hybrid comparison");
  add_common(compare, o);
  compare->add_option("--seeds", o.seeds, "Comma-separated seeds");
  compare->add_option("--jobs", o.jobs, "Seeds to run concurrently");
  compare->add_option("--out", out_dir, "Output directory");

  auto* evolve = app.add_subcommand("evolve", "Evolve the tail of a trained checkpoint");
  add_common(evolve, o);
  evolve->add_option("--checkpoint", checkpoint, "Input checkpoint")->required();
  evolve->add_option("--out", out_dir, "Output directory");

  auto* eval = app.add_subcommand("eval", "Accuracy of a checkpoint on one split");
  add_common(eval, o);
  eval->add_option("--checkpoint", checkpoint, "Checkpoint to evaluate")->required();
  eval->add_option("--split", split_name, "train, validation or test");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (*train) return cmd_train(o, out_dir, resume, save_every);
    if (*compare) return cmd_compare(o, out_dir);
    if (*evolve) return cmd_evolve(o, out_dir, checkpoint);
    if (*eval) return cmd_eval(o, checkpoint, split_name);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kDiverged;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kConfigError;
}
