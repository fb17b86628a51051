#include "hybrid/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <future>
#include <numeric>

#include "hybrid/errors.hpp"

namespace hybrid {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

Tensor split_features(const Model& model, const Dataset& split, std::size_t batch_size) {
  const std::size_t fan_in = model.tail().fan_in();
  std::vector<double> data;
  data.reserve(split.size() * fan_in);
  std::vector<std::size_t> indices;
  for (std::size_t start = 0; start < split.size(); start += batch_size) {
    const std::size_t end = std::min(split.size(), start + batch_size);
    indices.resize(end - start);
    std::iota(indices.begin(), indices.end(), start);
    const Tensor f = model.features(split.batch(indices));
    data.insert(data.end(), f.values().begin(), f.values().end());
  }
  return Tensor({split.size(), fan_in}, std::move(data));
}

}  // namespace

std::string method_name(Method method) {
  return method == Method::kRegular ? "regular" : "hybrid";
}

Method parse_method(const std::string& name) {
  if (name == "regular") return Method::kRegular;
  if (name == "hybrid") return Method::kHybrid;
  throw ConfigError("unknown method '" + name + "' (expected regular or hybrid)");
}

void TrainConfig::validate(Method method) const {
  if (max_epochs < 1) {
    throw ConfigError("max_epochs must be >= 1");
  }
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning_rate must be finite and non-negative");
  }
  if (batch_size < 1) {
    throw ConfigError("batch_size must be >= 1");
  }
  if (method == Method::kHybrid) {
    if (warmup_epochs < 1 || warmup_epochs >= max_epochs) {
      throw ConfigError("warm-up epochs n must satisfy 1 <= n < max_epochs");
    }
    if (evolution_period < 1 || evolution_period > max_epochs - warmup_epochs) {
      throw ConfigError("evolution period y must satisfy 1 <= y <= max_epochs - n");
    }
    evolution.validate();
  }
}

bool TrainConfig::is_evolution_epoch(std::size_t epoch) const {
  return evolution_period > 0 && epoch >= warmup_epochs && epoch <= max_epochs &&
         (epoch - warmup_epochs) % evolution_period == 0;
}

std::vector<std::size_t> TrainConfig::evolution_epochs() const {
  std::vector<std::size_t> out;
  for (std::size_t e = 1; e <= max_epochs; ++e) {
    if (is_evolution_epoch(e)) {
      out.push_back(e);
    }
  }
  return out;
}

bool EpochRecord::same_metrics(const EpochRecord& other) const {
  return epoch == other.epoch && train_loss == other.train_loss && val_acc == other.val_acc &&
         val_acc_before_event == other.val_acc_before_event && test_acc == other.test_acc &&
         evolution_trace == other.evolution_trace;
}

DivergenceError::DivergenceError(std::size_t epoch, const std::string& what)
    : NumericError("training diverged in epoch " + std::to_string(epoch) + ": " + what),
      epoch_(epoch) {}

Model initial_model(const Dataset& shape_source, std::uint64_t seed) {
  Model model = Model::small_convnet(shape_source.channels(), shape_source.height(),
                                     shape_source.width(), shape_source.classes());
  RngStream rng(derive_seed(seed, {stream_tag::kModelInit}));
  model.initialize(rng);
  return model;
}

TailFitness::TailFitness(const Model& model, const Dataset& split, std::size_t batch_size)
    : features_(split_features(model, split, batch_size)),
      labels_(split.labels().begin(), split.labels().end()),
      classes_(model.classes()) {}

double TailFitness::operator()(std::span<const double> genome) const {
  return accuracy_from_scores(Dense::apply(features_, genome, classes_), labels_);
}

RunResult train(Model model, const Splits& data, const TrainConfig& cfg, Method method,
                const TrainHooks& hooks) {
  cfg.validate(method);
  if (data.train.empty() || data.validation.empty() || data.test.empty()) {
    throw InputError("train: every split must be non-empty");
  }
  if (model.input_shape() != data.train.image_shape()) {
    throw DimensionError("train: model input " + shape_string(model.input_shape()) +
                         " does not match images " + shape_string(data.train.image_shape()));
  }
  if (hooks.start_epoch > cfg.max_epochs) {
    throw ConfigError("train: resume epoch beyond max_epochs");
  }

  const auto start = Clock::now();
  RunResult result{std::move(model), {}, 0.0, 0.0, 0.0};
  Model& net = result.model;
  const Dataset& train_set = data.train;
  std::vector<std::size_t> order(train_set.size());
  std::vector<std::size_t> batch_indices;

  for (std::size_t epoch = hooks.start_epoch + 1; epoch <= cfg.max_epochs; ++epoch) {
    // Each epoch's order comes from its own sub-stream, so regular and hybrid
    // runs of one seed see the same batches and resumed runs stay in step.
    RngStream shuffle(derive_seed(cfg.seed, {stream_tag::kShuffle, epoch}));
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle.uniform_index(i)]);
    }

    double loss_sum = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      batch_indices.assign(order.begin() + static_cast<std::ptrdiff_t>(b),
                           order.begin() + static_cast<std::ptrdiff_t>(end));
      net.forward(train_set.batch(batch_indices));
      const auto labels = train_set.batch_labels(batch_indices);
      Gradients grads = net.backward(labels);
      if (!std::isfinite(grads.loss)) {
        throw DivergenceError(epoch, "non-finite loss at batch starting " + std::to_string(b));
      }
      loss_sum += grads.loss * static_cast<double>(labels.size());
      try {
        sgd_step(net, grads, cfg.learning_rate);
      } catch (const NumericError& e) {
        throw DivergenceError(epoch, e.what());
      }
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(order.size());
    rec.val_acc = evaluate(net, data.validation);

    if (method == Method::kHybrid && cfg.is_evolution_epoch(epoch)) {
      rec.val_acc_before_event = rec.val_acc;
      try {
        const TailFitness fitness(net, data.validation);
        RngStream evo(derive_seed(cfg.seed, {stream_tag::kEvolution, epoch}));
        const EvolutionResult evolved = run_evolution(
            net.tail_weights(), [&fitness](std::span<const double> g) { return fitness(g); },
            cfg.evolution, evo);
        net.set_tail_weights(evolved.best);
        std::vector<double> trace;
        for (const auto& gen : evolved.trace) {
          trace.push_back(gen.best_fitness);
        }
        rec.evolution_trace = std::move(trace);
      } catch (const Error& e) {
        throw Error("evolution event at epoch " + std::to_string(epoch) + ": " + e.what());
      }
      rec.val_acc = evaluate(net, data.validation);
    }

    if (epoch == cfg.max_epochs) {
      rec.test_acc = evaluate(net, data.test);
      result.test_acc = *rec.test_acc;
    }
    rec.wall_s = seconds_since(start);
    result.final_val_acc = rec.val_acc;
    result.records.push_back(rec);
    if (hooks.on_epoch) {
      hooks.on_epoch(rec, net);
    }
  }
  if (result.records.empty()) {
    result.final_val_acc = evaluate(net, data.validation);
    result.test_acc = evaluate(net, data.test);
  }
  // Same clock reading as the last metrics row, so reports and CSVs agree.
  result.wall_s = result.records.empty() ? seconds_since(start) : result.records.back().wall_s;
  return result;
}

RunResult train_regular(Model model, const Splits& data, const TrainConfig& cfg,
                        const TrainHooks& hooks) {
  return train(std::move(model), data, cfg, Method::kRegular, hooks);
}

RunResult train_hybrid(Model model, const Splits& data, const TrainConfig& cfg,
                       const TrainHooks& hooks) {
  return train(std::move(model), data, cfg, Method::kHybrid, hooks);
}

// ---- Comparison ------------------------------------------------------------

Stat summarize(const std::vector<double>& values) {
  Stat s;
  if (values.empty()) {
    return s;
  }
  const auto n = static_cast<double>(values.size());
  s.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) {
      ss += (v - s.mean) * (v - s.mean);
    }
    s.std = std::sqrt(ss / (n - 1.0));
  }
  return s;
}

std::vector<EpochSummary> ComparisonReport::evolution_rows() const {
  std::vector<EpochSummary> rows;
  for (const auto& e : epochs) {
    if (!e.hybrid_generations.empty()) {
      rows.push_back(e);
    }
  }
  return rows;
}

ComparisonReport build_report(std::vector<SeedRun> runs, const TrainConfig& cfg) {
  ComparisonReport report;
  report.runs = std::move(runs);

  auto method_summary = [&](Method m) {
    std::vector<double> val, test, wall;
    for (const auto& r : report.runs) {
      if (r.ok && r.method == m) {
        val.push_back(r.val_acc);
        test.push_back(r.test_acc);
        wall.push_back(r.wall_s);
      }
    }
    MethodSummary s;
    s.val_acc = summarize(val);
    s.test_acc = summarize(test);
    s.wall_s = summarize(wall);
    s.runs = val.size();
    return s;
  };
  report.regular = method_summary(Method::kRegular);
  report.hybrid = method_summary(Method::kHybrid);

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    EpochSummary row;
    row.epoch = epoch;
    std::vector<double> regular, hybrid;
    std::vector<std::vector<double>> generations;
    for (const auto& r : report.runs) {
      if (!r.ok || r.records.size() < epoch) {
        continue;
      }
      const EpochRecord& rec = r.records[epoch - 1];
      if (r.method == Method::kRegular) {
        regular.push_back(rec.val_acc);
      } else {
        hybrid.push_back(rec.val_acc);
        if (rec.evolution_trace) {
          const auto& trace = *rec.evolution_trace;
          generations.resize(std::max(generations.size(), trace.size() - 1));
          for (std::size_t g = 1; g < trace.size(); ++g) {
            generations[g - 1].push_back(trace[g]);
          }
        }
      }
    }
    row.regular_val = summarize(regular);
    row.hybrid_val = summarize(hybrid);
    for (const auto& values : generations) {
      row.hybrid_generations.push_back(summarize(values));
    }
    report.epochs.push_back(std::move(row));
  }

  report.complete = report.regular.runs > 0 && report.hybrid.runs > 0 &&
                    std::all_of(report.runs.begin(), report.runs.end(),
                                [](const SeedRun& r) { return r.ok; });
  return report;
}

ComparisonReport run_comparison(const Splits& data, const TrainConfig& cfg,
                                const std::vector<std::uint64_t>& seeds, std::size_t jobs,
                                const HookFactory& hooks) {
  if (seeds.empty()) {
    throw ConfigError("run_comparison: at least one seed is required");
  }
  cfg.validate(Method::kHybrid);

  auto run_seed = [&](std::uint64_t seed) {
    std::vector<SeedRun> out;
    TrainConfig seeded = cfg;
    seeded.seed = seed;
    for (Method method : {Method::kRegular, Method::kHybrid}) {
      SeedRun run;
      run.seed = seed;
      run.method = method;
      try {
        const TrainHooks h = hooks ? hooks(seed, method) : TrainHooks{};
        RunResult result = train(initial_model(data.train, seed), data, seeded, method, h);
        run.records = std::move(result.records);
        run.val_acc = result.final_val_acc;
        run.test_acc = result.test_acc;
        run.wall_s = result.wall_s;
        run.ok = true;
      } catch (const std::exception& e) {
        run.error = e.what();
      }
      out.push_back(std::move(run));
    }
    return out;
  };

  std::vector<SeedRun> runs;
  const std::size_t width = std::max<std::size_t>(jobs, 1);
  for (std::size_t first = 0; first < seeds.size(); first += width) {
    std::vector<std::future<std::vector<SeedRun>>> pending;
    for (std::size_t s = first; s < std::min(seeds.size(), first + width); ++s) {
      pending.push_back(std::async(width > 1 ? std::launch::async : std::launch::deferred,
                                   run_seed, seeds[s]));
    }
    for (auto& f : pending) {
      for (auto& run : f.get()) {
        runs.push_back(std::move(run));
      }
    }
  }
  return build_report(std::move(runs), cfg);
}

}  // namespace hybrid
