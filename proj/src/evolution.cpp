#include "hybrid/evolution.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>
#include <thread>

namespace hybrid {

namespace {

bool is_probability(double p) { return p >= 0.0 && p <= 1.0; }

std::size_t pool_size_for(double fraction, std::size_t members) {
  // The epsilon keeps 0.3 * 100 at 30 rather than 31.
  const auto k = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(members) - 1e-9));
  return std::clamp<std::size_t>(k, 1, members);
}

std::vector<std::size_t> parent_pool(const Population& pop, double fraction) {
  auto ranked = pop.ranking();
  ranked.resize(pool_size_for(fraction, ranked.size()));
  return ranked;
}

}  // namespace

FitnessError::FitnessError(std::size_t index, const std::string& what)
    : Error("fitness evaluation failed for individual " + std::to_string(index) + ": " + what),
      index_(index) {}

void EvolutionConfig::validate(bool allow_zero_generations) const {
  auto fail = [](const std::string& msg) { throw ConfigError("evolution config: " + msg); };
  if (population < 2) fail("population must be >= 2");
  if (generations < 1 && !allow_zero_generations) fail("generations must be >= 1");
  if (!is_probability(p_crossover)) fail("p_crossover must lie in [0, 1]");
  if (!is_probability(p_mutation)) fail("p_mutation must lie in [0, 1]");
  if (!is_probability(mix.per_value) || !is_probability(mix.block) ||
      !is_probability(mix.full_array)) {
    fail("mutation mix entries must lie in [0, 1]");
  }
  if (std::abs(mix.per_value + mix.block + mix.full_array - 1.0) > 1e-9) {
    fail("mutation mix must sum to 1");
  }
  if (!is_probability(mag_init) || !is_probability(mag_op)) fail("magnitudes must lie in [0, 1]");
  if (!(parent_fraction > 0.0 && parent_fraction <= 1.0)) fail("parent_fraction must lie in (0, 1]");
  if (parents < 2 || parents > pool_size()) {
    fail("parents must lie in [2, " + std::to_string(pool_size()) + "]");
  }
  if (blocks < 1) fail("blocks must be >= 1");
  if (!is_probability(p_value)) fail("p_value must lie in [0, 1]");
  if (threads < 1) fail("threads must be >= 1");
}

std::size_t EvolutionConfig::pool_size() const { return pool_size_for(parent_fraction, population); }

std::vector<std::size_t> Population::ranking() const {
  std::vector<std::size_t> order(members.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double fa = members[a].fitness.value_or(-INFINITY);
    const double fb = members[b].fitness.value_or(-INFINITY);
    if (fa != fb) {
      return fa > fb;
    }
    return members[a].birth < members[b].birth;
  });
  return order;
}

std::size_t Population::best_index() const {
  if (members.empty()) {
    throw StateError("empty population");
  }
  return ranking().front();
}

bool Population::evaluated() const {
  return std::all_of(members.begin(), members.end(),
                     [](const Individual& m) { return m.fitness.has_value(); });
}

BlockRange block_range(std::size_t length, std::size_t count, std::size_t index) {
  if (count == 0 || count > length || index >= count) {
    throw ConfigError("block_range: need 1 <= count <= length and index < count");
  }
  const std::size_t k = length / count;
  const std::size_t begin = index * k;
  const std::size_t end = index + 1 == count ? length : begin + k;
  return {begin, end};
}

Population init_population(const WeightVector& initial, const EvolutionConfig& cfg, RngStream& rng) {
  cfg.validate(true);
  if (initial.empty()) {
    throw DimensionError("init_population: empty genome");
  }
  if (!std::all_of(initial.begin(), initial.end(), [](double v) { return std::isfinite(v); })) {
    throw NumericError("init_population: initial genome is not finite");
  }
  const std::uint64_t base = rng.next_u64();
  Population pop;
  pop.members.reserve(cfg.population);
  for (std::size_t j = 0; j + 1 < cfg.population; ++j) {
    RngStream stream(derive_seed(base, {j}));
    pop.members.push_back({mutate_full_array(initial, cfg.mag_init, stream), std::nullopt, j + 1});
  }
  // The unchanged genome sits last and counts as the oldest individual.
  pop.members.push_back({initial, std::nullopt, 0});
  pop.next_birth = cfg.population;
  return pop;
}

std::vector<Individual> select_parents(const Population& pop, std::size_t m, double parent_fraction,
                                       RngStream& rng) {
  if (!pop.evaluated()) {
    throw StateError("select_parents: population has unevaluated members");
  }
  auto pool = parent_pool(pop, parent_fraction);
  if (m == 0 || m > pool.size()) {
    throw ConfigError("select_parents: cannot draw " + std::to_string(m) + " parents from a pool of " +
                      std::to_string(pool.size()));
  }
  std::vector<Individual> parents;
  parents.reserve(m);
  for (std::size_t j = 0; j < m; ++j) {
    const std::size_t pick = j + rng.uniform_index(pool.size() - j);
    std::swap(pool[j], pool[pick]);
    parents.push_back(pop.members[pool[j]]);
  }
  return parents;
}

WeightVector crossover(const std::vector<WeightVector>& parents) {
  if (parents.empty()) {
    throw DimensionError("crossover: no parents");
  }
  const std::size_t length = parents.front().size();
  for (const auto& p : parents) {
    if (p.size() != length) {
      throw DimensionError("crossover: parents differ in length");
    }
  }
  if (parents.size() > length) {
    throw DimensionError("crossover: more parents than genome elements");
  }
  WeightVector child(length);
  for (std::size_t j = 0; j < parents.size(); ++j) {
    const auto [begin, end] = block_range(length, parents.size(), j);
    std::copy(parents[j].begin() + static_cast<std::ptrdiff_t>(begin),
              parents[j].begin() + static_cast<std::ptrdiff_t>(end),
              child.begin() + static_cast<std::ptrdiff_t>(begin));
  }
  return child;
}

WeightVector mutate_full_array(const WeightVector& w, double mag, RngStream& rng) {
  WeightVector out = w;
  for (double& v : out) {
    v += rng.normal() * mag;
  }
  return out;
}

WeightVector mutate_block(const WeightVector& w, std::size_t blocks, double mag, RngStream& rng) {
  if (blocks == 0 || blocks > w.size()) {
    throw ConfigError("mutate_block: block count " + std::to_string(blocks) +
                      " invalid for length " + std::to_string(w.size()));
  }
  WeightVector out = w;
  const auto [begin, end] = block_range(w.size(), blocks, rng.uniform_index(blocks));
  for (std::size_t j = begin; j < end; ++j) {
    const double bound = std::abs(out[j]);
    out[j] += rng.uniform(-bound, bound) * mag;
  }
  return out;
}

WeightVector mutate_per_value(const WeightVector& w, double p_value, double mag, RngStream& rng) {
  WeightVector out = w;
  for (double& v : out) {
    if (rng.bernoulli(p_value)) {
      const double bound = std::abs(v);
      v += rng.uniform(-bound, bound) * mag;
    }
  }
  return out;
}

WeightVector make_offspring(const Population& pop, const EvolutionConfig& cfg, RngStream& rng,
                            OffspringLog* log) {
  if (!pop.evaluated()) {
    throw StateError("make_offspring: population has unevaluated members");
  }
  OffspringLog local;
  bool do_crossover = false;
  bool do_mutation = false;
  for (bool first = true;; first = false) {
    do_crossover = rng.bernoulli(cfg.p_crossover);
    do_mutation = rng.bernoulli(cfg.p_mutation);
    if (first) {
      local.first_crossover = do_crossover;
      local.first_mutation = do_mutation;
    }
    // With both probabilities at zero no draw can succeed, so keep the clone.
    if (do_crossover || do_mutation || (cfg.p_crossover == 0.0 && cfg.p_mutation == 0.0)) {
      break;
    }
    ++local.redraws;
  }

  WeightVector child;
  if (do_crossover) {
    std::vector<WeightVector> genomes;
    for (auto& parent : select_parents(pop, cfg.parents, cfg.parent_fraction, rng)) {
      genomes.push_back(std::move(parent.genome));
    }
    // Genomes shorter than m: each of the first l parents gives one value.
    if (genomes.size() > genomes.front().size()) genomes.resize(genomes.front().size());
    child = crossover(genomes);
  } else {
    const auto pool = parent_pool(pop, cfg.parent_fraction);
    child = pop.members[pool[rng.uniform_index(pool.size())]].genome;
  }
  local.crossover = do_crossover;

  if (do_mutation) {
    const double r = rng.next_unit();
    if (r < cfg.mix.per_value) {
      local.mutation = MutationKind::kPerValue;
      child = mutate_per_value(child, cfg.p_value, cfg.mag_op, rng);
    } else if (r < cfg.mix.per_value + cfg.mix.block) {
      local.mutation = MutationKind::kBlock;
      child = mutate_block(child, std::min(cfg.blocks, child.size()), cfg.mag_op, rng);
    } else {
      local.mutation = MutationKind::kFullArray;
      child = mutate_full_array(child, cfg.full_array_mag(), rng);
    }
  }
  if (log) {
    *log = local;
  }
  return child;
}

void evaluate_population(Population& pop, const FitnessFn& fitness, std::size_t threads) {
  std::vector<std::size_t> pending;
  for (std::size_t j = 0; j < pop.members.size(); ++j) {
    if (!pop.members[j].fitness) {
      pending.push_back(j);
    }
  }
  std::vector<double> scores(pending.size());
  std::vector<std::exception_ptr> errors(pending.size());
  auto work = [&](std::size_t slot) {
    try {
      const double f = fitness(pop.members[pending[slot]].genome);
      if (!std::isfinite(f)) {
        throw NumericError("non-finite fitness");
      }
      scores[slot] = f;
    } catch (...) {
      errors[slot] = std::current_exception();
    }
  };

  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), pending.size());
  if (workers <= 1) {
    for (std::size_t slot = 0; slot < pending.size(); ++slot) {
      work(slot);
    }
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < workers; ++t) {
      pool.emplace_back([&] {
        for (std::size_t slot = next++; slot < pending.size(); slot = next++) {
          work(slot);
        }
      });
    }
  }

  for (std::size_t slot = 0; slot < pending.size(); ++slot) {
    if (errors[slot]) {
      try {
        std::rethrow_exception(errors[slot]);
      } catch (const std::exception& e) {
        throw FitnessError(pending[slot], e.what());
      }
    }
    pop.members[pending[slot]].fitness = scores[slot];
  }
}

Population run_generation(const Population& pop, const FitnessFn& fitness,
                          const EvolutionConfig& cfg, RngStream& rng) {
  if (!pop.evaluated()) {
    throw StateError("run_generation: population has unevaluated members");
  }
  if (pop.members.size() != cfg.population) {
    throw StateError("run_generation: population size " + std::to_string(pop.members.size()) +
                     " differs from configured " + std::to_string(cfg.population));
  }
  const std::uint64_t base = rng.next_u64();
  Population next;
  next.generation = pop.generation + 1;
  next.next_birth = pop.next_birth;
  next.members.reserve(pop.members.size());
  // Offspring are built sequentially, each from its own sub-stream.
  for (std::size_t j = 0; j + 1 < pop.members.size(); ++j) {
    RngStream stream(derive_seed(base, {j}));
    next.members.push_back({make_offspring(pop, cfg, stream), std::nullopt, next.next_birth++});
  }
  next.members.push_back(pop.members[pop.best_index()]);
  evaluate_population(next, fitness, cfg.threads);
  return next;
}

namespace {

GenerationRecord summarize(const Population& pop) {
  GenerationRecord rec;
  rec.generation = pop.generation;
  rec.best_fitness = *pop.members[pop.best_index()].fitness;
  double sum = 0.0;
  for (const auto& m : pop.members) {
    sum += *m.fitness;
  }
  rec.mean_fitness = sum / static_cast<double>(pop.members.size());
  return rec;
}

}  // namespace

EvolutionResult run_evolution(const WeightVector& initial, const FitnessFn& fitness,
                              const EvolutionConfig& cfg, RngStream& rng) {
  cfg.validate(true);
  Population pop = init_population(initial, cfg, rng);
  evaluate_population(pop, fitness, cfg.threads);

  EvolutionResult result;
  result.trace.push_back(summarize(pop));
  for (std::size_t g = 0; g < cfg.generations; ++g) {
    pop = run_generation(pop, fitness, cfg, rng);
    result.trace.push_back(summarize(pop));
  }
  const Individual& best = pop.members[pop.best_index()];
  result.best = best.genome;
  result.best_fitness = *best.fitness;
  return result;
}

}  // namespace hybrid
