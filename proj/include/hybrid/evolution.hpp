#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "hybrid/errors.hpp"
#include "hybrid/nn.hpp"
#include "hybrid/rng.hpp"

namespace hybrid {

/// Conditional probabilities of each mutation operator once a mutation fires.
struct MutationMix {
  double per_value = 0.45;
  double block = 0.45;
  double full_array = 0.10;
};

struct EvolutionConfig {
  std::size_t population = 100;    // individuals per generation
  std::size_t generations = 5;     // generations per evolution event
  double p_crossover = 0.30;
  double p_mutation = 0.50;
  MutationMix mix;
  double mag_init = 1.0;           // population seeding perturbation
  double mag_op = 0.05;            // block and per-value mutation
  // Full-array mutation reuses mag_init when set, mag_op otherwise.
  bool full_array_uses_init_mag = true;
  double parent_fraction = 0.30;
  std::size_t parents = 2;         // parents per crossover
  std::size_t blocks = 10;         // block count for block mutation
  double p_value = 0.05;           // per-element probability for per-value mutation
  std::size_t threads = 1;         // concurrent fitness evaluations; never affects results

  /// Throws ConfigError on any violated constraint. Zero generations are only
  /// accepted when `allow_zero_generations` is set.
  void validate(bool allow_zero_generations = false) const;
  /// Number of top-ranked individuals eligible as parents: ceil(fraction * i).
  std::size_t pool_size() const;
  double full_array_mag() const { return full_array_uses_init_mag ? mag_init : mag_op; }
};

struct Individual {
  WeightVector genome;
  std::optional<double> fitness;
  std::uint64_t birth = 0;  // creation order; earlier wins fitness ties
};

struct Population {
  std::vector<Individual> members;
  std::size_t generation = 0;
  std::uint64_t next_birth = 0;

  /// Index of the fittest member; ties go to the earliest-born.
  std::size_t best_index() const;
  /// Member indices ordered by fitness descending, then birth ascending.
  std::vector<std::size_t> ranking() const;
  bool evaluated() const;
};

enum class MutationKind { kNone, kPerValue, kBlock, kFullArray };

/// What make_offspring did, for operator-frequency checks.
struct OffspringLog {
  bool first_crossover = false;  // first-pass coin flips, before any re-draw
  bool first_mutation = false;
  bool crossover = false;
  MutationKind mutation = MutationKind::kNone;
  std::size_t redraws = 0;
};

struct GenerationRecord {
  std::size_t generation = 0;
  double best_fitness = 0.0;
  double mean_fitness = 0.0;
};

struct EvolutionResult {
  WeightVector best;
  double best_fitness = 0.0;
  std::vector<GenerationRecord> trace;  // generations 0..g
};

using FitnessFn = std::function<double(std::span<const double>)>;

/// Raised when the fitness function throws; carries the member index.
class FitnessError : public Error {
 public:
  FitnessError(std::size_t index, const std::string& what);
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

/// Contiguous block [begin, end) number `index` of `count` blocks over
/// `length` elements: blocks are length / count long, the last one absorbs
/// the remainder.
struct BlockRange {
  std::size_t begin;
  std::size_t end;
};
BlockRange block_range(std::size_t length, std::size_t count, std::size_t index);

Population init_population(const WeightVector& initial, const EvolutionConfig& cfg, RngStream& rng);

std::vector<Individual> select_parents(const Population& pop, std::size_t m, double parent_fraction,
                                       RngStream& rng);

WeightVector crossover(const std::vector<WeightVector>& parents);

WeightVector mutate_full_array(const WeightVector& w, double mag, RngStream& rng);
WeightVector mutate_block(const WeightVector& w, std::size_t blocks, double mag, RngStream& rng);
WeightVector mutate_per_value(const WeightVector& w, double p_value, double mag, RngStream& rng);

WeightVector make_offspring(const Population& pop, const EvolutionConfig& cfg, RngStream& rng,
                            OffspringLog* log = nullptr);

/// Fills in every missing fitness, using cfg.threads workers.
void evaluate_population(Population& pop, const FitnessFn& fitness, std::size_t threads);

/// Next generation: i-1 evaluated offspring followed by the previous elite.
Population run_generation(const Population& pop, const FitnessFn& fitness,
                          const EvolutionConfig& cfg, RngStream& rng);

EvolutionResult run_evolution(const WeightVector& initial, const FitnessFn& fitness,
                              const EvolutionConfig& cfg, RngStream& rng);

}  // namespace hybrid
