#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "hybrid/evolution.hpp"
#include "oracles.hpp"

using namespace hybrid;

namespace {

WeightVector random_genome(RngStream& rng, std::size_t n) {
  WeightVector w(n);
  for (double& v : w) v = rng.normal();
  return w;
}

// Population whose fitness is the negated member index, so member 0 is best.
Population ranked_population(std::size_t size, std::size_t length) {
  Population pop;
  for (std::size_t j = 0; j < size; ++j) {
    pop.members.push_back({WeightVector(length, static_cast<double>(j)), -static_cast<double>(j), j});
  }
  pop.next_birth = size;
  return pop;
}

double neg_distance(std::span<const double> w, const WeightVector& target) {
  double s = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) s += (w[j] - target[j]) * (w[j] - target[j]);
  return -std::sqrt(s);
}

}  // namespace

TEST(Config, DefaultsAreValidAndConstraintsEnforced) {
  EvolutionConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  EXPECT_EQ(cfg.pool_size(), 30u);
  auto bad = [](auto edit) {
    EvolutionConfig c;
    edit(c);
    return c;
  };
  EXPECT_THROW(bad([](auto& c) { c.population = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.generations = 0; }).validate(), ConfigError);
  EXPECT_NO_THROW(bad([](auto& c) { c.generations = 0; }).validate(true));
  EXPECT_THROW(bad([](auto& c) { c.p_crossover = 1.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.mix.block = 0.5; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.parents = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.parents = 31; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.blocks = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto& c) { c.mag_op = 2.0; }).validate(), ConfigError);
}

TEST(InitPopulation, PerturbedMembersPlusUnchangedCopyLast) {
  EvolutionConfig cfg;
  RngStream rng(1);
  const WeightVector w0 = random_genome(rng, 1290);
  const Population pop = init_population(w0, cfg, rng);
  ASSERT_EQ(pop.members.size(), 100u);
  EXPECT_EQ(pop.members.back().genome, w0);
  for (const auto& m : pop.members) EXPECT_FALSE(m.fitness.has_value());
  double sum = 0.0, sq = 0.0;
  for (std::size_t j = 0; j + 1 < 100; ++j) {
    ASSERT_EQ(pop.members[j].genome.size(), w0.size());
    ASSERT_NE(pop.members[j].genome, w0);
    for (std::size_t t = 0; t < w0.size(); ++t) {
      const double d = pop.members[j].genome[t] - w0[t];
      sum += d;
      sq += d * d;
    }
  }
  const double n = 99.0 * 1290.0;
  EXPECT_NEAR(sum / n, 0.0, 0.15);
  EXPECT_NEAR(std::sqrt(sq / n), 1.0, 0.02);
}

TEST(InitPopulation, ZeroMagnitudeGivesIdenticalMembers) {
  EvolutionConfig cfg;
  cfg.mag_init = 0.0;
  RngStream rng(2);
  const WeightVector w0 = random_genome(rng, 50);
  for (const auto& m : init_population(w0, cfg, rng).members) EXPECT_EQ(m.genome, w0);
}

TEST(InitPopulation, RejectsNonFiniteAndInvalidConfig) {
  RngStream rng(3);
  EvolutionConfig cfg;
  EXPECT_THROW(init_population({1.0, NAN}, cfg, rng), NumericError);
  cfg.p_mutation = -0.1;
  EXPECT_THROW(init_population({1.0}, cfg, rng), ConfigError);
}

TEST(SelectParents, PoolIsTopFractionByFitness) {
  const Population pop = ranked_population(100, 3);
  RngStream rng(4);
  std::map<double, int> seen;
  for (int t = 0; t < 2000; ++t)
    for (const auto& p : select_parents(pop, 2, 0.30, rng)) ++seen[p.genome[0]];
  EXPECT_EQ(seen.size(), 30u);
  EXPECT_EQ(seen.begin()->first, 0.0);
  EXPECT_EQ(seen.rbegin()->first, 29.0);
}

TEST(SelectParents, WholePoolWhenMEqualsPoolSize) {
  const Population pop = ranked_population(10, 1);
  RngStream rng(5);
  auto parents = select_parents(pop, 3, 0.30, rng);
  std::vector<double> ids;
  for (const auto& p : parents) ids.push_back(p.genome[0]);
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(ids, (std::vector<double>{0, 1, 2}));
}

TEST(SelectParents, PairFrequencyIsTwoThirds) {
  const Population pop = ranked_population(10, 1);
  RngStream rng(6);
  std::vector<int> counts(10, 0);
  for (int t = 0; t < 10000; ++t) {
    const auto parents = select_parents(pop, 2, 0.30, rng);
    ASSERT_NE(parents[0].genome, parents[1].genome);
    for (const auto& p : parents) ++counts[static_cast<std::size_t>(p.genome[0])];
  }
  for (int j = 0; j < 3; ++j) EXPECT_NEAR(counts[j] / 10000.0, 2.0 / 3.0, 0.03);
  for (int j = 3; j < 10; ++j) EXPECT_EQ(counts[j], 0);
}

TEST(SelectParents, UnevaluatedPopulationIsStateError) {
  Population pop = ranked_population(10, 1);
  pop.members[4].fitness.reset();
  RngStream rng(7);
  EXPECT_THROW(select_parents(pop, 2, 0.3, rng), StateError);
}

TEST(Crossover, SpecExamples) {
  std::vector<WeightVector> three;
  for (double base : {100.0, 200.0, 300.0}) {
    WeightVector p(10);
    for (std::size_t t = 0; t < 10; ++t) p[t] = base + static_cast<double>(t);
    three.push_back(p);
  }
  EXPECT_EQ(crossover(three), (WeightVector{100, 101, 102, 203, 204, 205, 306, 307, 308, 309}));
  EXPECT_EQ(crossover({three[1]}), three[1]);
  EXPECT_EQ(crossover({WeightVector(8, 1.0), WeightVector(8, 2.0)}),
            (WeightVector{1, 1, 1, 1, 2, 2, 2, 2}));
  EXPECT_THROW(crossover({WeightVector(8, 1.0), WeightVector(7, 2.0)}), DimensionError);
}

TEST(Crossover, ExhaustiveAgainstSlicingOracle) {
  RngStream rng(8);
  for (std::size_t l = 1; l <= 30; ++l)
    for (std::size_t m = 1; m <= std::min<std::size_t>(5, l); ++m) {
      std::vector<WeightVector> parents;
      for (std::size_t j = 0; j < m; ++j) parents.push_back(random_genome(rng, l));
      ASSERT_EQ(crossover(parents), oracle::crossover(parents)) << "l=" << l << " m=" << m;
    }
}

TEST(FullArrayMutation, ZeroMagnitudeDeterminismAndSpread) {
  RngStream rng(9);
  const WeightVector w = random_genome(rng, 100000);
  EXPECT_EQ(mutate_full_array(w, 0.0, rng), w);
  RngStream a(10), b(10);
  const WeightVector out = mutate_full_array(w, 1.0, a);
  EXPECT_EQ(out, mutate_full_array(w, 1.0, b));
  double sum = 0.0, sq = 0.0;
  for (std::size_t t = 0; t < w.size(); ++t) sum += out[t] - w[t];
  const double mean = sum / static_cast<double>(w.size());
  for (std::size_t t = 0; t < w.size(); ++t) sq += (out[t] - w[t] - mean) * (out[t] - w[t] - mean);
  EXPECT_NEAR(std::sqrt(sq / static_cast<double>(w.size() - 1)), 1.0, 0.02);
}

TEST(BlockMutation, ChangesExactlyOneBlock) {
  RngStream rng(11);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t length = 100 + (trial % 7);
    WeightVector w = random_genome(rng, length);
    const WeightVector out = mutate_block(w, 10, 0.05, rng);
    std::vector<std::size_t> changed;
    for (std::size_t t = 0; t < length; ++t)
      if (out[t] != w[t]) changed.push_back(t);
    ASSERT_FALSE(changed.empty());
    ASSERT_EQ(changed.back() - changed.front() + 1, changed.size()) << "not contiguous";
    const std::size_t k = length / 10;
    const std::size_t block = std::min<std::size_t>(changed.front() / k, 9);
    const std::size_t begin = block * k;
    const std::size_t end = block == 9 ? length : begin + k;
    ASSERT_GE(changed.front(), begin);
    ASSERT_LE(changed.back() + 1, end);
    for (std::size_t t : changed) ASSERT_LE(std::abs(out[t] - w[t]), 0.05 * std::abs(w[t]) + 1e-15);
  }
}

TEST(BlockMutation, ZeroMagnitudeZerosAndBadBlockCount) {
  RngStream rng(12);
  const WeightVector w = random_genome(rng, 20);
  EXPECT_EQ(mutate_block(w, 4, 0.0, rng), w);
  EXPECT_EQ(mutate_block(WeightVector(20, 0.0), 4, 1.0, rng), WeightVector(20, 0.0));
  EXPECT_THROW(mutate_block(w, 21, 0.05, rng), ConfigError);
  EXPECT_THROW(mutate_block(w, 0, 0.05, rng), ConfigError);
}

TEST(PerValueMutation, IdentityBoundsAndFrequency) {
  RngStream rng(13);
  WeightVector w = random_genome(rng, 1000);
  w[3] = 0.0;
  EXPECT_EQ(mutate_per_value(w, 0.0, 0.05, rng), w);
  const WeightVector all = mutate_per_value(w, 1.0, 0.05, rng);
  EXPECT_EQ(all[3], 0.0);
  for (std::size_t t = 0; t < w.size(); ++t) {
    EXPECT_LE(std::abs(all[t] - w[t]), 0.05 * std::abs(w[t]));
    if (w[t] != 0.0) EXPECT_NE(all[t], w[t]);
  }
  for (std::uint64_t seed : {1, 2, 3}) {
    RngStream s(seed);
    const WeightVector big = random_genome(s, 100000);
    const WeightVector out = mutate_per_value(big, 0.05, 0.05, s);
    std::size_t changed = 0;
    for (std::size_t t = 0; t < big.size(); ++t) changed += out[t] != big[t];
    EXPECT_NEAR(changed / 1e5, 0.05, 0.005);
  }
}

TEST(MakeOffspring, ForcedCrossoverIsPureBlockConcatenation) {
  EvolutionConfig cfg;
  cfg.population = 10;
  cfg.p_crossover = 1.0;
  cfg.p_mutation = 0.0;
  const Population pop = ranked_population(10, 9);
  RngStream rng(14);
  for (int t = 0; t < 200; ++t) {
    OffspringLog log;
    const WeightVector child = make_offspring(pop, cfg, rng, &log);
    EXPECT_TRUE(log.crossover);
    EXPECT_EQ(log.mutation, MutationKind::kNone);
    // First half from one top-3 member, second half from another.
    EXPECT_LT(child[0], 3.0);
    EXPECT_LT(child[8], 3.0);
    EXPECT_NE(child[0], child[8]);
    EXPECT_TRUE(std::all_of(child.begin(), child.begin() + 4, [&](double v) { return v == child[0]; }));
    EXPECT_TRUE(std::all_of(child.begin() + 4, child.end(), [&](double v) { return v == child[8]; }));
  }
}

TEST(MakeOffspring, ForcedPerValueMutationOfPoolMember) {
  EvolutionConfig cfg;
  cfg.population = 10;
  cfg.p_crossover = 0.0;
  cfg.p_mutation = 1.0;
  cfg.mix = {1.0, 0.0, 0.0};
  cfg.p_value = 1.0;
  Population pop = ranked_population(10, 5);
  for (auto& m : pop.members) m.genome.assign(5, 1.0 + m.genome[0]);
  RngStream rng(15);
  for (int t = 0; t < 200; ++t) {
    OffspringLog log;
    const WeightVector child = make_offspring(pop, cfg, rng, &log);
    EXPECT_FALSE(log.crossover);
    EXPECT_EQ(log.mutation, MutationKind::kPerValue);
    const double source = std::round(child[0]);
    EXPECT_TRUE(source >= 1.0 && source <= 3.0);
    for (double v : child) EXPECT_LE(std::abs(v - source), 0.05 * source);
  }
}

TEST(MakeOffspring, FirstPassFrequenciesAndAtMostOneMutation) {
  EvolutionConfig cfg;
  cfg.population = 20;
  const Population pop = ranked_population(20, 40);
  RngStream rng(16);
  int cross = 0, mut = 0, per_value = 0, block = 0, full = 0;
  for (int t = 0; t < 10000; ++t) {
    OffspringLog log;
    make_offspring(pop, cfg, rng, &log);
    cross += log.first_crossover;
    mut += log.first_mutation;
    EXPECT_TRUE(log.crossover || log.mutation != MutationKind::kNone);
    per_value += log.mutation == MutationKind::kPerValue;
    block += log.mutation == MutationKind::kBlock;
    full += log.mutation == MutationKind::kFullArray;
  }
  EXPECT_NEAR(cross / 1e4, 0.30, 0.015);
  EXPECT_NEAR(mut / 1e4, 0.50, 0.015);
  const double fired = per_value + block + full;
  EXPECT_NEAR(per_value / fired, 0.45, 0.03);
  EXPECT_NEAR(block / fired, 0.45, 0.03);
  EXPECT_NEAR(full / fired, 0.10, 0.02);
}

TEST(MakeOffspring, BothProbabilitiesZeroKeepsClone) {
  EvolutionConfig cfg;
  cfg.population = 10;
  cfg.p_crossover = 0.0;
  cfg.p_mutation = 0.0;
  const Population pop = ranked_population(10, 4);
  RngStream rng(17);
  OffspringLog log;
  const WeightVector child = make_offspring(pop, cfg, rng, &log);
  EXPECT_LT(child[0], 3.0);
  EXPECT_EQ(log.redraws, 0u);
}

TEST(RunGeneration, FlatFitnessKeepsBestAndElite) {
  EvolutionConfig cfg;
  cfg.population = 12;
  RngStream rng(18);
  const WeightVector w0 = random_genome(rng, 30);
  const FitnessFn flat = [](std::span<const double>) { return 0.5; };
  const EvolutionResult res = run_evolution(w0, flat, cfg, rng);
  ASSERT_EQ(res.trace.size(), cfg.generations + 1);
  for (const auto& rec : res.trace) EXPECT_EQ(rec.best_fitness, 0.5);
  // Under ties the unchanged genome is the oldest individual and stays elite.
  EXPECT_EQ(res.best, w0);
}

TEST(RunGeneration, AdversarialOffspringLeaveEliteUntouched) {
  EvolutionConfig cfg;
  cfg.population = 10;
  RngStream rng(19);
  const WeightVector w0 = random_genome(rng, 25);
  const FitnessFn only_w0 = [&](std::span<const double> w) {
    return std::equal(w.begin(), w.end(), w0.begin()) ? 1.0 : 0.0;
  };
  Population pop = init_population(w0, cfg, rng);
  evaluate_population(pop, only_w0, 1);
  for (int g = 0; g < 5; ++g) {
    pop = run_generation(pop, only_w0, cfg, rng);
    ASSERT_EQ(pop.members.size(), 10u);
    EXPECT_EQ(pop.generation, static_cast<std::size_t>(g + 1));
    EXPECT_EQ(pop.members[pop.best_index()].genome, w0);
    EXPECT_EQ(pop.members.back().genome, w0);
  }
}

TEST(RunGeneration, ConvergesOnDistanceToyBetterThanStart) {
  EvolutionConfig cfg;
  cfg.population = 20;
  cfg.generations = 30;
  RngStream rng(20);
  const WeightVector target = random_genome(rng, 20);
  const FitnessFn fit = [&](std::span<const double> w) { return neg_distance(w, target); };
  const EvolutionResult res = run_evolution(WeightVector(20, 0.0), fit, cfg, rng);
  EXPECT_GT(res.trace.back().best_fitness, res.trace.front().best_fitness);
  for (std::size_t g = 1; g < res.trace.size(); ++g)
    EXPECT_GE(res.trace[g].best_fitness, res.trace[g - 1].best_fitness);
  EXPECT_DOUBLE_EQ(res.best_fitness, fit(res.best));
}

TEST(RunGeneration, FitnessErrorsCarryTheMemberIndex) {
  EvolutionConfig cfg;
  cfg.population = 6;
  RngStream rng(21);
  int calls = 0;
  const FitnessFn fails_third = [&](std::span<const double>) {
    if (++calls == 3) throw std::runtime_error("boom");
    return 0.0;
  };
  try {
    run_evolution(WeightVector(4, 1.0), fails_third, cfg, rng);
    FAIL() << "expected FitnessError";
  } catch (const FitnessError& e) {
    EXPECT_EQ(e.index(), 2u);
  }
  const FitnessFn nan = [](std::span<const double>) { return NAN; };
  EXPECT_THROW(run_evolution(WeightVector(4, 1.0), nan, cfg, rng), FitnessError);
}

TEST(RunEvolution, ZeroGenerationsKeepsW0WhenPerturbationsAreWorse) {
  EvolutionConfig cfg;
  cfg.population = 15;
  cfg.generations = 0;
  const WeightVector w0(10, 0.25);
  const FitnessFn fit = [&](std::span<const double> w) { return neg_distance(w, w0); };
  RngStream rng(22);
  const EvolutionResult res = run_evolution(w0, fit, cfg, rng);
  EXPECT_EQ(res.trace.size(), 1u);
  EXPECT_EQ(res.best, w0);
}

TEST(RunEvolution, DeterministicRegardlessOfThreadCount) {
  EvolutionConfig cfg;
  cfg.population = 30;
  cfg.generations = 4;
  RngStream seed_rng(23);
  const WeightVector target = random_genome(seed_rng, 60);
  const FitnessFn fit = [&](std::span<const double> w) { return neg_distance(w, target); };
  RngStream a(99);
  const EvolutionResult serial = run_evolution(WeightVector(60, 0.0), fit, cfg, a);
  cfg.threads = 4;
  RngStream b(99);
  const EvolutionResult parallel = run_evolution(WeightVector(60, 0.0), fit, cfg, b);
  EXPECT_EQ(serial.best, parallel.best);
  ASSERT_EQ(serial.trace.size(), parallel.trace.size());
  for (std::size_t g = 0; g < serial.trace.size(); ++g) {
    EXPECT_EQ(serial.trace[g].best_fitness, parallel.trace[g].best_fitness);
    EXPECT_EQ(serial.trace[g].mean_fitness, parallel.trace[g].mean_fitness);
  }
}

TEST(RunEvolution, ZeroMagnitudeWithoutCrossoverOnlyCopiesPoolMembers) {
  EvolutionConfig cfg;
  cfg.population = 10;
  cfg.mag_init = 0.0;
  cfg.mag_op = 0.0;
  cfg.p_crossover = 0.0;
  RngStream rng(24);
  const WeightVector w0 = random_genome(rng, 12);
  const FitnessFn fit = [](std::span<const double> w) { return w[0]; };
  Population pop = init_population(w0, cfg, rng);
  evaluate_population(pop, fit, 1);
  for (int g = 0; g < 4; ++g) {
    pop = run_generation(pop, fit, cfg, rng);
    for (const auto& m : pop.members) ASSERT_EQ(m.genome, w0);
  }
}

TEST(BlockRange, PartitionsWithRemainderInLastBlock) {
  EXPECT_EQ(block_range(10, 3, 0).end, 3u);
  EXPECT_EQ(block_range(10, 3, 2).begin, 6u);
  EXPECT_EQ(block_range(10, 3, 2).end, 10u);
  EXPECT_THROW(block_range(3, 4, 0), ConfigError);
}

TEST(MakeOffspring, MoreParentsThanGenomeValues) {
  EvolutionConfig cfg;
  cfg.population = 10;
  cfg.parents = 3;
  cfg.parent_fraction = 1.0;
  cfg.p_crossover = 1.0;
  cfg.p_mutation = 0.0;
  RngStream rng(8);
  Population pop = init_population(WeightVector{0.5, -0.5}, cfg, rng);
  evaluate_population(pop, [](std::span<const double> w) { return w[0]; }, 1);
  const WeightVector child = make_offspring(pop, cfg, rng);
  EXPECT_EQ(child.size(), 2u);
}
