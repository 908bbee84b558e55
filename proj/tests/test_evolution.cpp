#include <doctest.h>

#include <array>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <algorithm>

#include <json.hpp>

#include "gadm/evolution.hpp"
#include "support.hpp"

using namespace gadm;
using namespace gadm::ga;

namespace {

/// Replays a fixed normal draw and a fixed uniform, to force perturb's branches.
struct ScriptedRng {
  double normal = 0.0;
  double u = 0.0;
  double std_normal() { return normal; }
  double uniform() { return u; }
};

double sphere(const dsl::ParameterVector& x, std::span<const double> target)
{
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - target[i]) * (x[i] - target[i]);
  return -d;
}

Individual with_fitness(std::vector<double> genome, double f)
{
  return {dsl::ParameterVector(std::move(genome)), f};
}

}  // namespace

TEST_CASE("config validation")
{
  GaConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.n_mut = cfg.n_pop;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.k = 0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.k = cfg.n_pop + 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.sigma = 0.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = {};
  cfg.mu_mut = 1.5;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("perturb")
{
  SUBCASE("zero draw is a fixed point on both branches")
  {
    for (double theta : {0.0, 0.1, 0.5, 0.9, 1.0}) {
      ScriptedRng left{0.0, 0.0};
      ScriptedRng right{0.0, 0.999};
      CHECK(perturb(theta, 2.0, left) == theta);
      CHECK(perturb(theta, 2.0, right) == theta);
    }
  }
  SUBCASE("branch formulas")
  {
    ScriptedRng left{1.0, 0.0};  // u < theta: move toward 0
    CHECK(perturb(0.4, 2.0, left) == doctest::Approx(-(0.5) * 0.4 + 0.4));
    ScriptedRng right{-1.0, 0.99};  // |g| = 1, move toward 1
    CHECK(perturb(0.4, 2.0, right) == doctest::Approx(0.5 * 0.6 + 0.4));
  }
  SUBCASE("rejections give up after the retry cap")
  {
    ScriptedRng far{100.0, 0.0};
    CHECK(perturb(0.3, 2.0, far) == 0.3);
  }
  SUBCASE("left-branch share matches theta")
  {
    RandomStream rng(7);
    const int n = 100000;
    int below = 0;
    for (int i = 0; i < n; ++i) {
      const double v = perturb(0.3, 2.0, rng);
      REQUIRE(v >= 0.0);
      REQUIRE(v <= 1.0);
      if (v < 0.3) ++below;
    }
    CHECK(std::abs(below / double(n) - 0.3) < 0.01);
  }
  SUBCASE("theta 0 stays in range")
  {
    RandomStream rng(8);
    for (int i = 0; i < 10000; ++i) {
      const double v = perturb(0.0, 2.0, rng);
      CHECK((v >= 0.0 && v <= 1.0));
    }
  }
}

TEST_CASE("mutate")
{
  RandomStream rng(3);
  const Individual ind = with_fitness({0.2, 0.5, 0.8}, 1.0);
  const auto same = mutate(ind, 2.0, 0.0, rng);
  CHECK(same.genome == ind.genome);
  CHECK_FALSE(same.fitness.has_value());

  int changed = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto m = mutate(ind, 2.0, 1.0, rng);
    for (std::size_t g = 0; g < 3; ++g) {
      CHECK((m.genome[g] >= 0.0 && m.genome[g] <= 1.0));
      if (m.genome[g] != ind.genome[g]) ++changed;
    }
  }
  CHECK(changed == 3000);

  // Mode of the perturbed gene sits at the original value.
  std::array<int, 20> hist{};
  const Individual half = with_fitness({0.5, 0.5}, 0.0);
  for (int i = 0; i < 100000; ++i) {
    const auto m = mutate(half, 2.0, 1.0, rng);
    hist[std::min<std::size_t>(19, static_cast<std::size_t>(m.genome[0] * 20))]++;
  }
  const auto mode = std::max_element(hist.begin(), hist.end()) - hist.begin();
  CHECK((mode == 9 || mode == 10));
}

TEST_CASE("tournament selection")
{
  std::vector<Individual> pop{with_fitness({0.1}, 1.0), with_fitness({0.2}, 2.0), with_fitness({0.3}, 3.0)};
  RandomStream rng(5);

  SUBCASE("full tournament returns the fittest")
  {
    for (int i = 0; i < 100; ++i) CHECK(*tournament_select(pop, 3, rng).fitness == 3.0);
  }
  SUBCASE("singleton tournament is uniform")
  {
    std::array<int, 3> counts{};
    for (int i = 0; i < 30000; ++i) counts[static_cast<std::size_t>(*tournament_select(pop, 1, rng).fitness) - 1]++;
    for (int c : counts) CHECK(std::abs(c / 30000.0 - 1.0 / 3.0) < 0.015);
  }
  SUBCASE("pairs pick the fittest two thirds of the time")
  {
    int best = 0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) best += *tournament_select(pop, 2, rng).fitness == 3.0;
    CHECK(std::abs(best / double(n) - 2.0 / 3.0) < 0.01);
  }
}

TEST_CASE("crossover")
{
  RandomStream rng(9);
  const auto x = with_fitness({0.1, 0.2, 0.3, 0.4}, 1.0);
  CHECK(crossover(x, x, rng).genome == x.genome);
  CHECK(crossover(x, x, rng, CrossoverKind::SinglePoint).genome == x.genome);

  const auto zeros = with_fitness({0, 0, 0, 0}, 0.0);
  const auto ones = with_fitness({1, 1, 1, 1}, 0.0);
  std::array<double, 4> sums{};
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const auto child = crossover(zeros, ones, rng);
    REQUIRE(child.genome.size() == 4);
    CHECK_FALSE(child.fitness.has_value());
    for (std::size_t g = 0; g < 4; ++g) {
      REQUIRE((child.genome[g] == 0.0 || child.genome[g] == 1.0));
      sums[g] += child.genome[g];
    }
  }
  for (double s : sums) CHECK(std::abs(s / n - 0.5) < 0.01);

  for (int i = 0; i < 200; ++i) {
    const auto child = crossover(zeros, ones, rng, CrossoverKind::SinglePoint);
    // A single cut: zeros then ones, or ones then zeros.
    int switches = 0;
    for (std::size_t g = 1; g < 4; ++g) switches += child.genome[g] != child.genome[g - 1];
    CHECK(switches <= 1);
  }

  CHECK_THROWS_AS(crossover(x, with_fitness({0.1}, 0.0), rng), GenomeLengthMismatch);
}

TEST_CASE("run_ga on a quadratic bowl")
{
  RandomStream target_rng(99);
  std::vector<double> target(4);
  for (double& t : target) t = target_rng.uniform();
  GaConfig cfg;
  cfg.seed = 42;
  cfg.convergence_window = 0;
  std::atomic<std::size_t> calls{0};
  const auto result = run_ga(
      [&](const dsl::ParameterVector& x, std::uint64_t) {
        ++calls;
        return sphere(x, target);
      },
      4, cfg);
  CHECK(*result.best.fitness >= -1e-2);
  CHECK(result.trace.size() == 31);
  CHECK(testing::elitism_violations(result.trace) == 0);
  // Elites are never re-evaluated: one initial population plus n_pop - 1 per generation.
  CHECK(calls.load() == cfg.n_pop + cfg.t_max * (cfg.n_pop - 1));

  SUBCASE("determinism")
  {
    const auto again = run_ga([&](const dsl::ParameterVector& x, std::uint64_t) { return sphere(x, target); }, 4, cfg);
    CHECK(again.best.genome == result.best.genome);
    REQUIRE(again.trace.size() == result.trace.size());
    for (std::size_t g = 0; g < again.trace.size(); ++g) {
      CHECK(again.trace[g].best == result.trace[g].best);
      CHECK(again.trace[g].mean == result.trace[g].mean);
    }
  }
}

TEST_CASE("run_ga degenerate and stopping cases")
{
  SUBCASE("population of one keeps the elite")
  {
    GaConfig cfg;
    cfg.n_pop = 1;
    cfg.n_mut = 0;
    cfg.k = 1;
    cfg.convergence_window = 0;
    const auto r = run_ga([](const dsl::ParameterVector& x, std::uint64_t) { return x[0]; }, 2, cfg);
    for (const auto& g : r.trace) CHECK(g.best == r.trace.front().best);
  }
  SUBCASE("convergence window stops early")
  {
    GaConfig cfg;
    cfg.n_pop = 10;
    cfg.convergence_window = 3;
    const auto r = run_ga([](const dsl::ParameterVector&, std::uint64_t) { return 1.0; }, 3, cfg);
    CHECK(r.trace.size() == 4);
  }
  SUBCASE("evaluation seeds depend on generation and index")
  {
    GaConfig cfg;
    cfg.n_pop = 6;
    cfg.n_mut = 2;
    cfg.t_max = 2;
    cfg.convergence_window = 0;
    std::vector<std::uint64_t> seeds;
    std::mutex m;
    run_ga(
        [&](const dsl::ParameterVector&, std::uint64_t s) {
          std::lock_guard lock(m);
          seeds.push_back(s);
          return 0.0;
        },
        2, cfg);
    std::sort(seeds.begin(), seeds.end());
    CHECK(std::adjacent_find(seeds.begin(), seeds.end()) == seeds.end());
  }
  SUBCASE("fitness failures carry their position")
  {
    GaConfig cfg;
    cfg.n_pop = 5;
    cfg.n_mut = 1;
    try {
      run_ga([](const dsl::ParameterVector&, std::uint64_t) -> double { throw std::runtime_error("boom"); }, 2, cfg);
      FAIL("no exception");
    } catch (const FitnessEvaluationFailure& e) {
      CHECK(e.generation() == 0);
    }
  }
  SUBCASE("non-finite fitness is rejected")
  {
    GaConfig cfg;
    cfg.n_pop = 5;
    cfg.n_mut = 1;
    CHECK_THROWS_AS(run_ga([](const dsl::ParameterVector&, std::uint64_t) { return std::nan(""); }, 2, cfg),
                    FitnessEvaluationFailure);
  }
}

TEST_CASE("single-point crossover config runs")
{
  GaConfig cfg;
  cfg.n_pop = 20;
  cfg.t_max = 10;
  cfg.convergence_window = 0;
  cfg.crossover = CrossoverKind::SinglePoint;
  const std::vector<double> target{0.2, 0.9, 0.4};
  const auto r = run_ga([&](const dsl::ParameterVector& x, std::uint64_t) { return sphere(x, target); }, 3, cfg);
  CHECK(testing::elitism_violations(r.trace) == 0);
  for (double g : r.best.genome.values()) CHECK((g >= 0.0 && g <= 1.0));
}

TEST_CASE("config and trace serialization")
{
  GaConfig cfg;
  cfg.n_pop = 37;
  cfg.sigma = 1.5;
  cfg.seed = 123456789012345ULL;
  cfg.crossover = CrossoverKind::SinglePoint;
  const nlohmann::json j = cfg;
  const auto back = j.get<GaConfig>();
  CHECK(back.n_pop == 37);
  CHECK(back.sigma == 1.5);
  CHECK(back.seed == cfg.seed);
  CHECK(back.crossover == CrossoverKind::SinglePoint);
  CHECK(back.convergence_window == cfg.convergence_window);

  const std::vector<GenerationStats> trace{{0, 1.0, 0.5, 0.25}, {1, 2.0, 1.5, 0.5}};
  const auto csv = trace_to_csv(trace);
  CHECK(csv.rfind("generation,best_fitness,mean_fitness,std_fitness\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}
