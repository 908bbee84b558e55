#include "gadm/evolution.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "gadm/parallel.hpp"

namespace gadm::ga {

void GaConfig::validate() const
{
  if (n_pop == 0) throw InvalidConfig("n_pop must be at least 1");
  if (n_mut + 1 > n_pop) throw InvalidConfig("n_mut + 1 must not exceed n_pop");
  if (k < 1 || k > n_pop) throw InvalidConfig("tournament size k must lie in [1, n_pop]");
  if (!(sigma > 0.0)) throw InvalidConfig("sigma must be positive");
  if (!(mu_mut >= 0.0 && mu_mut <= 1.0)) throw InvalidConfig("mu_mut must lie in [0, 1]");
}

FitnessEvaluationFailure::FitnessEvaluationFailure(std::size_t generation, std::size_t individual,
                                                   const std::string& what)
    : std::runtime_error("fitness evaluation failed at generation " + std::to_string(generation) +
                         ", individual " + std::to_string(individual) + ": " + what),
      generation_(generation),
      individual_(individual)
{
}

Individual mutate(const Individual& ind, double sigma, double mu_mut, RandomStream& rng)
{
  std::vector<double> genes(ind.genome.values().begin(), ind.genome.values().end());
  for (double& g : genes) {
    if (rng.uniform() < mu_mut) {
      g = perturb(g, sigma, rng);
    }
  }
  return {ParameterVector(std::move(genes)), std::nullopt};
}

const Individual& tournament_select(std::span<const Individual> pop, std::size_t k, RandomStream& rng)
{
  if (k < 1 || k > pop.size()) {
    throw std::invalid_argument("tournament size must lie in [1, population size]");
  }
  // Partial Fisher-Yates: the first k slots become the sampled subset.
  std::vector<std::size_t> idx(pop.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::size_t best = pop.size();
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.index(pop.size() - i);
    std::swap(idx[i], idx[j]);
    const std::size_t cand = idx[i];
    const double f = pop[cand].fitness.value();
    if (best == pop.size() || f > *pop[best].fitness || (f == *pop[best].fitness && cand < best)) {
      best = cand;
    }
  }
  return pop[best];
}

Individual crossover(const Individual& a, const Individual& b, RandomStream& rng, CrossoverKind kind)
{
  const std::size_t n = a.genome.size();
  if (b.genome.size() != n) {
    throw GenomeLengthMismatch("crossover parents have lengths " + std::to_string(n) + " and " +
                               std::to_string(b.genome.size()));
  }
  std::vector<double> child(n);
  if (kind == CrossoverKind::Uniform) {
    for (std::size_t i = 0; i < n; ++i) {
      child[i] = rng.uniform() < 0.5 ? a.genome[i] : b.genome[i];
    }
  } else {
    const std::size_t cut = n == 0 ? 0 : rng.index(n + 1);
    for (std::size_t i = 0; i < n; ++i) {
      child[i] = i < cut ? a.genome[i] : b.genome[i];
    }
  }
  return {ParameterVector(std::move(child)), std::nullopt};
}

namespace {

std::size_t fittest_index(std::span<const Individual> pop)
{
  std::size_t best = 0;
  for (std::size_t i = 1; i < pop.size(); ++i) {
    if (*pop[i].fitness > *pop[best].fitness) {
      best = i;
    }
  }
  return best;
}

void evaluate(std::vector<Individual>& pop, const FitnessFunction& fitness, std::size_t generation,
              std::uint64_t master_seed)
{
  parallel_for(pop.size(), [&](std::size_t i) {
    if (pop[i].fitness) {
      return;
    }
    double f = 0.0;
    try {
      f = fitness(pop[i].genome, derive_seed(master_seed, generation, i));
    } catch (const std::exception& e) {
      throw FitnessEvaluationFailure(generation, i, e.what());
    }
    if (std::isnan(f)) {
      throw FitnessEvaluationFailure(generation, i, "fitness is NaN");
    }
    pop[i].fitness = f;
  });
}

GenerationStats summarize(std::size_t generation, std::span<const Individual> pop)
{
  GenerationStats s;
  s.generation = generation;
  s.best = *pop[fittest_index(pop)].fitness;
  double sum = 0.0;
  for (const auto& ind : pop) sum += *ind.fitness;
  s.mean = sum / static_cast<double>(pop.size());
  double ss = 0.0;
  for (const auto& ind : pop) ss += (*ind.fitness - s.mean) * (*ind.fitness - s.mean);
  s.std = std::sqrt(ss / static_cast<double>(pop.size()));
  return s;
}

}  // namespace

GaResult run_ga(const FitnessFunction& fitness, std::size_t genome_length, const GaConfig& cfg)
{
  cfg.validate();
  RandomStream rng(derive_seed(cfg.seed, 0xB00C5EEDULL));

  std::vector<Individual> pop;
  pop.reserve(cfg.n_pop);
  for (std::size_t i = 0; i < cfg.n_pop; ++i) {
    std::vector<double> genes(genome_length);
    for (double& g : genes) g = rng.uniform();
    pop.push_back({ParameterVector(std::move(genes)), std::nullopt});
  }
  evaluate(pop, fitness, 0, cfg.seed);

  GaResult result;
  result.trace.push_back(summarize(0, pop));
  std::size_t unchanged = 0;

  for (std::size_t t = 1; t <= cfg.t_max; ++t) {
    if (cfg.convergence_window > 0 && unchanged >= cfg.convergence_window) {
      break;
    }
    const Individual& elite = pop[fittest_index(pop)];
    std::vector<Individual> next;
    next.reserve(cfg.n_pop);
    next.push_back(elite);
    for (std::size_t i = 0; i < cfg.n_mut; ++i) {
      next.push_back(mutate(elite, cfg.sigma, cfg.mu_mut, rng));
    }
    while (next.size() < cfg.n_pop) {
      const Individual& a = tournament_select(pop, cfg.k, rng);
      const Individual& b = tournament_select(pop, cfg.k, rng);
      next.push_back(mutate(crossover(a, b, rng, cfg.crossover), cfg.sigma, cfg.mu_mut, rng));
    }
    pop = std::move(next);
    evaluate(pop, fitness, t, cfg.seed);

    const GenerationStats stats = summarize(t, pop);
    unchanged = stats.best == result.trace.back().best ? unchanged + 1 : 0;
    result.trace.push_back(stats);
  }

  result.best = pop[fittest_index(pop)];
  return result;
}

std::string trace_to_csv(std::span<const GenerationStats> trace)
{
  std::ostringstream os;
  os << "generation,best_fitness,mean_fitness,std_fitness\n";
  char buf[128];
  for (const auto& s : trace) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", s.generation, s.best, s.mean, s.std);
    os << buf;
  }
  return os.str();
}

void to_json(nlohmann::json& j, const GaConfig& cfg)
{
  j = nlohmann::json{{"n_pop", cfg.n_pop},
                     {"n_mut", cfg.n_mut},
                     {"t_max", cfg.t_max},
                     {"k", cfg.k},
                     {"sigma", cfg.sigma},
                     {"mu_mut", cfg.mu_mut},
                     {"seed", cfg.seed},
                     {"convergence_window", cfg.convergence_window},
                     {"crossover", cfg.crossover == CrossoverKind::Uniform ? "uniform" : "single_point"}};
}

void from_json(const nlohmann::json& j, GaConfig& cfg)
{
  GaConfig out;
  out.n_pop = j.value("n_pop", out.n_pop);
  out.n_mut = j.value("n_mut", out.n_mut);
  out.t_max = j.value("t_max", out.t_max);
  out.k = j.value("k", out.k);
  out.sigma = j.value("sigma", out.sigma);
  out.mu_mut = j.value("mu_mut", out.mu_mut);
  out.seed = j.value("seed", out.seed);
  out.convergence_window = j.value("convergence_window", out.convergence_window);
  const std::string kind = j.value("crossover", std::string("uniform"));
  if (kind == "uniform") {
    out.crossover = CrossoverKind::Uniform;
  } else if (kind == "single_point") {
    out.crossover = CrossoverKind::SinglePoint;
  } else {
    throw InvalidConfig("unknown crossover kind '" + kind + "'");
  }
  cfg = out;
}

}  // namespace gadm::ga
