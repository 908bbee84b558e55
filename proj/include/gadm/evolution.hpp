#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "gadm/policy_dsl.hpp"
#include "gadm/random.hpp"

namespace gadm::ga {

using dsl::ParameterVector;

struct Individual {
  ParameterVector genome;
  std::optional<double> fitness;  // cached once evaluated
};

enum class CrossoverKind { Uniform, SinglePoint };

struct GaConfig {
  std::size_t n_pop = 100;
  std::size_t n_mut = 5;
  std::size_t t_max = 30;
  std::size_t k = 3;
  double sigma = 2.0;
  double mu_mut = 0.25;
  std::uint64_t seed = 0;
  /// Stop once the best fitness is unchanged for this many generations; 0 disables.
  std::size_t convergence_window = 10;
  CrossoverKind crossover = CrossoverKind::Uniform;

  /// Throws InvalidConfig.
  void validate() const;
};

class InvalidConfig : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class GenomeLengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class FitnessEvaluationFailure : public std::runtime_error {
 public:
  FitnessEvaluationFailure(std::size_t generation, std::size_t individual, const std::string& what);
  std::size_t generation() const noexcept { return generation_; }
  std::size_t individual() const noexcept { return individual_; }

 private:
  std::size_t generation_;
  std::size_t individual_;
};

/// Higher is better. Must be reproducible for a fixed (genome, eval_seed).
using FitnessFunction = std::function<double(const ParameterVector& genome, std::uint64_t eval_seed)>;

struct GenerationStats {
  std::size_t generation = 0;
  double best = 0.0;
  double mean = 0.0;
  double std = 0.0;
};

struct GaResult {
  Individual best;
  std::vector<GenerationStats> trace;
};

/// Elitist GA over [0,1]^genome_length. Each generation keeps the previous
/// fittest, adds n_mut mutants of it, and fills the rest with mutated
/// crossover children of tournament winners. Individuals of generation g are
/// evaluated with seed derive_seed(cfg.seed, g, i), possibly in parallel.
GaResult run_ga(const FitnessFunction& fitness, std::size_t genome_length, const GaConfig& cfg);

/// Skewed single-gene perturbation: moves theta toward 0 with probability
/// theta, toward 1 otherwise, by |N(0,1)|/sigma of the available room.
/// Out-of-range draws are redrawn; after 64 rejections theta is returned.
/// `Rng` provides uniform() on [0,1) and std_normal().
template <class Rng>
double perturb(double theta, double sigma, Rng& rng)
{
  constexpr int kMaxRetries = 64;
  for (int attempt = 0; attempt <= kMaxRetries; ++attempt) {
    const double g = std::fabs(rng.std_normal());
    const double v = rng.uniform() < theta ? -(g / sigma) * theta + theta
                                           : (g / sigma) * (1.0 - theta) + theta;
    if (v >= 0.0 && v <= 1.0) {
      return v;
    }
  }
  return theta;
}

/// Each gene is perturbed with probability mu_mut. The result carries no fitness.
Individual mutate(const Individual& ind, double sigma, double mu_mut, RandomStream& rng);

/// Fittest member of a uniformly drawn k-subset (without replacement). Ties
/// go to the lower population index. All members must have a fitness.
const Individual& tournament_select(std::span<const Individual> pop, std::size_t k, RandomStream& rng);

Individual crossover(const Individual& a, const Individual& b, RandomStream& rng,
                     CrossoverKind kind = CrossoverKind::Uniform);

/// generation,best_fitness,mean_fitness,std_fitness
std::string trace_to_csv(std::span<const GenerationStats> trace);

void to_json(nlohmann::json& j, const GaConfig& cfg);
void from_json(const nlohmann::json& j, GaConfig& cfg);

}  // namespace gadm::ga
