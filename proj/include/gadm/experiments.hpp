#pragma once

// Experiment protocols shared by the command-line tool and the acceptance suite.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "gadm/batch_rl.hpp"
#include "gadm/corpus_io.hpp"
#include "gadm/evolution.hpp"
#include "gadm/simulator.hpp"

namespace gadm::experiments {

struct SimTrainConfig {
  ga::GaConfig ga;
  std::size_t fitness_episodes = 100;
};

/// GA over the template's parameters with the simulation fitness.
ga::GaResult train_in_simulation(std::shared_ptr<const dsl::TemplateAst> ast, const sim::SimulationSetup& setup,
                                 const SimTrainConfig& cfg);

struct NoiseSweepRow {
  double error_rate = 0.0;
  sim::SimulationMetrics metrics;
};

std::vector<NoiseSweepRow> noise_sweep(const dialog::SystemPolicy& policy, const sim::SimulationSetup& setup,
                                       std::span<const double> levels, std::size_t episodes, std::uint64_t seed);

/// error_rate,mean_reward,std_reward,mean_length,completion_rate
std::string noise_sweep_csv(std::span<const NoiseSweepRow> rows);

/// first, first+step, ... up to last (inclusive, tolerant to rounding).
std::vector<double> level_range(double first, double last, double step);

struct PopSweepRow {
  std::size_t pop = 0;
  corpus::MeanStd train;  // final best training fitness over seeds
  corpus::MeanStd test;   // mixed-noise test reward over seeds
};

struct PopSweepConfig {
  SimTrainConfig train;  // ga.n_pop and ga.seed are overridden per run
  std::size_t seeds = 5;
  std::uint64_t seed = 0;
  std::size_t test_episodes = 1000;
};

std::vector<PopSweepRow> pop_sweep(std::shared_ptr<const dsl::TemplateAst> ast, const sim::SimulationSetup& setup,
                                   std::span<const std::size_t> pops, const PopSweepConfig& cfg);

/// pop,train_mean,train_std,test_mean,test_std
std::string pop_sweep_csv(std::span<const PopSweepRow> rows);

struct CorpusExperimentConfig {
  ga::GaConfig ga;
  rl::FittedQConfig fqi;
  ml::ForestConfig classifier;
  rl::QValConfig qval;
  corpus::ResamplePlan plan;
  bool evaluate_train = true;  // also score every DM on its training half
};

inline const std::vector<std::string> kCorpusDmNames{"GA-QVal", "GA-NPoints", "SL-Original", "SL-MaxQ",
                                                     "ThresholdedQ"};

struct CorpusRound {
  std::vector<double> train_scores;  // per DM, in kCorpusDmNames order; empty if not evaluated
  std::vector<double> test_scores;
  dsl::ParameterVector qval_params;
  dsl::ParameterVector npoints_params;
  double qval_fitness = 0.0;
  double npoints_fitness = 0.0;
  std::size_t train_states = 0;
  std::vector<ga::GenerationStats> qval_trace;
  std::vector<ga::GenerationStats> npoints_trace;
};

struct CorpusExperimentResult {
  std::vector<CorpusRound> rounds;

  corpus::MeanStd train_summary(std::size_t dm) const;
  corpus::MeanStd test_summary(std::size_t dm) const;
};

/// For each resampling round: fit Q^ and P^ on the training half, train the
/// template with both corpus fitness functions, build the comparison DMs,
/// and score every DM with the on-corpus evaluator. Fails before any training
/// when the template carries structural parameters.
CorpusExperimentResult run_corpus_experiment(std::shared_ptr<const dsl::TemplateAst> ast,
                                             const corpus::Corpus& corpus, const CorpusExperimentConfig& cfg,
                                             const std::function<void(std::size_t round)>& on_round = {});

/// dm,train_mean,train_std,test_mean,test_std
std::string corpus_results_csv(const CorpusExperimentResult& result);

/// round,dm,train_score,test_score
std::string corpus_rounds_csv(const CorpusExperimentResult& result);

}  // namespace gadm::experiments
