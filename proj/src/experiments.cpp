#include "gadm/experiments.hpp"

#include <cmath>
#include <cstdio>

namespace gadm::experiments {

namespace {

std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

}  // namespace

ga::GaResult train_in_simulation(std::shared_ptr<const dsl::TemplateAst> ast, const sim::SimulationSetup& setup,
                                 const SimTrainConfig& cfg)
{
  if (cfg.fitness_episodes == 0) throw std::invalid_argument("fitness needs at least one episode");
  auto fitness = [&](const dsl::ParameterVector& genome, std::uint64_t eval_seed) {
    return sim::fitness_simulation(ast, genome, setup, cfg.fitness_episodes, eval_seed);
  };
  return ga::run_ga(fitness, ast->param_count, cfg.ga);
}

std::vector<NoiseSweepRow> noise_sweep(const dialog::SystemPolicy& policy, const sim::SimulationSetup& setup,
                                       std::span<const double> levels, std::size_t episodes, std::uint64_t seed)
{
  std::vector<NoiseSweepRow> rows;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    rows.push_back({levels[i], sim::evaluate_in_simulation(policy, setup, episodes, derive_seed(seed, i), levels[i])});
  }
  return rows;
}

std::string noise_sweep_csv(std::span<const NoiseSweepRow> rows)
{
  std::string out = "error_rate,mean_reward,std_reward,mean_length,completion_rate\n";
  for (const auto& r : rows) {
    out += fmt(r.error_rate) + ',' + fmt(r.metrics.mean_return) + ',' + fmt(r.metrics.std_return) + ',' +
           fmt(r.metrics.mean_length) + ',' + fmt(r.metrics.completion_rate) + '\n';
  }
  return out;
}

std::vector<double> level_range(double first, double last, double step)
{
  if (!(step > 0.0)) throw std::invalid_argument("noise step must be positive");
  if (last < first) throw std::invalid_argument("noise range is empty");
  std::vector<double> levels;
  const auto n = static_cast<std::size_t>(std::floor((last - first) / step + 1e-9));
  for (std::size_t i = 0; i <= n; ++i) {
    // Round to 12 decimals so 0.1 * 3 prints as 0.3.
    levels.push_back(std::round((first + static_cast<double>(i) * step) * 1e12) / 1e12);
  }
  return levels;
}

std::vector<PopSweepRow> pop_sweep(std::shared_ptr<const dsl::TemplateAst> ast, const sim::SimulationSetup& setup,
                                   std::span<const std::size_t> pops, const PopSweepConfig& cfg)
{
  if (cfg.seeds == 0) throw std::invalid_argument("pop sweep needs at least one seed");
  const auto names = dialog::feature_names(setup.ontology);
  std::vector<PopSweepRow> rows;
  for (const std::size_t pop : pops) {
    std::vector<double> train;
    std::vector<double> test;
    for (std::size_t s = 0; s < cfg.seeds; ++s) {
      SimTrainConfig run = cfg.train;
      run.ga.n_pop = pop;
      run.ga.n_mut = std::min(run.ga.n_mut, pop - 1);
      run.ga.k = std::min(run.ga.k, pop);
      run.ga.seed = derive_seed(cfg.seed, s);
      const auto result = train_in_simulation(ast, setup, run);
      train.push_back(*result.best.fitness);
      const auto policy = dialog::template_policy(dsl::Policy(ast, result.best.genome, names));
      test.push_back(
          sim::evaluate_in_simulation(policy, setup, cfg.test_episodes, derive_seed(cfg.seed, s, 0x7E57)).mean_return);
    }
    rows.push_back({pop, corpus::summarize(train), corpus::summarize(test)});
  }
  return rows;
}

std::string pop_sweep_csv(std::span<const PopSweepRow> rows)
{
  std::string out = "pop,train_mean,train_std,test_mean,test_std\n";
  for (const auto& r : rows) {
    out += std::to_string(r.pop) + ',' + fmt(r.train.mean) + ',' + fmt(r.train.std) + ',' + fmt(r.test.mean) + ',' +
           fmt(r.test.std) + '\n';
  }
  return out;
}

corpus::MeanStd CorpusExperimentResult::train_summary(std::size_t dm) const
{
  std::vector<double> v;
  for (const auto& r : rounds) {
    if (dm < r.train_scores.size()) v.push_back(r.train_scores[dm]);
  }
  return corpus::summarize(v);
}

corpus::MeanStd CorpusExperimentResult::test_summary(std::size_t dm) const
{
  std::vector<double> v;
  for (const auto& r : rounds) v.push_back(r.test_scores.at(dm));
  return corpus::summarize(v);
}

CorpusExperimentResult run_corpus_experiment(std::shared_ptr<const dsl::TemplateAst> ast,
                                             const corpus::Corpus& corpus, const CorpusExperimentConfig& cfg,
                                             const std::function<void(std::size_t round)>& on_round)
{
  rl::require_no_structural_params(*ast);
  cfg.ga.validate();
  cfg.fqi.validate();
  cfg.qval.validate();
  const auto schema = rl::schema_of(corpus.header);
  // Binding once up front surfaces unknown variables or actions before any training.
  rl::corpus_policy(ast, dsl::ParameterVector(std::vector<double>(ast->param_count, 0.5)), schema);

  const dialog::FeatureReward feature_reward(corpus.header.feature_names, corpus.header.reward_config);
  const rl::RewardFunction reward = [&](std::span<const double> s, std::size_t a, std::span<const double> sn) {
    return feature_reward(s, a, sn);
  };

  CorpusExperimentResult result;
  const auto splits = corpus::resample_splits(corpus, cfg.plan);
  for (std::size_t r = 0; r < splits.size(); ++r) {
    const auto train = splits[r].train.transitions();
    const auto test = splits[r].test.transitions();

    rl::FittedQConfig fqi = cfg.fqi;
    fqi.seed = derive_seed(cfg.fqi.seed, r);
    auto q = std::make_shared<const rl::QModel>(rl::fitted_q_iteration(train, schema, reward, fqi).model);
    ml::ForestConfig clf_cfg = cfg.classifier;
    clf_cfg.seed = derive_seed(cfg.classifier.seed, r);
    auto clf = std::make_shared<const rl::ActionClassifier>(rl::ActionClassifier::fit(train, schema, clf_cfg));
    const auto table = rl::build_fitness_table(train, *q, clf.get());

    CorpusRound round;
    round.train_states = table.size();
    ga::GaConfig ga_cfg = cfg.ga;
    ga_cfg.seed = derive_seed(cfg.ga.seed, r, 1);
    const auto qval = ga::run_ga(
        [&](const dsl::ParameterVector& p, std::uint64_t) { return rl::fitness_qval(ast, p, table, cfg.qval); },
        ast->param_count, ga_cfg);
    ga_cfg.seed = derive_seed(cfg.ga.seed, r, 2);
    const auto npoints = ga::run_ga(
        [&](const dsl::ParameterVector& p, std::uint64_t) { return rl::fitness_npoints(ast, p, table); },
        ast->param_count, ga_cfg);
    round.qval_params = qval.best.genome;
    round.npoints_params = npoints.best.genome;
    round.qval_fitness = *qval.best.fitness;
    round.npoints_fitness = *npoints.best.fitness;
    round.qval_trace = qval.trace;
    round.npoints_trace = npoints.trace;

    const auto dms = rl::build_comparison_dms(q, clf, cfg.qval.delta);
    const std::vector<rl::CorpusPolicy> policies{rl::corpus_policy(ast, round.qval_params, schema),
                                                 rl::corpus_policy(ast, round.npoints_params, schema),
                                                 dms.sl_original, dms.sl_max_q, dms.thresholded_q};
    rl::FittedQConfig eval = cfg.fqi;
    eval.seed = derive_seed(cfg.fqi.seed, r, 3);
    for (const auto& policy : policies) {
      round.test_scores.push_back(rl::evaluate_policy_on_corpus(policy, test, schema, reward, eval));
      if (cfg.evaluate_train) {
        round.train_scores.push_back(rl::evaluate_policy_on_corpus(policy, train, schema, reward, eval));
      }
    }
    result.rounds.push_back(std::move(round));
    if (on_round) on_round(r);
  }
  return result;
}

std::string corpus_results_csv(const CorpusExperimentResult& result)
{
  std::string out = "dm,train_mean,train_std,test_mean,test_std\n";
  for (std::size_t d = 0; d < kCorpusDmNames.size(); ++d) {
    const auto train = result.train_summary(d);
    const auto test = result.test_summary(d);
    out += kCorpusDmNames[d] + ',' + fmt(train.mean) + ',' + fmt(train.std) + ',' + fmt(test.mean) + ',' +
           fmt(test.std) + '\n';
  }
  return out;
}

std::string corpus_rounds_csv(const CorpusExperimentResult& result)
{
  std::string out = "round,dm,train_score,test_score\n";
  for (std::size_t r = 0; r < result.rounds.size(); ++r) {
    const auto& round = result.rounds[r];
    for (std::size_t d = 0; d < kCorpusDmNames.size(); ++d) {
      const std::string train = d < round.train_scores.size() ? fmt(round.train_scores[d]) : "";
      out += std::to_string(r) + ',' + kCorpusDmNames[d] + ',' + train + ',' + fmt(round.test_scores[d]) + '\n';
    }
  }
  return out;
}

}  // namespace gadm::experiments
