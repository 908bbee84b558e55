#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gadm/baselines.hpp"
#include "gadm/experiments.hpp"
#include "support.hpp"

using namespace gadm;
using namespace gadm::experiments;
namespace t = gadm::testing;

namespace {

std::shared_ptr<const dsl::TemplateAst> load_template(const std::string& name)
{
  std::ifstream in(std::filesystem::path(GADM_DATA_DIR) / name);
  std::stringstream ss;
  ss << in.rdbuf();
  return std::make_shared<const dsl::TemplateAst>(dsl::parse_template(ss.str()));
}

sim::SimulationSetup setup()
{
  return {sim::restaurant_ontology(), {}, {}, {}};
}

ga::GaConfig small_ga(std::uint64_t seed)
{
  ga::GaConfig g;
  g.n_pop = 8;
  g.n_mut = 2;
  g.t_max = 4;
  g.convergence_window = 0;
  g.seed = seed;
  return g;
}

std::size_t count_lines(const std::string& s)
{
  return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_CASE("noise levels")
{
  const auto l = level_range(0.0, 0.6, 0.1);
  REQUIRE(l.size() == 7);
  CHECK(l[3] == 0.3);
  CHECK(l.back() == 0.6);
  CHECK(level_range(0.2, 0.2, 0.1).size() == 1);
  CHECK_THROWS(level_range(0.0, 0.5, 0.0));
  CHECK_THROWS(level_range(0.5, 0.1, 0.1));
}

TEST_CASE("simulation training and sweeps")
{
  const auto ast = load_template("restaurant.gadm");
  const SimTrainConfig cfg{small_ga(3), 10};
  const auto result = train_in_simulation(ast, setup(), cfg);
  CHECK(result.trace.size() == 5);
  CHECK(t::elitism_violations(result.trace) == 0);
  CHECK(result.best.genome.size() == ast->param_count);
  const auto again = train_in_simulation(ast, setup(), cfg);
  CHECK(again.best.genome == result.best.genome);

  const auto names = dialog::feature_names(setup().ontology);
  const auto policy =
      dialog::template_policy(baselines::rule_based_policy(ast, baselines::default_heuristic_params(), names));
  const std::vector<double> levels{0.0, 0.3};
  const auto rows = noise_sweep(policy, setup(), levels, 20, 4);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].metrics.completion_rate >= rows[1].metrics.completion_rate);
  const auto csv = noise_sweep_csv(rows);
  CHECK(csv.rfind("error_rate,mean_reward,std_reward,mean_length,completion_rate\n", 0) == 0);
  CHECK(count_lines(csv) == 3);

  PopSweepConfig pcfg;
  pcfg.train = {small_ga(0), 5};
  pcfg.seeds = 2;
  pcfg.seed = 9;
  pcfg.test_episodes = 20;
  const std::vector<std::size_t> pops{2, 6};
  const auto sweep = pop_sweep(ast, setup(), pops, pcfg);
  REQUIRE(sweep.size() == 2);
  CHECK(sweep[0].pop == 2);
  const auto pcsv = pop_sweep_csv(sweep);
  CHECK(pcsv.rfind("pop,train_mean,train_std,test_mean,test_std\n", 0) == 0);
  CHECK(count_lines(pcsv) == 3);
}

TEST_CASE("corpus experiment")
{
  const auto c = t::synthetic_corpus(120, 8);
  const auto ast = std::make_shared<const dsl::TemplateAst>(dsl::parse_template(t::kSyntheticTemplate));
  CorpusExperimentConfig cfg;
  cfg.ga = small_ga(1);
  cfg.fqi.l_max = 2;
  cfg.fqi.trees = 5;
  cfg.classifier = {5, 0, 2, 1};
  cfg.plan = {3, 0.5, 2};

  std::vector<std::size_t> seen;
  const auto result = run_corpus_experiment(ast, c, cfg, [&](std::size_t r) { seen.push_back(r); });
  REQUIRE(result.rounds.size() == 3);
  CHECK(seen == std::vector<std::size_t>{0, 1, 2});
  for (const auto& r : result.rounds) {
    CHECK(r.train_states == 60);
    CHECK(r.test_scores.size() == kCorpusDmNames.size());
    CHECK(r.train_scores.size() == kCorpusDmNames.size());
    CHECK(r.qval_trace.size() == 5);
    CHECK(t::elitism_violations(r.qval_trace) == 0);
    CHECK(t::elitism_violations(r.npoints_trace) == 0);
    CHECK(r.npoints_fitness <= 60.0);
  }
  const auto csv = corpus_results_csv(result);
  CHECK(csv.rfind("dm,train_mean,train_std,test_mean,test_std\nGA-QVal,", 0) == 0);
  CHECK(count_lines(csv) == 6);
  const auto rounds = corpus_rounds_csv(result);
  CHECK(rounds.rfind("round,dm,train_score,test_score\n", 0) == 0);
  CHECK(count_lines(rounds) == 16);

  const auto again = run_corpus_experiment(ast, c, cfg);
  CHECK(again.rounds[2].test_scores == result.rounds[2].test_scores);

  cfg.evaluate_train = false;
  const auto test_only = run_corpus_experiment(ast, c, cfg);
  CHECK(test_only.rounds[0].train_scores.empty());
  CHECK(test_only.rounds[0].test_scores == result.rounds[0].test_scores);
}

TEST_CASE("corpus experiment rejects unusable templates before training")
{
  const auto c = t::synthetic_corpus(20, 8);
  CorpusExperimentConfig cfg;
  cfg.ga = small_ga(1);
  const auto structural = std::make_shared<const dsl::TemplateAst>(
      dsl::parse_template("num f0\naction a0(filter)\naction a1\n%%\nif f0 < p0 then a0(filter = p1)\nelse a1\n"));
  CHECK_THROWS_AS(run_corpus_experiment(structural, c, cfg), dsl::PolicyError);
  const auto unknown = std::make_shared<const dsl::TemplateAst>(
      dsl::parse_template("num g0\naction a0\naction a1\n%%\nif g0 < p0 then a0\nelse a1\n"));
  CHECK_THROWS_AS(run_corpus_experiment(unknown, c, cfg), dsl::PolicyError);
}
