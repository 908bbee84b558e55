// gadm: train and evaluate templated dialog policies.
//
// Exit codes: 0 success, 2 configuration, 3 parse, 4 data, 5 numeric failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gadm/baselines.hpp"
#include "gadm/batch_rl.hpp"
#include "gadm/corpus_io.hpp"
#include "gadm/evolution.hpp"
#include "gadm/experiments.hpp"
#include "gadm/simulator.hpp"

namespace fs = std::filesystem;
using namespace gadm;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitParse = 3;
constexpr int kExitData = 4;
constexpr int kExitNumeric = 5;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content)
{
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << content;
  if (!out) throw IoError("cannot write '" + path.string() + "'");
}

std::string default_data(const char* name)
{
  return (fs::path(GADM_DATA_DIR) / name).string();
}

std::shared_ptr<const dsl::TemplateAst> load_template(const std::string& path, const std::string& ablate)
{
  auto ast = dsl::parse_template(read_file(path));
  if (!ablate.empty()) {
    try {
      ast = dsl::ablate(ast, ablate);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  }
  return std::make_shared<const dsl::TemplateAst>(std::move(ast));
}

dialog::Ontology load_ontology(const std::string& path)
{
  return path.empty() ? sim::restaurant_ontology() : dialog::Ontology::load(path);
}

// "0.0..0.6" (with step) or "0,0.1,0.3".
std::vector<double> parse_levels(const std::string& text, double step)
{
  const auto dots = text.find("..");
  try {
    if (dots != std::string::npos) {
      return experiments::level_range(std::stod(text.substr(0, dots)), std::stod(text.substr(dots + 2)), step);
    }
    std::vector<double> levels;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) levels.push_back(std::stod(item));
    if (levels.empty()) throw ConfigError("empty noise list");
    for (double e : levels) {
      if (!(e >= 0.0 && e <= 1.0)) throw ConfigError("noise levels must lie in [0, 1]");
    }
    return levels;
  } catch (const std::logic_error& e) {
    throw ConfigError("bad noise specification '" + text + "': " + e.what());
  }
}

// Comma-separated values or a best_params.json written by a training run.
dsl::ParameterVector parse_params(const std::string& text)
{
  std::vector<double> values;
  if (fs::exists(text)) {
    const auto j = nlohmann::json::parse(read_file(text));
    values = j.at("params").get<std::vector<double>>();
  } else {
    std::stringstream ss(text);
    std::string item;
    try {
      while (std::getline(ss, item, ',')) values.push_back(std::stod(item));
    } catch (const std::logic_error&) {
      throw ConfigError("bad parameter list '" + text + "'");
    }
  }
  try {
    return dsl::ParameterVector(std::move(values));
  } catch (const std::out_of_range& e) {
    throw ConfigError(e.what());
  }
}

std::vector<std::size_t> parse_sizes(const std::string& text)
{
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  try {
    while (std::getline(ss, item, ',')) out.push_back(std::stoul(item));
  } catch (const std::logic_error&) {
    throw ConfigError("bad list '" + text + "'");
  }
  if (out.empty()) throw ConfigError("empty list");
  return out;
}

std::string params_json(const dsl::ParameterVector& params, double fitness, std::uint64_t seed)
{
  nlohmann::ordered_json j;
  j["params"] = std::vector<double>(params.values().begin(), params.values().end());
  j["fitness"] = fitness;
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

// Options shared by the GA-driven subcommands; explicit flags override --ga-config.
struct GaOptions {
  std::string config_path;
  std::size_t pop = 100;
  std::size_t generations = 30;
  std::size_t mutants = 5;
  std::size_t tournament = 3;
  double sigma = 2.0;
  double mu = 0.25;
  std::size_t convergence_window = 0;
  bool single_point = false;
  std::vector<CLI::Option*> opts;

  void add(CLI::App* app)
  {
    app->add_option("--ga-config", config_path, "GA configuration JSON")->check(CLI::ExistingFile);
    opts = {app->add_option("--pop", pop, "population size")->capture_default_str(),
            app->add_option("--generations", generations, "generations after the initial one")->capture_default_str(),
            app->add_option("--mutants", mutants, "mutants of the fittest per generation")->capture_default_str(),
            app->add_option("--tournament", tournament, "tournament size")->capture_default_str(),
            app->add_option("--sigma", sigma, "perturbation scale")->capture_default_str(),
            app->add_option("--mu", mu, "per-gene mutation probability")->capture_default_str(),
            app->add_option("--convergence-window", convergence_window,
                            "stop after this many generations without improvement (0 = never)")
                ->capture_default_str(),
            app->add_flag("--single-point", single_point, "single-point instead of uniform crossover")};
  }

  ga::GaConfig build(std::uint64_t seed) const
  {
    ga::GaConfig cfg;
    cfg.n_pop = pop;
    cfg.t_max = generations;
    cfg.n_mut = mutants;
    cfg.k = tournament;
    cfg.sigma = sigma;
    cfg.mu_mut = mu;
    cfg.convergence_window = convergence_window;
    cfg.crossover = single_point ? ga::CrossoverKind::SinglePoint : ga::CrossoverKind::Uniform;
    if (!config_path.empty()) {
      ga::GaConfig file = nlohmann::json::parse(read_file(config_path)).get<ga::GaConfig>();
      auto given = [&](std::size_t i) { return opts[i]->count() > 0; };
      if (!given(0)) cfg.n_pop = file.n_pop;
      if (!given(1)) cfg.t_max = file.t_max;
      if (!given(2)) cfg.n_mut = file.n_mut;
      if (!given(3)) cfg.k = file.k;
      if (!given(4)) cfg.sigma = file.sigma;
      if (!given(5)) cfg.mu_mut = file.mu_mut;
      if (!given(6)) cfg.convergence_window = file.convergence_window;
      if (!given(7)) cfg.crossover = file.crossover;
    }
    cfg.seed = seed;
    cfg.validate();
    return cfg;
  }
};

struct SimOptions {
  std::string ontology;
  std::string noise = "0.0..0.6";
  double step = 0.1;
  std::size_t max_turns = 30;
  std::size_t patience = 3;
  std::size_t nbest = 3;

  void add(CLI::App* app, bool with_noise = true)
  {
    app->add_option("--ontology", ontology, "domain ontology JSON (default: built-in restaurant domain)")
        ->check(CLI::ExistingFile);
    if (with_noise) {
      app->add_option("--noise", noise, "noise levels, a range 'a..b' or a comma list")->capture_default_str();
      app->add_option("--step", step, "step for a noise range")->capture_default_str();
    }
    app->add_option("--max-turns", max_turns, "turn limit per dialog")->capture_default_str();
    app->add_option("--patience", patience, "consecutive Repeats before the user hangs up (0 = never)")
        ->capture_default_str();
    app->add_option("--nbest", nbest, "N-best list length")->capture_default_str();
  }

  sim::SimulationSetup build(const dialog::RewardConfig& rewards = dialog::simulation_rewards()) const
  {
    sim::SimulationSetup setup{load_ontology(ontology), {}, {}, {}};
    setup.schedule.levels = parse_levels(noise, step);
    setup.noise.nbest_size = nbest;
    setup.noise.validate();
    setup.episode.max_turns = max_turns;
    setup.episode.user.patience = patience;
    setup.episode.rewards = rewards;
    return setup;
  }
};

struct TrainSim {
  std::string template_path = default_data("restaurant.gadm");
  std::string ablate;
  std::uint64_t seed = 0;
  std::size_t episodes = 100;
  std::string out = "out/train-sim";
  GaOptions ga;
  SimOptions sim;

  void add(CLI::App& app)
  {
    auto* c = app.add_subcommand("train-sim", "optimize template parameters against the user simulator");
    c->add_option("--template", template_path, "policy template")->check(CLI::ExistingFile)->capture_default_str();
    c->add_option("--ablate", ablate, "remove the clauses with this label before training");
    c->add_option("--seed", seed, "master seed")->required();
    c->add_option("--episodes", episodes, "simulated dialogs per fitness evaluation")->capture_default_str();
    c->add_option("--out", out, "output directory")->capture_default_str();
    ga.add(c);
    sim.add(c);
    c->callback([this] { run(); });
  }

  void run() const
  {
    const auto ast = load_template(template_path, ablate);
    const auto setup = sim.build();
    experiments::SimTrainConfig cfg{ga.build(seed), episodes};
    const auto result = experiments::train_in_simulation(ast, setup, cfg);

    const fs::path dir(out);
    write_file(dir / "trace.csv", ga::trace_to_csv(result.trace));
    write_file(dir / "best_params.json", params_json(result.best.genome, *result.best.fitness, seed));
    write_file(dir / "policy.gadm", dsl::format_template_file(*ast));
    write_file(dir / "policy_instantiated.txt", dsl::render_instantiated(*ast, result.best.genome) + "\n");
    std::cout << "best fitness " << fmt(*result.best.fitness) << " after " << result.trace.size() - 1
              << " generations; artifacts in " << dir.string() << "\n";
  }
};

struct TrainCorpus {
  std::string template_path = default_data("corpus_reconstructed.gadm");
  std::string corpus_path;
  std::string fitness = "qval";
  double delta = 0.1;
  std::optional<double> punish;
  std::size_t resamples = 12;
  double split = 0.5;
  std::uint64_t seed = 0;
  std::size_t trees = 50;
  std::size_t l_max = 20;
  std::size_t n_min = 5;
  bool skip_train_eval = false;
  std::string out = "out/train-corpus";
  GaOptions ga;

  void add(CLI::App& app)
  {
    auto* c = app.add_subcommand("train-corpus", "optimize template parameters on a dialog corpus");
    c->add_option("--template", template_path, "policy template")->check(CLI::ExistingFile)->capture_default_str();
    c->add_option("--corpus", corpus_path, "corpus JSON-lines file")->check(CLI::ExistingFile)->required();
    c->add_option("--fitness", fitness, "fitness whose parameters go to best_params.json")
        ->check(CLI::IsMember({"npoints", "qval"}))
        ->capture_default_str();
    c->add_option("--delta", delta, "classifier probability threshold")->capture_default_str();
    c->add_option("--punish", punish, "QVal punishment (default: the corpus wrong-offer reward)");
    c->add_option("--resamples", resamples, "train/test resampling rounds")->capture_default_str();
    c->add_option("--split", split, "training fraction of each round")->capture_default_str();
    c->add_option("--seed", seed, "master seed")->required();
    c->add_option("--trees", trees, "trees per ensemble")->capture_default_str();
    c->add_option("--l-max", l_max, "fitted Q-iteration rounds")->capture_default_str();
    c->add_option("--n-min", n_min, "minimum samples to split a tree node")->capture_default_str();
    c->add_flag("--skip-train-eval", skip_train_eval, "score DMs on the test halves only");
    c->add_option("--out", out, "output directory")->capture_default_str();
    ga.add(c);
    c->callback([this] { run(); });
  }

  void run() const
  {
    const auto ast = load_template(template_path, "");
    rl::require_no_structural_params(*ast);
    const auto corpus = corpus::load_corpus(corpus_path);

    experiments::CorpusExperimentConfig cfg;
    cfg.ga = ga.build(seed);
    cfg.fqi.l_max = l_max;
    cfg.fqi.gamma = corpus.header.reward_config.gamma;
    cfg.fqi.trees = trees;
    cfg.fqi.n_min = n_min;
    cfg.fqi.seed = derive_seed(seed, 1);
    cfg.classifier = {trees, 0, n_min, derive_seed(seed, 2)};
    cfg.qval.delta = delta;
    cfg.qval.r_punish = punish ? *punish : corpus.header.reward_config.wrong_offer;
    cfg.plan = {resamples, split, derive_seed(seed, 3)};
    cfg.evaluate_train = !skip_train_eval;
    try {
      cfg.plan.validate();
      cfg.qval.validate();
      cfg.fqi.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }

    const auto result = experiments::run_corpus_experiment(ast, corpus, cfg, [&](std::size_t r) {
      std::cerr << "round " << r + 1 << "/" << resamples << " done\n";
    });

    nlohmann::ordered_json best;
    best["fitness"] = fitness;
    best["rounds"] = nlohmann::ordered_json::array();
    for (const auto& r : result.rounds) {
      const auto& p = fitness == "qval" ? r.qval_params : r.npoints_params;
      best["rounds"].push_back({{"params", std::vector<double>(p.values().begin(), p.values().end())},
                                {"fitness", fitness == "qval" ? r.qval_fitness : r.npoints_fitness},
                                {"states", r.train_states}});
    }
    const auto& first = result.rounds.front();
    best["params"] = fitness == "qval" ? std::vector<double>(first.qval_params.values().begin(),
                                                             first.qval_params.values().end())
                                       : std::vector<double>(first.npoints_params.values().begin(),
                                                             first.npoints_params.values().end());

    const fs::path dir(out);
    write_file(dir / "results.csv", experiments::corpus_results_csv(result));
    write_file(dir / "rounds.csv", experiments::corpus_rounds_csv(result));
    write_file(dir / "best_params.json", best.dump(2) + "\n");
    std::cout << experiments::corpus_results_csv(result);
  }
};

struct Evaluate {
  std::string template_path = default_data("restaurant.gadm");
  std::string params;
  std::string weights;
  std::string corpus_path;
  std::string pop_sweep;
  std::uint64_t seed = 0;
  std::size_t episodes = 1000;
  std::size_t seeds = 5;
  std::size_t fitness_episodes = 100;
  std::size_t trees = 50;
  std::size_t l_max = 20;
  std::string out = "out/evaluate";
  GaOptions ga;
  SimOptions sim;

  void add(CLI::App& app)
  {
    auto* c = app.add_subcommand(
        "evaluate",
        "noise sweep in simulation (default), --pop-sweep training curves, or --corpus on-corpus evaluation");
    c->add_option("--template", template_path, "policy template")->check(CLI::ExistingFile)->capture_default_str();
    c->add_option("--params", params, "parameters: comma list or best_params.json (default: heuristic)");
    c->add_option("--weights", weights, "evaluate a linear-Q weights file instead of a template")
        ->check(CLI::ExistingFile);
    c->add_option("--corpus", corpus_path, "held-out corpus for on-corpus evaluation")->check(CLI::ExistingFile);
    c->add_option("--pop-sweep", pop_sweep, "population sizes, e.g. 10,30,100,300,1000");
    c->add_option("--seed", seed, "master seed")->required();
    c->add_option("--episodes", episodes, "test dialogs per noise level or per trained policy")
        ->capture_default_str();
    c->add_option("--seeds", seeds, "training runs per population size")->capture_default_str();
    c->add_option("--fitness-episodes", fitness_episodes, "dialogs per fitness evaluation in a sweep")
        ->capture_default_str();
    c->add_option("--trees", trees, "trees per ensemble (corpus mode)")->capture_default_str();
    c->add_option("--l-max", l_max, "evaluation rounds (corpus mode)")->capture_default_str();
    c->add_option("--out", out, "output directory")->capture_default_str();
    ga.add(c);
    sim.add(c);
    c->callback([this] { run(); });
  }

  dsl::ParameterVector resolved_params(const dsl::TemplateAst& ast) const
  {
    if (!params.empty()) return parse_params(params);
    if (ast.param_count == 4) return baselines::default_heuristic_params();
    throw ConfigError("--params is required for a template with " + std::to_string(ast.param_count) +
                      " parameters");
  }

  void run() const
  {
    const fs::path dir(out);
    if (!corpus_path.empty()) {
      run_corpus(dir);
    } else if (!pop_sweep.empty()) {
      const auto ast = load_template(template_path, "");
      const auto setup = sim.build();
      experiments::PopSweepConfig cfg;
      cfg.train = {ga.build(seed), fitness_episodes};
      cfg.seeds = seeds;
      cfg.seed = seed;
      cfg.test_episodes = episodes;
      const auto pops = parse_sizes(pop_sweep);
      const auto rows = experiments::pop_sweep(ast, setup, pops, cfg);
      write_file(dir / "pop_sweep.csv", experiments::pop_sweep_csv(rows));
      std::cout << experiments::pop_sweep_csv(rows);
    } else {
      const auto setup = sim.build();
      dialog::SystemPolicy policy;
      if (!weights.empty()) {
        policy = baselines::LinearQPolicy::from_json(read_file(weights)).system_policy();
      } else {
        const auto ast = load_template(template_path, "");
        policy = dialog::template_policy(
            dsl::Policy(ast, resolved_params(*ast), dialog::feature_names(setup.ontology)));
      }
      const auto rows = experiments::noise_sweep(policy, setup, setup.schedule.levels, episodes, seed);
      write_file(dir / "noise_sweep.csv", experiments::noise_sweep_csv(rows));
      std::cout << experiments::noise_sweep_csv(rows);
    }
  }

  void run_corpus(const fs::path& dir) const
  {
    const auto ast = load_template(template_path, "");
    const auto corpus = corpus::load_corpus(corpus_path);
    const auto schema = rl::schema_of(corpus.header);
    const auto policy = rl::corpus_policy(ast, resolved_params(*ast), schema);
    const dialog::FeatureReward reward(corpus.header.feature_names, corpus.header.reward_config);
    rl::FittedQConfig cfg;
    cfg.trees = trees;
    cfg.l_max = l_max;
    cfg.gamma = corpus.header.reward_config.gamma;
    cfg.seed = seed;
    const auto transitions = corpus.transitions();
    const double score = rl::evaluate_policy_on_corpus(
        policy, transitions, schema,
        [&](std::span<const double> s, std::size_t a, std::span<const double> sn) { return reward(s, a, sn); }, cfg);
    const std::string csv = "policy,dialogs,score\ntemplate," + std::to_string(corpus.dialogs.size()) + ',' +
                            fmt(score) + '\n';
    write_file(dir / "corpus_eval.csv", csv);
    std::cout << csv;
  }
};

struct GenCorpus {
  std::string template_path = default_data("corpus_reconstructed.gadm");
  std::string params;
  std::size_t dialogs = 1000;
  double epsilon = 0.2;
  std::uint64_t seed = 0;
  std::string rewards = "corpus";
  std::string out = "out/corpus.jsonl";
  std::string episode_log;
  SimOptions sim;

  void add(CLI::App& app)
  {
    auto* c = app.add_subcommand("gen-corpus", "generate a synthetic corpus from a templated behaviour policy");
    c->add_option("--template", template_path, "behaviour template")->check(CLI::ExistingFile)->capture_default_str();
    c->add_option("--params", params, "behaviour parameters: comma list or best_params.json")->required();
    c->add_option("--dialogs", dialogs, "number of dialogs")->capture_default_str();
    c->add_option("--epsilon", epsilon, "probability of a random action per turn")->capture_default_str();
    c->add_option("--seed", seed, "master seed")->required();
    c->add_option("--rewards", rewards, "reward scheme recorded in the header")
        ->check(CLI::IsMember({"corpus", "simulation"}))
        ->capture_default_str();
    c->add_option("--out", out, "corpus file")->capture_default_str();
    c->add_option("--episode-log", episode_log, "also dump the episodes as JSON lines");
    sim.add(c);
    c->callback([this] { run(); });
  }

  void run() const
  {
    const auto ast = load_template(template_path, "");
    const auto setup =
        sim.build(rewards == "corpus" ? dialog::corpus_rewards() : dialog::simulation_rewards());
    const dsl::Policy behaviour(ast, parse_params(params), dialog::feature_names(setup.ontology));
    std::vector<sim::EpisodeLog> logs;
    const auto corpus = sim::generate_corpus(behaviour, setup, {dialogs, epsilon, seed}, &logs);
    write_file(out, corpus::serialize_corpus(corpus));
    if (!episode_log.empty()) {
      std::string lines;
      for (const auto& log : logs) lines += sim::episode_to_json(log, setup.ontology) + '\n';
      write_file(episode_log, lines);
    }
    std::cout << corpus.dialogs.size() << " dialogs, " << corpus.transition_count() << " transitions -> " << out
              << "\n";
  }
};

struct TrainLinearQ {
  std::size_t episodes = 100000;
  double epsilon = 0.3;
  double lr = 0.05;
  std::uint64_t seed = 0;
  std::size_t test_episodes = 1000;
  std::string out = "out/linear-q";
  SimOptions sim;

  void add(CLI::App& app)
  {
    auto* c = app.add_subcommand("train-linear-q", "train the linear Q-learning baseline in simulation");
    c->add_option("--episodes", episodes, "training dialogs")->capture_default_str();
    c->add_option("--epsilon", epsilon, "exploration probability")->capture_default_str();
    c->add_option("--lr", lr, "initial learning rate")->capture_default_str();
    c->add_option("--seed", seed, "master seed")->required();
    c->add_option("--test-episodes", test_episodes, "mixed-noise test dialogs")->capture_default_str();
    c->add_option("--out", out, "output directory")->capture_default_str();
    sim.add(c);
    c->callback([this] { run(); });
  }

  void run() const
  {
    baselines::DialogEnvironment env(sim.build());
    baselines::LinearQConfig cfg;
    cfg.episodes = episodes;
    cfg.epsilon = epsilon;
    cfg.learning_rate = lr;
    try {
      cfg.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
    const auto policy = baselines::train_linear_q(env, cfg, seed);
    const auto test =
        sim::evaluate_in_simulation(policy.system_policy(), env.setup(), test_episodes, derive_seed(seed, 0x7E57));
    const fs::path dir(out);
    write_file(dir / "weights.json", policy.to_json());
    std::cout << "test mean reward " << fmt(test.mean_return) << " (std " << fmt(test.std_return)
              << "), completion " << fmt(test.completion_rate) << "\n";
  }
};

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"Genetic-algorithm optimization of templated dialog policies"};
  app.require_subcommand(1);
  TrainSim train_sim;
  TrainCorpus train_corpus;
  Evaluate evaluate;
  GenCorpus gen_corpus;
  TrainLinearQ train_linear_q;
  train_sim.add(app);
  train_corpus.add(app);
  evaluate.add(app);
  gen_corpus.add(app);
  train_linear_q.add(app);

  try {
    app.parse(argc, argv);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dsl::TemplateError& e) {
    std::cerr << "template error: " << e.what() << "\n";
    return kExitParse;
  } catch (const corpus::CorpusError& e) {
    std::cerr << "corpus error: " << e.what() << "\n";
    return e.kind() == corpus::CorpusError::Kind::ParseError ? kExitParse : kExitData;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitParse;
  } catch (const dsl::PolicyError& e) {
    std::cerr << "policy error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ga::InvalidConfig& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const dialog::OntologyError& e) {
    std::cerr << "ontology error: " << e.what() << "\n";
    return kExitData;
  } catch (const rl::ModelSchemaMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const rl::MalformedEpisode& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const ml::FeatureArityMismatch& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return kExitData;
  } catch (const baselines::DivergenceDetected& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ga::FitnessEvaluationFailure& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::domain_error& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::invalid_argument& e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
