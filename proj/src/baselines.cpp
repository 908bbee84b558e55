#include "gadm/baselines.hpp"

#include <algorithm>
#include <cmath>

#include <json.hpp>

namespace gadm::baselines {

dsl::ParameterVector default_heuristic_params()
{
  return dsl::ParameterVector({0.3, 0.8, 0.5, 0.5});
}

dsl::Policy rule_based_policy(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                              std::span<const std::string> feature_names)
{
  return dsl::Policy(std::move(ast), params, feature_names);
}

DialogEnvironment::DialogEnvironment(sim::SimulationSetup setup, std::vector<std::string> action_set)
    : setup_(std::move(setup)), actions_(std::move(action_set)), feature_names_(dialog::feature_names(setup_.ontology))
{
  if (actions_.empty()) throw std::invalid_argument("environment needs at least one action");
  for (const auto& a : actions_) {
    if (!dialog::parse_system_act(a)) throw std::invalid_argument("'" + a + "' is not a system act");
  }
}

std::vector<std::string> DialogEnvironment::default_actions()
{
  return {"Welcome", "Repeat", "Request", "ExplicitConf", "RequireMore", "Offer"};
}

std::vector<double> DialogEnvironment::reset(RandomStream& rng)
{
  sim::NoiseConfig noise = setup_.noise;
  noise.error_rate = setup_.schedule.sample(rng);
  session_.emplace(setup_.ontology, setup_.episode, noise, rng);
  return dialog::featurize(session_->state(), setup_.episode.max_turns);
}

Environment::Step DialogEnvironment::step(std::size_t action, RandomStream& rng)
{
  if (!session_ || session_->finished()) throw std::logic_error("step on a finished episode; call reset");
  const auto act = dialog::resolve_action(actions_.at(action), {}, session_->state());
  const auto result = session_->step(act, rng);
  return {dialog::featurize(session_->state(), setup_.episode.max_turns), result.reward, session_->finished()};
}

void LinearQConfig::validate() const
{
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("epsilon must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
}

LinearQPolicy::LinearQPolicy(std::vector<std::string> feature_names, std::vector<std::string> action_set)
    : feature_names_(std::move(feature_names)),
      action_set_(std::move(action_set)),
      weights_(action_set_.size(), std::vector<double>(feature_names_.size() + 1, 0.0))
{
}

double LinearQPolicy::q(std::span<const double> s, std::size_t action) const
{
  const auto& w = weights_.at(action);
  if (s.size() + 1 != w.size()) throw std::invalid_argument("state width does not match the weights");
  double v = w.back();
  for (std::size_t i = 0; i < s.size(); ++i) v += w[i] * s[i];
  return v;
}

std::size_t LinearQPolicy::greedy(std::span<const double> s) const
{
  std::size_t best = 0;
  double best_q = q(s, 0);
  for (std::size_t a = 1; a < weights_.size(); ++a) {
    const double v = q(s, a);
    if (v > best_q) {
      best_q = v;
      best = a;
    }
  }
  return best;
}

dialog::SystemPolicy LinearQPolicy::system_policy() const
{
  for (const auto& a : action_set_) {
    if (!dialog::parse_system_act(a)) throw std::invalid_argument("'" + a + "' is not a system act");
  }
  auto self = std::make_shared<const LinearQPolicy>(*this);
  return [self](const dialog::DialogState& state, std::span<const double> features) {
    return dialog::resolve_action(self->action_set_[self->greedy(features)], {}, state);
  };
}

std::string LinearQPolicy::to_json() const
{
  nlohmann::ordered_json j;
  j["schema_version"] = schema_version_;
  j["feature_names"] = feature_names_;
  j["action_set"] = action_set_;
  j["weights"] = weights_;
  return j.dump(2) + "\n";
}

LinearQPolicy LinearQPolicy::from_json(const std::string& text)
{
  try {
    const auto j = nlohmann::json::parse(text);
    LinearQPolicy p(j.at("feature_names").get<std::vector<std::string>>(),
                    j.at("action_set").get<std::vector<std::string>>());
    p.schema_version_ = j.at("schema_version").get<int>();
    if (p.schema_version_ != dialog::kFeatureSchemaVersion) {
      throw std::runtime_error("weights use feature schema version " + std::to_string(p.schema_version_));
    }
    auto w = j.at("weights").get<std::vector<std::vector<double>>>();
    if (w.size() != p.weights_.size()) throw std::runtime_error("weight rows do not match the action set");
    for (const auto& row : w) {
      if (row.size() != p.feature_names_.size() + 1) throw std::runtime_error("weight row has the wrong width");
    }
    p.weights_ = std::move(w);
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error(std::string("malformed weights file: ") + e.what());
  }
}

LinearQPolicy train_linear_q(Environment& env, std::vector<std::string> feature_names,
                             std::vector<std::string> action_set, const LinearQConfig& cfg, std::uint64_t seed)
{
  cfg.validate();
  if (feature_names.size() != env.feature_count() || action_set.size() != env.action_count()) {
    throw std::invalid_argument("names do not match the environment's dimensions");
  }
  LinearQPolicy policy(std::move(feature_names), std::move(action_set));
  const std::size_t n_actions = env.action_count();
  RandomStream rng(seed);

  for (std::size_t episode = 1; episode <= cfg.episodes; ++episode) {
    const double alpha = cfg.learning_rate / std::sqrt(static_cast<double>(episode));
    std::vector<double> s = env.reset(rng);
    bool done = false;
    while (!done) {
      const std::size_t a = rng.bernoulli(cfg.epsilon) ? rng.index(n_actions) : policy.greedy(s);
      auto step = env.step(a, rng);
      double target = step.reward;
      if (!step.done) target += cfg.gamma * policy.q(step.features, policy.greedy(step.features));
      const double error = target - policy.q(s, a);
      auto& w = policy.weights(a);
      for (std::size_t i = 0; i < s.size(); ++i) w[i] += alpha * error * s[i];
      w.back() += alpha * error;
      for (double v : w) {
        if (!std::isfinite(v)) {
          throw DivergenceDetected("linear Q weights diverged in episode " + std::to_string(episode));
        }
      }
      s = std::move(step.features);
      done = step.done;
    }
  }
  return policy;
}

LinearQPolicy train_linear_q(DialogEnvironment& env, const LinearQConfig& cfg, std::uint64_t seed)
{
  return train_linear_q(env, env.feature_names(), env.action_set(), cfg, seed);
}

}  // namespace gadm::baselines
