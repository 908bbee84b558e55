#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gadm/dialog_core.hpp"
#include "gadm/policy_dsl.hpp"
#include "gadm/random.hpp"
#include "gadm/simulator.hpp"

namespace gadm::baselines {

/// Hand-set thresholds for the restaurant template: (0.3, 0.8, 0.5, 0.5).
dsl::ParameterVector default_heuristic_params();

/// The template evaluated with frozen parameters. Throws
/// PolicyError(ArityMismatch) when the lengths differ.
dsl::Policy rule_based_policy(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                              std::span<const std::string> feature_names);

/// Episodic environment over feature vectors and a finite action set.
class Environment {
 public:
  struct Step {
    std::vector<double> features;
    double reward = 0.0;
    bool done = false;
  };

  virtual ~Environment() = default;
  virtual std::size_t feature_count() const = 0;
  virtual std::size_t action_count() const = 0;
  virtual std::vector<double> reset(RandomStream& rng) = 0;
  virtual Step step(std::size_t action, RandomStream& rng) = 0;
};

/// The simulated restaurant dialog as an Environment. Actions are system act
/// labels; Offer queries every slot with a non-zero belief.
class DialogEnvironment : public Environment {
 public:
  explicit DialogEnvironment(sim::SimulationSetup setup, std::vector<std::string> action_set = default_actions());
  DialogEnvironment(const DialogEnvironment&) = delete;
  DialogEnvironment& operator=(const DialogEnvironment&) = delete;

  static std::vector<std::string> default_actions();

  std::size_t feature_count() const override { return feature_names_.size(); }
  std::size_t action_count() const override { return actions_.size(); }
  std::vector<double> reset(RandomStream& rng) override;
  Step step(std::size_t action, RandomStream& rng) override;

  const std::vector<std::string>& action_set() const noexcept { return actions_; }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const sim::SimulationSetup& setup() const noexcept { return setup_; }

 private:
  sim::SimulationSetup setup_;
  std::vector<std::string> actions_;
  std::vector<std::string> feature_names_;
  std::optional<sim::DialogSession> session_;
};

class DivergenceDetected : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct LinearQConfig {
  double learning_rate = 0.05;  // decays as learning_rate / sqrt(episode)
  double epsilon = 0.3;
  std::size_t episodes = 100000;
  double gamma = 0.9;

  void validate() const;
};

/// Q(s, a) = w_a . [s, 1]; acts greedily, ties to the lowest action index.
class LinearQPolicy {
 public:
  LinearQPolicy() = default;
  LinearQPolicy(std::vector<std::string> feature_names, std::vector<std::string> action_set);

  double q(std::span<const double> s, std::size_t action) const;
  std::size_t greedy(std::span<const double> s) const;

  std::vector<double>& weights(std::size_t action) { return weights_.at(action); }
  const std::vector<double>& weights(std::size_t action) const { return weights_.at(action); }
  const std::vector<std::string>& feature_names() const noexcept { return feature_names_; }
  const std::vector<std::string>& action_set() const noexcept { return action_set_; }

  /// Adapts the greedy policy to the dialog simulator (action labels must be system acts).
  dialog::SystemPolicy system_policy() const;

  std::string to_json() const;
  static LinearQPolicy from_json(const std::string& text);

 private:
  int schema_version_ = dialog::kFeatureSchemaVersion;
  std::vector<std::string> feature_names_;
  std::vector<std::string> action_set_;
  std::vector<std::vector<double>> weights_;  // [action][feature + bias]
};

/// Epsilon-greedy online Q-learning. Throws DivergenceDetected when a weight
/// stops being finite.
LinearQPolicy train_linear_q(Environment& env, std::vector<std::string> feature_names,
                             std::vector<std::string> action_set, const LinearQConfig& cfg, std::uint64_t seed);

LinearQPolicy train_linear_q(DialogEnvironment& env, const LinearQConfig& cfg, std::uint64_t seed);

}  // namespace gadm::baselines
