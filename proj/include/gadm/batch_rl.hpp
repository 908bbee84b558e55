#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gadm/corpus_io.hpp"
#include "gadm/extra_trees.hpp"
#include "gadm/policy_dsl.hpp"

namespace gadm::rl {

using corpus::Transition;
using ml::Matrix;

/// r(s, a, s') on feature vectors; a indexes the action set.
using RewardFunction =
    std::function<double(std::span<const double> s, std::size_t a, std::span<const double> s_next)>;

/// Maps a feature vector to an index into the action set.
using CorpusPolicy = std::function<std::size_t(std::span<const double> features)>;

class ModelSchemaMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MalformedEpisode : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct ModelSchema {
  int version = 0;
  std::vector<std::string> feature_names;
  std::vector<std::string> action_set;
  bool operator==(const ModelSchema&) const = default;
};

/// Q(s, a) regressed on the state features followed by a one-hot action block.
class QModel {
 public:
  QModel() = default;
  QModel(ModelSchema schema, ml::ExtraTreesRegressor regressor);

  double q(std::span<const double> s, std::size_t action) const;
  /// Q-values for every action, in action-set order.
  void q_all(std::span<const double> s, std::span<double> out) const;
  std::vector<double> q_all(std::span<const double> s) const;
  /// argmax_a Q(s, a); ties go to the lowest action index.
  std::size_t greedy(std::span<const double> s) const;

  const ModelSchema& schema() const noexcept { return schema_; }
  std::size_t action_count() const noexcept { return schema_.action_set.size(); }
  std::size_t feature_count() const noexcept { return schema_.feature_names.size(); }

  void save(const std::string& path) const;
  /// Throws ModelSchemaMismatch unless the stored schema equals `expected`.
  static QModel load(const std::string& path, const ModelSchema& expected);
  static QModel load(const std::string& path);

 private:
  ModelSchema schema_;
  ml::ExtraTreesRegressor regressor_;
};

/// P(a | s) from a tree-ensemble classifier over the observed actions.
class ActionClassifier {
 public:
  ActionClassifier() = default;
  ActionClassifier(ModelSchema schema, ml::ExtraTreesClassifier classifier);

  static ActionClassifier fit(std::span<const Transition> transitions, const ModelSchema& schema,
                              const ml::ForestConfig& cfg);

  std::vector<double> proba(std::span<const double> s) const;
  void proba(std::span<const double> s, std::span<double> out) const;
  /// Most probable action; ties go to the lowest index.
  std::size_t predict(std::span<const double> s) const;

  const ModelSchema& schema() const noexcept { return schema_; }

  void save(const std::string& path) const;
  static ActionClassifier load(const std::string& path, const ModelSchema& expected);

 private:
  ModelSchema schema_;
  ml::ExtraTreesClassifier classifier_;
};

struct FittedQConfig {
  std::size_t l_max = 30;
  double gamma = 0.9;
  std::size_t trees = 100;
  std::size_t k_features = 0;  // 0 selects round(sqrt(d))
  std::size_t n_min = 5;
  std::uint64_t seed = 0;

  void validate() const;
  /// Forest settings for the fit of outer iteration `iteration`.
  ml::ForestConfig forest(std::size_t iteration) const;
};

struct FittedQResult {
  QModel model;
  /// Max-norm change of the target array at each outer iteration after the first.
  std::vector<double> residuals;
};

/// Targets start at 0. Each outer iteration sets Q <- r on terminal turns and
/// Q <- r + gamma * max_a Q^(s', a) elsewhere, then refits Q^ from scratch.
FittedQResult fitted_q_iteration(std::span<const Transition> transitions, const ModelSchema& schema,
                                 const RewardFunction& reward, const FittedQConfig& cfg);

/// Policy evaluation variant: Q <- r + gamma * Q^(s', pi(s')). Returns the
/// mean target over the starting turns of the dialogs.
double evaluate_policy_on_corpus(const CorpusPolicy& policy, std::span<const Transition> transitions,
                                 const ModelSchema& schema, const RewardFunction& reward,
                                 const FittedQConfig& cfg);

/// Predictions over a fixed state set, computed once so repeated fitness
/// evaluations reduce to table lookups.
struct FitnessTable {
  ModelSchema schema;
  Matrix states;  // one row per corpus state
  Matrix q;       // [state][action]
  Matrix proba;   // [state][action]; empty without a classifier
  std::vector<std::size_t> greedy;

  std::size_t size() const noexcept { return states.rows; }
};

FitnessTable build_fitness_table(std::span<const Transition> transitions, const QModel& q,
                                 const ActionClassifier* classifier = nullptr);

struct QValConfig {
  double delta = 0.1;
  double r_punish = -100.0;

  void validate() const;
};

/// Number of states where the template's action equals argmax_a Q^(s, a).
double fitness_npoints(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                       const FitnessTable& table);

/// Sum over states of Q^(s, pi(s)) when P^(pi(s) | s) > delta, else r_punish.
double fitness_qval(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                    const FitnessTable& table, const QValConfig& cfg);

/// Binds a template to a corpus schema: template variables to feature
/// columns, template action labels to action-set indices. Throws
/// PolicyError(StructuralParamForbidden) when any action carries structural
/// parameters.
CorpusPolicy corpus_policy(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                           const ModelSchema& schema);

void require_no_structural_params(const dsl::TemplateAst& ast);

struct ComparisonDms {
  CorpusPolicy sl_original;   // argmax_a P^(a | s)
  CorpusPolicy sl_max_q;      // argmax_a Q^(s, a)
  CorpusPolicy thresholded_q;  // argmax Q^ over {a : P^(a | s) > delta}, else sl_original
};

ComparisonDms build_comparison_dms(std::shared_ptr<const QModel> q, std::shared_ptr<const ActionClassifier> clf,
                                   double delta);

ModelSchema schema_of(const corpus::CorpusHeader& header);

}  // namespace gadm::rl
