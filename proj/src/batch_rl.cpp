#include "gadm/batch_rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include "gadm/parallel.hpp"
#include "gadm/random.hpp"

namespace gadm::rl {

namespace {

void encode(std::span<const double> s, std::size_t action, std::size_t n_actions, std::vector<double>& out)
{
  out.assign(s.size() + n_actions, 0.0);
  std::copy(s.begin(), s.end(), out.begin());
  out[s.size() + action] = 1.0;
}

void check_state(std::span<const double> s, const ModelSchema& schema)
{
  if (s.size() != schema.feature_names.size()) {
    throw ml::FeatureArityMismatch("state has " + std::to_string(s.size()) + " features, schema declares " +
                                   std::to_string(schema.feature_names.size()));
  }
}

void check_transitions(std::span<const Transition> transitions, const ModelSchema& schema)
{
  if (transitions.empty()) throw ml::EmptyTrainingSet("corpus has no transitions");
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    check_state(t.state_before, schema);
    check_state(t.state_after, schema);
    if (t.action >= schema.action_set.size()) {
      throw std::invalid_argument("transition action index out of range");
    }
    const bool last_of_dialog = i + 1 == transitions.size() || transitions[i + 1].dialog_id != t.dialog_id;
    if (last_of_dialog && !t.is_terminal) {
      throw MalformedEpisode("dialog '" + t.dialog_id + "' has no terminal turn");
    }
    if (!last_of_dialog && t.is_terminal) {
      throw MalformedEpisode("dialog '" + t.dialog_id + "' continues after its terminal turn");
    }
  }
}

Matrix design_matrix(std::span<const Transition> transitions, std::size_t n_actions)
{
  Matrix x;
  std::vector<double> row;
  for (const auto& t : transitions) {
    encode(t.state_before, t.action, n_actions, row);
    x.push_row(row);
  }
  return x;
}

std::vector<double> immediate_rewards(std::span<const Transition> transitions, const RewardFunction& reward)
{
  std::vector<double> r(transitions.size());
  for (std::size_t i = 0; i < transitions.size(); ++i) {
    const auto& t = transitions[i];
    r[i] = reward(t.state_before, t.action, t.state_after);
    if (!std::isfinite(r[i])) throw std::domain_error("reward function returned a non-finite value");
  }
  return r;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

constexpr char kQMagic[8] = {'G', 'A', 'D', 'M', 'Q', 'M', '0', '1'};
constexpr char kClfMagic[8] = {'G', 'A', 'D', 'M', 'C', 'L', '0', '1'};

void write_string(std::ostream& out, const std::string& s)
{
  const std::uint64_t n = s.size();
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in)
{
  std::uint64_t n = 0;
  in.read(reinterpret_cast<char*>(&n), sizeof n);
  if (!in || n > (1u << 20)) throw std::runtime_error("corrupt model file");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("corrupt model file");
  return s;
}

void write_schema(std::ostream& out, const char* magic, const ModelSchema& schema)
{
  out.write(magic, 8);
  const std::int32_t version = schema.version;
  out.write(reinterpret_cast<const char*>(&version), sizeof version);
  for (const auto* list : {&schema.feature_names, &schema.action_set}) {
    const std::uint64_t n = list->size();
    out.write(reinterpret_cast<const char*>(&n), sizeof n);
    for (const auto& s : *list) write_string(out, s);
  }
}

ModelSchema read_schema(std::istream& in, const char* magic)
{
  char got[8];
  in.read(got, sizeof got);
  if (!in || std::memcmp(got, magic, sizeof got) != 0) throw std::runtime_error("not a model file of this kind");
  ModelSchema schema;
  std::int32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof version);
  schema.version = version;
  for (auto* list : {&schema.feature_names, &schema.action_set}) {
    std::uint64_t n = 0;
    in.read(reinterpret_cast<char*>(&n), sizeof n);
    if (!in || n > (1u << 20)) throw std::runtime_error("corrupt model file");
    for (std::uint64_t i = 0; i < n; ++i) list->push_back(read_string(in));
  }
  return schema;
}

void require_schema(const ModelSchema& stored, const ModelSchema& expected)
{
  if (stored.version != expected.version) {
    throw ModelSchemaMismatch("model feature schema version " + std::to_string(stored.version) + ", expected " +
                              std::to_string(expected.version));
  }
  if (stored.feature_names != expected.feature_names) {
    throw ModelSchemaMismatch("model feature names differ from the expected schema");
  }
  if (stored.action_set != expected.action_set) {
    throw ModelSchemaMismatch("model action set differs from the expected schema");
  }
}

std::ofstream open_out(const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  return in;
}

// A template bound to a corpus schema.
struct BoundTemplate {
  dsl::Policy policy;
  std::vector<std::size_t> action_map;  // template action -> action-set index

  std::size_t operator()(std::span<const double> s) const { return action_map[policy.action(s)]; }
};

BoundTemplate bind(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                   const ModelSchema& schema)
{
  require_no_structural_params(*ast);
  std::vector<std::size_t> map;
  for (const auto& a : ast->schema.actions) {
    const auto it = std::find(schema.action_set.begin(), schema.action_set.end(), a.label);
    if (it == schema.action_set.end()) {
      throw dsl::PolicyError(dsl::PolicyError::Kind::UnknownAction,
                             "template action '" + a.label + "' is not in the corpus action set");
    }
    map.push_back(static_cast<std::size_t>(it - schema.action_set.begin()));
  }
  return {dsl::Policy(std::move(ast), params, schema.feature_names), std::move(map)};
}

}  // namespace

QModel::QModel(ModelSchema schema, ml::ExtraTreesRegressor regressor)
    : schema_(std::move(schema)), regressor_(std::move(regressor))
{
  if (regressor_.n_features() != schema_.feature_names.size() + schema_.action_set.size()) {
    throw ModelSchemaMismatch("regressor input width does not match the schema");
  }
}

double QModel::q(std::span<const double> s, std::size_t action) const
{
  check_state(s, schema_);
  if (action >= action_count()) throw std::out_of_range("action index out of range");
  std::vector<double> x;
  encode(s, action, action_count(), x);
  return regressor_.predict(x);
}

void QModel::q_all(std::span<const double> s, std::span<double> out) const
{
  check_state(s, schema_);
  if (out.size() != action_count()) throw std::invalid_argument("output buffer has the wrong size");
  std::vector<double> x(s.size() + action_count(), 0.0);
  std::copy(s.begin(), s.end(), x.begin());
  for (std::size_t a = 0; a < action_count(); ++a) {
    x[s.size() + a] = 1.0;
    out[a] = regressor_.predict(x);
    x[s.size() + a] = 0.0;
  }
}

std::vector<double> QModel::q_all(std::span<const double> s) const
{
  std::vector<double> out(action_count());
  q_all(s, out);
  return out;
}

std::size_t QModel::greedy(std::span<const double> s) const
{
  const auto values = q_all(s);
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

void QModel::save(const std::string& path) const
{
  auto out = open_out(path);
  write_schema(out, kQMagic, schema_);
  regressor_.write(out);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

QModel QModel::load(const std::string& path, const ModelSchema& expected)
{
  QModel m = load(path);
  require_schema(m.schema_, expected);
  return m;
}

QModel QModel::load(const std::string& path)
{
  auto in = open_in(path);
  ModelSchema schema = read_schema(in, kQMagic);
  auto regressor = ml::ExtraTreesRegressor::read(in);
  return QModel(std::move(schema), std::move(regressor));
}

ActionClassifier::ActionClassifier(ModelSchema schema, ml::ExtraTreesClassifier classifier)
    : schema_(std::move(schema)), classifier_(std::move(classifier))
{
  if (classifier_.n_features() != schema_.feature_names.size() ||
      classifier_.n_classes() != schema_.action_set.size()) {
    throw ModelSchemaMismatch("classifier shape does not match the schema");
  }
}

ActionClassifier ActionClassifier::fit(std::span<const Transition> transitions, const ModelSchema& schema,
                                       const ml::ForestConfig& cfg)
{
  if (transitions.empty()) throw ml::EmptyTrainingSet("corpus has no transitions");
  Matrix x;
  std::vector<std::size_t> labels;
  for (const auto& t : transitions) {
    check_state(t.state_before, schema);
    x.push_row(t.state_before);
    labels.push_back(t.action);
  }
  return ActionClassifier(schema, ml::ExtraTreesClassifier::fit(x, labels, schema.action_set.size(), cfg));
}

std::vector<double> ActionClassifier::proba(std::span<const double> s) const
{
  check_state(s, schema_);
  return classifier_.predict_proba(s);
}

void ActionClassifier::proba(std::span<const double> s, std::span<double> out) const
{
  check_state(s, schema_);
  classifier_.predict_proba(s, out);
}

std::size_t ActionClassifier::predict(std::span<const double> s) const
{
  check_state(s, schema_);
  return classifier_.predict(s);
}

void ActionClassifier::save(const std::string& path) const
{
  auto out = open_out(path);
  write_schema(out, kClfMagic, schema_);
  classifier_.write(out);
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

ActionClassifier ActionClassifier::load(const std::string& path, const ModelSchema& expected)
{
  auto in = open_in(path);
  ModelSchema schema = read_schema(in, kClfMagic);
  require_schema(schema, expected);
  auto clf = ml::ExtraTreesClassifier::read(in);
  return ActionClassifier(std::move(schema), std::move(clf));
}

void FittedQConfig::validate() const
{
  if (l_max == 0) throw std::invalid_argument("l_max must be at least 1");
  if (trees == 0) throw std::invalid_argument("trees must be at least 1");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("gamma must lie in [0, 1]");
  if (n_min == 0) throw std::invalid_argument("n_min must be at least 1");
}

ml::ForestConfig FittedQConfig::forest(std::size_t iteration) const
{
  return {trees, k_features, n_min, derive_seed(seed, iteration)};
}

FittedQResult fitted_q_iteration(std::span<const Transition> transitions, const ModelSchema& schema,
                                 const RewardFunction& reward, const FittedQConfig& cfg)
{
  cfg.validate();
  check_transitions(transitions, schema);
  const std::size_t n = transitions.size();
  const std::size_t n_actions = schema.action_set.size();
  const Matrix x = design_matrix(transitions, n_actions);
  const std::vector<double> r = immediate_rewards(transitions, reward);

  FittedQResult result;
  std::vector<double> targets(n, 0.0);
  std::vector<double> next(n);
  for (std::size_t l = 1; l <= cfg.l_max; ++l) {
    if (l == 1) {
      next = r;
    } else {
      parallel_for(n, [&](std::size_t i) {
        const auto& t = transitions[i];
        if (t.is_terminal) {
          next[i] = r[i];
          return;
        }
        const auto q = result.model.q_all(t.state_after);
        next[i] = r[i] + cfg.gamma * *std::max_element(q.begin(), q.end());
      });
      result.residuals.push_back(max_abs_diff(next, targets));
    }
    targets.swap(next);
    result.model = QModel(schema, ml::ExtraTreesRegressor::fit(x, targets, cfg.forest(l)));
  }
  return result;
}

double evaluate_policy_on_corpus(const CorpusPolicy& policy, std::span<const Transition> transitions,
                                 const ModelSchema& schema, const RewardFunction& reward,
                                 const FittedQConfig& cfg)
{
  cfg.validate();
  check_transitions(transitions, schema);
  const std::size_t n = transitions.size();
  const std::size_t n_actions = schema.action_set.size();
  const Matrix x = design_matrix(transitions, n_actions);
  const std::vector<double> r = immediate_rewards(transitions, reward);

  std::vector<std::size_t> next_action(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    if (transitions[i].is_terminal) continue;
    next_action[i] = policy(transitions[i].state_after);
    if (next_action[i] >= n_actions) throw std::out_of_range("policy returned an action outside the action set");
  }

  std::vector<double> targets(n, 0.0);
  QModel model;
  for (std::size_t l = 1; l <= cfg.l_max; ++l) {
    if (l == 1) {
      targets = r;
    } else {
      std::vector<double> next(n);
      parallel_for(n, [&](std::size_t i) {
        const auto& t = transitions[i];
        next[i] = t.is_terminal ? r[i] : r[i] + cfg.gamma * model.q(t.state_after, next_action[i]);
      });
      targets.swap(next);
    }
    if (l < cfg.l_max) model = QModel(schema, ml::ExtraTreesRegressor::fit(x, targets, cfg.forest(l)));
  }

  double total = 0.0;
  std::size_t starts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i == 0 || transitions[i].dialog_id != transitions[i - 1].dialog_id) {
      total += targets[i];
      ++starts;
    }
  }
  return total / static_cast<double>(starts);
}

FitnessTable build_fitness_table(std::span<const Transition> transitions, const QModel& q,
                                 const ActionClassifier* classifier)
{
  FitnessTable table;
  table.schema = q.schema();
  if (classifier != nullptr && !(classifier->schema() == q.schema())) {
    throw ModelSchemaMismatch("classifier and Q model schemas differ");
  }
  const std::size_t n = transitions.size();
  const std::size_t n_actions = q.action_count();
  for (const auto& t : transitions) table.states.push_row(t.state_before);
  table.q = Matrix(n, n_actions);
  if (classifier != nullptr) table.proba = Matrix(n, n_actions);
  table.greedy.assign(n, 0);
  parallel_for(n, [&](std::size_t i) {
    const auto s = table.states.row(i);
    auto qi = table.q.row(i);
    q.q_all(s, qi);
    table.greedy[i] = static_cast<std::size_t>(std::max_element(qi.begin(), qi.end()) - qi.begin());
    if (classifier != nullptr) classifier->proba(s, table.proba.row(i));
  });
  return table;
}

void QValConfig::validate() const
{
  if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("delta must lie in [0, 1]");
  if (!std::isfinite(r_punish)) throw std::invalid_argument("r_punish must be finite");
}

void require_no_structural_params(const dsl::TemplateAst& ast)
{
  if (ast.has_structural_params()) {
    throw dsl::PolicyError(dsl::PolicyError::Kind::StructuralParamForbidden,
                           "corpus fitness does not support structural action parameters");
  }
}

double fitness_npoints(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                       const FitnessTable& table)
{
  const BoundTemplate pi = bind(std::move(ast), params, table.schema);
  double count = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (pi(table.states.row(i)) == table.greedy[i]) count += 1.0;
  }
  return count;
}

double fitness_qval(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                    const FitnessTable& table, const QValConfig& cfg)
{
  cfg.validate();
  if (table.proba.rows != table.size()) {
    throw std::invalid_argument("QVal fitness needs a table built with a classifier");
  }
  const BoundTemplate pi = bind(std::move(ast), params, table.schema);
  double total = 0.0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const std::size_t a = pi(table.states.row(i));
    total += table.proba.at(i, a) > cfg.delta ? table.q.at(i, a) : cfg.r_punish;
  }
  return total;
}

CorpusPolicy corpus_policy(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                           const ModelSchema& schema)
{
  auto bound = std::make_shared<const BoundTemplate>(bind(std::move(ast), params, schema));
  return [bound](std::span<const double> s) { return (*bound)(s); };
}

ComparisonDms build_comparison_dms(std::shared_ptr<const QModel> q, std::shared_ptr<const ActionClassifier> clf,
                                   double delta)
{
  if (!(q->schema() == clf->schema())) throw ModelSchemaMismatch("classifier and Q model schemas differ");
  ComparisonDms dms;
  dms.sl_original = [clf](std::span<const double> s) { return clf->predict(s); };
  dms.sl_max_q = [q](std::span<const double> s) { return q->greedy(s); };
  dms.thresholded_q = [q, clf, delta](std::span<const double> s) {
    const auto p = clf->proba(s);
    const auto values = q->q_all(s);
    std::size_t best = p.size();
    for (std::size_t a = 0; a < p.size(); ++a) {
      if (p[a] > delta && (best == p.size() || values[a] > values[best])) best = a;
    }
    return best == p.size() ? clf->predict(s) : best;
  };
  return dms;
}

ModelSchema schema_of(const corpus::CorpusHeader& header)
{
  return {header.schema_version, header.feature_names, header.action_set};
}

}  // namespace gadm::rl
