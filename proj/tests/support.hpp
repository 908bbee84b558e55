#pragma once

// Shared fixtures: a random template generator, the chain MDP and a small
// synthetic corpus.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gadm/batch_rl.hpp"
#include "gadm/corpus_io.hpp"
#include "gadm/evolution.hpp"
#include "gadm/policy_dsl.hpp"
#include "gadm/random.hpp"

namespace gadm::testing {

// ---------------------------------------------------------------------------
// Random grammar-valid templates

inline std::string random_name(RandomStream& rng, const std::string& prefix, std::set<std::string>& used)
{
  static const char* const stems[] = {"score", "flag", "slot", "turn", "conf", "x", "Act", "go", "q_"};
  while (true) {
    std::string name = prefix + stems[rng.index(std::size(stems))] + std::to_string(rng.index(1000));
    if (used.insert(name).second) return name;
  }
}

inline dsl::CondExpr random_condition(RandomStream& rng, const dsl::Schema& schema,
                                      const std::vector<std::size_t>& bools, const std::vector<std::size_t>& nums,
                                      std::size_t& next_param, std::size_t depth)
{
  using dsl::CondExpr;
  if (depth > 0 && rng.bernoulli(0.45)) {
    const auto op = rng.bernoulli(0.5) ? dsl::LogicOp::And : dsl::LogicOp::Or;
    auto lhs = random_condition(rng, schema, bools, nums, next_param, depth - 1);
    auto rhs = random_condition(rng, schema, bools, nums, next_param, depth - 1);
    return CondExpr::logic(op, std::move(lhs), std::move(rhs));
  }
  if (nums.empty() || (!bools.empty() && rng.bernoulli(0.4))) {
    return CondExpr::boolean(bools[rng.index(bools.size())]);
  }
  static const dsl::Comparator cmps[] = {dsl::Comparator::Less, dsl::Comparator::Greater, dsl::Comparator::Equal};
  // Reuse an existing parameter now and then.
  const std::size_t param = next_param > 0 && rng.bernoulli(0.2) ? rng.index(next_param) : next_param++;
  return CondExpr::compare(nums[rng.index(nums.size())], cmps[rng.index(3)], param);
}

inline dsl::TemplateAst random_template(RandomStream& rng)
{
  dsl::TemplateAst ast;
  std::set<std::string> used;
  const std::size_t n_vars = 1 + rng.index(6);
  std::vector<std::size_t> bools;
  std::vector<std::size_t> nums;
  for (std::size_t i = 0; i < n_vars; ++i) {
    const bool is_bool = rng.bernoulli(0.5);
    (is_bool ? bools : nums).push_back(i);
    ast.schema.variables.push_back({random_name(rng, "v_", used), is_bool ? dsl::VarKind::Bool : dsl::VarKind::Num});
  }
  const std::size_t n_actions = 1 + rng.index(5);
  for (std::size_t i = 0; i < n_actions; ++i) {
    dsl::ActionDecl decl{random_name(rng, "A", used), {}};
    if (rng.bernoulli(0.3)) {
      std::set<std::string> args;
      const std::size_t n_args = 1 + rng.index(2);
      for (std::size_t a = 0; a < n_args; ++a) decl.arg_names.push_back(random_name(rng, "arg", args));
    }
    ast.schema.actions.push_back(std::move(decl));
  }

  std::size_t next_param = 0;
  const std::size_t n_clauses = 1 + rng.index(6);
  for (std::size_t c = 0; c < n_clauses; ++c) {
    dsl::Clause clause;
    if (rng.bernoulli(0.4)) clause.label = "c" + std::to_string(rng.index(4));
    if (c + 1 < n_clauses) {
      clause.condition = random_condition(rng, ast.schema, bools, nums, next_param, 3);
    }
    clause.action.action = rng.index(n_actions);
    for (const auto& arg : ast.schema.actions[clause.action.action].arg_names) {
      if (rng.bernoulli(0.6)) clause.action.structural_params.push_back({arg, next_param++});
    }
    ast.clauses.push_back(std::move(clause));
  }
  ast.param_count = next_param;
  return ast;
}

// ---------------------------------------------------------------------------
// Chain MDP
//
// States 0, 1, 2 (feature: state / 2). Action 1 advances; from state 2 it ends
// the dialog with reward 10. Action 0 returns to state 0 with reward 0.
// Optimal values with gamma 0.9: Q(s,1) = 8.1, 9, 10; Q(s,0) = 0.9 * 8.1.

inline constexpr double kChainGamma = 0.9;

inline rl::ModelSchema chain_schema()
{
  return {1, {"position"}, {"reset", "advance"}};
}

inline double chain_feature(std::size_t s)
{
  return static_cast<double>(s) / 2.0;
}

inline std::size_t chain_state(double feature)
{
  return static_cast<std::size_t>(std::lround(feature * 2.0));
}

inline double chain_reward(std::span<const double> s, std::size_t a, std::span<const double>)
{
  return (a == 1 && chain_state(s[0]) == 2) ? 10.0 : 0.0;
}

inline double chain_q_star(std::size_t s, std::size_t a)
{
  const double advance[] = {8.1, 9.0, 10.0};
  return a == 1 ? advance[s] : kChainGamma * advance[0];
}

/// Episodes from state 0 under a behaviour that advances with probability p_advance.
inline std::vector<corpus::Transition> chain_corpus(std::size_t episodes, double p_advance, std::uint64_t seed)
{
  RandomStream rng(seed);
  std::vector<corpus::Transition> out;
  for (std::size_t e = 0; e < episodes; ++e) {
    std::size_t s = 0;
    for (std::size_t t = 0;; ++t) {
      const std::size_t a = rng.bernoulli(p_advance) ? 1 : 0;
      const bool terminal = a == 1 && s == 2;
      const std::size_t next = a == 0 ? 0 : std::min<std::size_t>(s + 1, 2);
      out.push_back({"ep" + std::to_string(e), t, {chain_feature(s)}, a, {chain_feature(next)}, terminal});
      if (terminal) break;
      s = next;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus with random features over a fixed template vocabulary

inline corpus::CorpusHeader synthetic_header()
{
  corpus::CorpusHeader h;
  h.feature_names = {"f0", "f1", "f2", "f3"};
  h.action_set = {"a0", "a1", "a2"};
  h.reward_config = dialog::corpus_rewards();
  return h;
}

/// One single-turn dialog per state; the action is a noisy function of the features.
inline corpus::Corpus synthetic_corpus(std::size_t states, std::uint64_t seed)
{
  RandomStream rng(seed);
  std::vector<corpus::Transition> ts;
  for (std::size_t i = 0; i < states; ++i) {
    std::vector<double> s(4);
    for (double& v : s) v = rng.uniform();
    std::size_t a = s[0] < 0.4 ? 0 : (s[1] < 0.5 ? 1 : 2);
    if (rng.bernoulli(0.2)) a = rng.index(3);
    std::vector<double> sn(4);
    for (double& v : sn) v = rng.uniform();
    ts.push_back({"d" + std::to_string(i), 0, s, a, sn, true});
  }
  return corpus::make_corpus(synthetic_header(), ts);
}

/// Template over the synthetic schema; actions are declared in a different
/// order from the corpus action set so binding by name is exercised.
inline const char* const kSyntheticTemplate = R"(num f0
num f1
num f2
bool f3
action a2
action a1
action a0
%%
if f0 < p0 then a0
else if f1 < p1 and f2 > p2 then a1
else a2
)";

// ---------------------------------------------------------------------------

/// Counts decreases of the best-fitness trace.
inline std::size_t elitism_violations(std::span<const ga::GenerationStats> trace)
{
  std::size_t bad = 0;
  for (std::size_t g = 1; g < trace.size(); ++g) {
    if (trace[g].best < trace[g - 1].best) ++bad;
  }
  return bad;
}

}  // namespace gadm::testing
