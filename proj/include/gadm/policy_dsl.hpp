#pragma once

// Condition-action policy templates.
//
// A template file has two sections separated by a line holding `%%`:
//
//   bool dialog_start            # schema: state variables and action labels
//   num top_slu_score
//   action Welcome
//   action Repeat
//   action Offer(filter)         # optional structural argument names
//   %%
//   [c0] if dialog_start then Welcome
//   else [c1] if top_slu_score < p0 then Repeat
//   else Offer(filter=p1)
//
// Clauses are tried in source order and the first one whose condition holds
// fires. Free parameters are written p0, p1, ... and must be dense. `and`
// binds tighter than `or`; parentheses group. The optional `[label]` prefix
// names a clause so it can be ablated later.

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gadm::dsl {

enum class VarKind { Bool, Num };

struct Variable {
  std::string name;
  VarKind kind = VarKind::Num;
  bool operator==(const Variable&) const = default;
};

struct ActionDecl {
  std::string label;
  std::vector<std::string> arg_names;
  bool operator==(const ActionDecl&) const = default;
};

struct Schema {
  std::vector<Variable> variables;
  std::vector<ActionDecl> actions;

  std::optional<std::size_t> find_variable(std::string_view name) const;
  std::optional<std::size_t> find_action(std::string_view label) const;
  bool operator==(const Schema&) const = default;
};

enum class Comparator { Less, Greater, Equal };
enum class LogicOp { And, Or };

/// Values closer than this compare equal under `==`.
inline constexpr double kEqualityTolerance = 1e-9;

/// Binary condition tree. Leaves are boolean variables or
/// `<num-var> <comparator> <param>` comparisons.
struct CondExpr {
  enum class Kind { BoolVar, Compare, Logic };

  Kind kind = Kind::BoolVar;
  std::size_t variable = 0;
  Comparator comparator = Comparator::Less;
  std::size_t param = 0;
  LogicOp op = LogicOp::And;
  std::vector<CondExpr> operands;  // exactly two for Kind::Logic

  static CondExpr boolean(std::size_t variable);
  static CondExpr compare(std::size_t variable, Comparator cmp, std::size_t param);
  static CondExpr logic(LogicOp op, CondExpr lhs, CondExpr rhs);

  bool operator==(const CondExpr&) const = default;
};

struct StructuralArg {
  std::string name;
  std::size_t param = 0;
  bool operator==(const StructuralArg&) const = default;
};

struct ActionSpec {
  std::size_t action = 0;  // index into Schema::actions
  std::vector<StructuralArg> structural_params;
  bool operator==(const ActionSpec&) const = default;
};

struct Clause {
  std::string label;                 // empty when unlabelled
  std::optional<CondExpr> condition;  // absent only on the terminal clause
  ActionSpec action;
  bool operator==(const Clause&) const = default;
};

struct TemplateAst {
  Schema schema;
  std::vector<Clause> clauses;
  std::size_t param_count = 0;

  bool has_structural_params() const;
  const std::string& action_label(std::size_t clause) const;
  bool operator==(const TemplateAst&) const = default;
};

/// Fixed-length real vector with every component in [0, 1].
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::vector<double> values);

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const noexcept { return values_; }
  void set(std::size_t i, double value);

  bool operator==(const ParameterVector&) const = default;

 private:
  std::vector<double> values_;
};

struct SourcePos {
  std::size_t line = 0;
  std::size_t column = 0;
};

class TemplateError : public std::runtime_error {
 public:
  enum class Kind { Syntax, UnknownIdentifier, DanglingElse, ParameterGap, DuplicateDeclaration };

  TemplateError(Kind kind, SourcePos pos, const std::string& message);

  Kind kind() const noexcept { return kind_; }
  SourcePos position() const noexcept { return pos_; }

 private:
  Kind kind_;
  SourcePos pos_;
};

class PolicyError : public std::runtime_error {
 public:
  enum class Kind { ArityMismatch, MissingStateVariable, UnknownAction, StructuralParamForbidden };

  PolicyError(Kind kind, const std::string& message);
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Parses a complete template file (schema, `%%`, policy body).
TemplateAst parse_template(std::string_view source);

/// Parses a policy body against an already-known schema.
TemplateAst parse_policy(std::string_view body, Schema schema);

/// Canonical policy body text. parse_policy(pretty_print(ast), ast.schema) == ast.
std::string pretty_print(const TemplateAst& ast);

/// Body with every pN replaced by its bound value. For display only; the
/// output is not valid template syntax.
std::string render_instantiated(const TemplateAst& ast, const ParameterVector& params);

/// Full file text (schema, `%%`, body). parse_template(format_template_file(ast)) == ast.
std::string format_template_file(const TemplateAst& ast);

/// Removes every clause carrying `label` and renumbers the surviving
/// parameters densely, preserving their relative order.
TemplateAst ablate(const TemplateAst& ast, std::string_view label);

struct BoundArg {
  std::string name;
  double value = 0.0;
};

struct ActionDecision {
  std::size_t clause = 0;
  std::size_t action = 0;
  std::string label;
  std::vector<BoundArg> structural;
};

/// First-match evaluation. `state` holds one value per schema variable, in
/// declaration order; boolean variables are true when > 0.5.
ActionDecision evaluate_policy(const TemplateAst& ast, const ParameterVector& params,
                               std::span<const double> state);

/// Index of the firing clause; the allocation-free core of evaluate_policy.
std::size_t select_clause(const TemplateAst& ast, std::span<const double> params,
                          std::span<const double> state);

/// A template with frozen parameters, bound by name to the columns of a
/// feature vector. Immutable and safe to share across threads.
class Policy {
 public:
  Policy(std::shared_ptr<const TemplateAst> ast, ParameterVector params,
         std::span<const std::string> feature_names);

  std::size_t select(std::span<const double> features) const;
  std::size_t action(std::span<const double> features) const;
  ActionDecision decide(std::span<const double> features) const;

  const TemplateAst& ast() const noexcept { return *ast_; }
  std::shared_ptr<const TemplateAst> ast_ptr() const noexcept { return ast_; }
  const ParameterVector& params() const noexcept { return params_; }

 private:
  std::shared_ptr<const TemplateAst> ast_;
  ParameterVector params_;
  std::vector<std::size_t> columns_;  // schema variable -> feature column
  std::size_t feature_count_ = 0;
};

}  // namespace gadm::dsl
