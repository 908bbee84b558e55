#include "gadm/policy_dsl.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace gadm::dsl {

// ---------------------------------------------------------------------------
// Schema / AST helpers

std::optional<std::size_t> Schema::find_variable(std::string_view name) const
{
  for (std::size_t i = 0; i < variables.size(); ++i) {
    if (variables[i].name == name) {
      return i;
    }
  }
  return std::nullopt;
}

std::optional<std::size_t> Schema::find_action(std::string_view label) const
{
  for (std::size_t i = 0; i < actions.size(); ++i) {
    if (actions[i].label == label) {
      return i;
    }
  }
  return std::nullopt;
}

CondExpr CondExpr::boolean(std::size_t variable)
{
  CondExpr e;
  e.kind = Kind::BoolVar;
  e.variable = variable;
  return e;
}

CondExpr CondExpr::compare(std::size_t variable, Comparator cmp, std::size_t param)
{
  CondExpr e;
  e.kind = Kind::Compare;
  e.variable = variable;
  e.comparator = cmp;
  e.param = param;
  return e;
}

CondExpr CondExpr::logic(LogicOp op, CondExpr lhs, CondExpr rhs)
{
  CondExpr e;
  e.kind = Kind::Logic;
  e.op = op;
  e.operands.reserve(2);
  e.operands.push_back(std::move(lhs));
  e.operands.push_back(std::move(rhs));
  return e;
}

bool TemplateAst::has_structural_params() const
{
  return std::any_of(clauses.begin(), clauses.end(),
                     [](const Clause& c) { return !c.action.structural_params.empty(); });
}

const std::string& TemplateAst::action_label(std::size_t clause) const
{
  return schema.actions.at(clauses.at(clause).action.action).label;
}

ParameterVector::ParameterVector(std::vector<double> values) : values_(std::move(values))
{
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!(values_[i] >= 0.0 && values_[i] <= 1.0)) {
      throw std::out_of_range("parameter " + std::to_string(i) + " outside [0, 1]");
    }
  }
}

void ParameterVector::set(std::size_t i, double value)
{
  if (!(value >= 0.0 && value <= 1.0)) {
    throw std::out_of_range("parameter " + std::to_string(i) + " outside [0, 1]");
  }
  values_.at(i) = value;
}

namespace {

std::string format_pos(SourcePos pos)
{
  return std::to_string(pos.line) + ":" + std::to_string(pos.column);
}

}  // namespace

TemplateError::TemplateError(Kind kind, SourcePos pos, const std::string& message)
    : std::runtime_error(format_pos(pos) + ": " + message), kind_(kind), pos_(pos)
{
}

PolicyError::PolicyError(Kind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind)
{
}

// ---------------------------------------------------------------------------
// Lexer

namespace {

enum class Tok {
  Ident,
  Param,
  If,
  Then,
  Else,
  And,
  Or,
  Bool,
  Num,
  Action,
  Less,
  Greater,
  EqualEqual,
  Assign,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Comma,
  Separator,
  End,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::size_t param = 0;
  SourcePos pos;
};

bool is_ident_start(char c)
{
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c)
{
  return is_ident_start(c) || (c >= '0' && c <= '9');
}

std::vector<Token> lex(std::string_view src)
{
  static const std::map<std::string_view, Tok> keywords = {
      {"if", Tok::If},     {"then", Tok::Then}, {"else", Tok::Else},
      {"and", Tok::And},   {"or", Tok::Or},     {"bool", Tok::Bool},
      {"num", Tok::Num},   {"action", Tok::Action},
  };

  std::vector<Token> out;
  std::size_t i = 0;
  std::size_t line = 1;
  std::size_t col = 1;
  auto advance = [&](std::size_t n) {
    i += n;
    col += n;
  };

  while (i < src.size()) {
    const char c = src[i];
    if (c == '\n') {
      ++i;
      ++line;
      col = 1;
      continue;
    }
    if (c == ' ' || c == '\t' || c == '\r') {
      advance(1);
      continue;
    }
    if (c == '#') {
      while (i < src.size() && src[i] != '\n') {
        ++i;
      }
      continue;
    }

    Token tok;
    tok.pos = {line, col};
    if (is_ident_start(c)) {
      std::size_t j = i;
      while (j < src.size() && is_ident_char(src[j])) {
        ++j;
      }
      tok.text = std::string(src.substr(i, j - i));
      if (auto kw = keywords.find(tok.text); kw != keywords.end()) {
        tok.kind = kw->second;
      } else if (tok.text.size() > 1 && tok.text[0] == 'p' &&
                 std::all_of(tok.text.begin() + 1, tok.text.end(),
                             [](char d) { return d >= '0' && d <= '9'; })) {
        tok.kind = Tok::Param;
        const auto* first = tok.text.data() + 1;
        const auto* last = tok.text.data() + tok.text.size();
        auto [ptr, ec] = std::from_chars(first, last, tok.param);
        if (ec != std::errc{} || ptr != last || tok.param > 100000) {
          throw TemplateError(TemplateError::Kind::Syntax, tok.pos,
                              "parameter index out of range in '" + tok.text + "'");
        }
      } else {
        tok.kind = Tok::Ident;
      }
      advance(j - i);
      out.push_back(std::move(tok));
      continue;
    }

    auto single = [&](Tok kind, std::size_t len) {
      tok.kind = kind;
      tok.text = std::string(src.substr(i, len));
      advance(len);
      out.push_back(tok);
    };
    switch (c) {
      case '<': single(Tok::Less, 1); continue;
      case '>': single(Tok::Greater, 1); continue;
      case '(': single(Tok::LParen, 1); continue;
      case ')': single(Tok::RParen, 1); continue;
      case '[': single(Tok::LBracket, 1); continue;
      case ']': single(Tok::RBracket, 1); continue;
      case ',': single(Tok::Comma, 1); continue;
      case '=':
        if (i + 1 < src.size() && src[i + 1] == '=') {
          single(Tok::EqualEqual, 2);
        } else {
          single(Tok::Assign, 1);
        }
        continue;
      case '%':
        if (i + 1 < src.size() && src[i + 1] == '%') {
          single(Tok::Separator, 2);
          continue;
        }
        break;
      default:
        break;
    }
    std::string shown(1, c);
    if (static_cast<unsigned char>(c) >= 0x80) {
      shown = "non-ASCII byte";
    }
    throw TemplateError(TemplateError::Kind::Syntax, tok.pos, "unexpected character '" + shown + "'");
  }

  Token end;
  end.kind = Tok::End;
  end.pos = {line, col};
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::vector<Token> tokens) : tokens_(std::move(tokens)) {}

  Schema parse_schema()
  {
    Schema schema;
    std::set<std::string> names;
    auto declare = [&](const Token& tok) {
      if (!names.insert(tok.text).second) {
        throw TemplateError(TemplateError::Kind::DuplicateDeclaration, tok.pos,
                            "'" + tok.text + "' is declared twice");
      }
    };

    while (peek().kind != Tok::Separator) {
      const Token& head = peek();
      if (head.kind == Tok::Bool || head.kind == Tok::Num) {
        next();
        const Token& name = expect(Tok::Ident, "variable name");
        declare(name);
        schema.variables.push_back({name.text, head.kind == Tok::Bool ? VarKind::Bool : VarKind::Num});
      } else if (head.kind == Tok::Action) {
        next();
        const Token& label = expect(Tok::Ident, "action label");
        declare(label);
        ActionDecl decl{label.text, {}};
        if (accept(Tok::LParen)) {
          do {
            const Token& arg = expect(Tok::Ident, "argument name");
            if (std::find(decl.arg_names.begin(), decl.arg_names.end(), arg.text) != decl.arg_names.end()) {
              throw TemplateError(TemplateError::Kind::DuplicateDeclaration, arg.pos,
                                  "argument '" + arg.text + "' declared twice");
            }
            decl.arg_names.push_back(arg.text);
          } while (accept(Tok::Comma));
          expect(Tok::RParen, "')'");
        }
        schema.actions.push_back(std::move(decl));
      } else if (head.kind == Tok::End) {
        throw TemplateError(TemplateError::Kind::Syntax, head.pos,
                            "missing '%%' line between schema and policy");
      } else {
        fail(head, "expected 'bool', 'num' or 'action' declaration");
      }
    }
    next();  // %%
    return schema;
  }

  TemplateAst parse_body(Schema schema)
  {
    schema_ = &schema;
    TemplateAst ast;
    const SourcePos body_start = peek().pos;

    while (true) {
      Clause clause;
      if (accept(Tok::LBracket)) {
        clause.label = expect(Tok::Ident, "clause label").text;
        expect(Tok::RBracket, "']'");
      }
      if (accept(Tok::If)) {
        clause.condition = parse_or();
        expect(Tok::Then, "'then'");
        clause.action = parse_action();
        ast.clauses.push_back(std::move(clause));
        if (peek().kind == Tok::End) {
          throw TemplateError(TemplateError::Kind::DanglingElse, peek().pos,
                              "policy must end with an unconditional 'else <action>'");
        }
        expect(Tok::Else, "'else'");
        if (peek().kind == Tok::End) {
          throw TemplateError(TemplateError::Kind::DanglingElse, peek().pos,
                              "'else' must be followed by an action or another clause");
        }
        continue;
      }
      if (peek().kind == Tok::End) {
        throw TemplateError(TemplateError::Kind::DanglingElse, peek().pos, "empty policy body");
      }
      clause.action = parse_action();
      ast.clauses.push_back(std::move(clause));
      if (peek().kind != Tok::End) {
        fail(peek(), "unexpected input after the terminal action");
      }
      break;
    }

    ast.param_count = param_uses_.empty() ? 0 : param_uses_.rbegin()->first + 1;
    if (param_uses_.size() != ast.param_count) {
      std::size_t missing = 0;
      while (param_uses_.count(missing) != 0) {
        ++missing;
      }
      const SourcePos at = param_uses_.rbegin()->second;
      throw TemplateError(TemplateError::Kind::ParameterGap, at.line == 0 ? body_start : at,
                          "free parameters must be numbered densely from p0; p" +
                              std::to_string(missing) + " is never used");
    }
    ast.schema = std::move(schema);
    return ast;
  }

 private:
  const Token& peek() const { return tokens_[pos_]; }

  const Token& next()
  {
    const Token& t = tokens_[pos_];
    if (t.kind != Tok::End) {
      ++pos_;
    }
    return t;
  }

  bool accept(Tok kind)
  {
    if (peek().kind == kind) {
      next();
      return true;
    }
    return false;
  }

  const Token& expect(Tok kind, const char* what)
  {
    if (peek().kind != kind) {
      fail(peek(), std::string("expected ") + what);
    }
    return next();
  }

  [[noreturn]] void fail(const Token& at, const std::string& message) const
  {
    std::string found = at.kind == Tok::End ? "end of input" : "'" + at.text + "'";
    throw TemplateError(TemplateError::Kind::Syntax, at.pos, message + ", found " + found);
  }

  std::size_t use_param(const Token& tok)
  {
    param_uses_.emplace(tok.param, tok.pos);
    return tok.param;
  }

  CondExpr parse_or()
  {
    CondExpr lhs = parse_and();
    while (accept(Tok::Or)) {
      lhs = CondExpr::logic(LogicOp::Or, std::move(lhs), parse_and());
    }
    return lhs;
  }

  CondExpr parse_and()
  {
    CondExpr lhs = parse_primary();
    while (accept(Tok::And)) {
      lhs = CondExpr::logic(LogicOp::And, std::move(lhs), parse_primary());
    }
    return lhs;
  }

  CondExpr parse_primary()
  {
    if (accept(Tok::LParen)) {
      CondExpr inner = parse_or();
      expect(Tok::RParen, "')'");
      return inner;
    }
    const Token& name = peek();
    if (name.kind != Tok::Ident) {
      fail(name, "expected a state variable or '('");
    }
    next();
    const auto var = schema_->find_variable(name.text);
    if (!var) {
      throw TemplateError(TemplateError::Kind::UnknownIdentifier, name.pos,
                          "unknown state variable '" + name.text + "'");
    }
    const Tok after = peek().kind;
    const bool is_cmp = after == Tok::Less || after == Tok::Greater || after == Tok::EqualEqual;
    if (schema_->variables[*var].kind == VarKind::Bool) {
      if (is_cmp) {
        fail(peek(), "boolean variable '" + name.text + "' cannot be compared");
      }
      return CondExpr::boolean(*var);
    }
    if (!is_cmp) {
      fail(peek(), "expected '<', '>' or '==' after numeric variable '" + name.text + "'");
    }
    const Comparator cmp = after == Tok::Less      ? Comparator::Less
                           : after == Tok::Greater ? Comparator::Greater
                                                   : Comparator::Equal;
    next();
    const Token& param = expect(Tok::Param, "free parameter (p0, p1, ...)");
    return CondExpr::compare(*var, cmp, use_param(param));
  }

  ActionSpec parse_action()
  {
    const Token& label = peek();
    if (label.kind != Tok::Ident) {
      fail(label, "expected an action label");
    }
    next();
    const auto action = schema_->find_action(label.text);
    if (!action) {
      throw TemplateError(TemplateError::Kind::UnknownIdentifier, label.pos,
                          "unknown action '" + label.text + "'");
    }
    ActionSpec spec{*action, {}};
    if (accept(Tok::LParen)) {
      const auto& allowed = schema_->actions[*action].arg_names;
      do {
        const Token& arg = expect(Tok::Ident, "argument name");
        if (std::find(allowed.begin(), allowed.end(), arg.text) == allowed.end()) {
          throw TemplateError(TemplateError::Kind::UnknownIdentifier, arg.pos,
                              "action '" + label.text + "' has no argument '" + arg.text + "'");
        }
        for (const auto& existing : spec.structural_params) {
          if (existing.name == arg.text) {
            fail(arg, "argument '" + arg.text + "' given twice");
          }
        }
        expect(Tok::Assign, "'='");
        const Token& param = expect(Tok::Param, "free parameter (p0, p1, ...)");
        spec.structural_params.push_back({arg.text, use_param(param)});
      } while (accept(Tok::Comma));
      expect(Tok::RParen, "')'");
    }
    return spec;
  }

  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
  const Schema* schema_ = nullptr;
  std::map<std::size_t, SourcePos> param_uses_;
};

// ---------------------------------------------------------------------------
// Printer

using ParamFormatter = std::function<std::string(std::size_t)>;

const char* comparator_text(Comparator cmp)
{
  switch (cmp) {
    case Comparator::Less: return "<";
    case Comparator::Greater: return ">";
    case Comparator::Equal: return "==";
  }
  return "?";
}

void print_cond(std::ostream& os, const Schema& schema, const CondExpr& e, const ParamFormatter& param,
                const CondExpr* parent, bool is_right)
{
  switch (e.kind) {
    case CondExpr::Kind::BoolVar:
      os << schema.variables.at(e.variable).name;
      return;
    case CondExpr::Kind::Compare:
      os << schema.variables.at(e.variable).name << ' ' << comparator_text(e.comparator) << ' '
         << param(e.param);
      return;
    case CondExpr::Kind::Logic: {
      // Parenthesize mixed nesting and right-nested chains so the left-assoc
      // parser rebuilds exactly this tree.
      const bool parens = parent != nullptr && (parent->op != e.op || is_right);
      if (parens) os << '(';
      print_cond(os, schema, e.operands[0], param, &e, false);
      os << (e.op == LogicOp::And ? " and " : " or ");
      print_cond(os, schema, e.operands[1], param, &e, true);
      if (parens) os << ')';
      return;
    }
  }
}

void print_action(std::ostream& os, const Schema& schema, const ActionSpec& spec, const ParamFormatter& param)
{
  os << schema.actions.at(spec.action).label;
  if (!spec.structural_params.empty()) {
    os << '(';
    for (std::size_t i = 0; i < spec.structural_params.size(); ++i) {
      if (i > 0) os << ", ";
      os << spec.structural_params[i].name << '=' << param(spec.structural_params[i].param);
    }
    os << ')';
  }
}

std::string print_body(const TemplateAst& ast, const ParamFormatter& param)
{
  std::ostringstream os;
  for (std::size_t i = 0; i < ast.clauses.size(); ++i) {
    const Clause& c = ast.clauses[i];
    if (i > 0) os << "\nelse ";
    if (!c.label.empty()) os << '[' << c.label << "] ";
    if (c.condition) {
      os << "if ";
      print_cond(os, ast.schema, *c.condition, param, nullptr, false);
      os << " then ";
    }
    print_action(os, ast.schema, c.action, param);
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Evaluation

template <class Get>
bool eval_cond(const CondExpr& e, std::span<const double> params, const Get& get)
{
  switch (e.kind) {
    case CondExpr::Kind::BoolVar:
      return get(e.variable) > 0.5;
    case CondExpr::Kind::Compare: {
      const double v = get(e.variable);
      const double p = params[e.param];
      switch (e.comparator) {
        case Comparator::Less: return v < p;
        case Comparator::Greater: return v > p;
        case Comparator::Equal: return std::fabs(v - p) <= kEqualityTolerance;
      }
      return false;
    }
    case CondExpr::Kind::Logic:
      if (e.op == LogicOp::And) {
        return eval_cond(e.operands[0], params, get) && eval_cond(e.operands[1], params, get);
      }
      return eval_cond(e.operands[0], params, get) || eval_cond(e.operands[1], params, get);
  }
  return false;
}

template <class Get>
std::size_t first_match(const TemplateAst& ast, std::span<const double> params, const Get& get)
{
  const std::size_t last = ast.clauses.size() - 1;
  for (std::size_t i = 0; i < last; ++i) {
    if (eval_cond(*ast.clauses[i].condition, params, get)) {
      return i;
    }
  }
  return last;
}

void check_arity(const TemplateAst& ast, std::size_t given)
{
  if (given != ast.param_count) {
    throw PolicyError(PolicyError::Kind::ArityMismatch,
                      "template has " + std::to_string(ast.param_count) + " free parameters, got " +
                          std::to_string(given));
  }
}

ActionDecision make_decision(const TemplateAst& ast, std::span<const double> params, std::size_t clause)
{
  const ActionSpec& spec = ast.clauses[clause].action;
  ActionDecision d;
  d.clause = clause;
  d.action = spec.action;
  d.label = ast.schema.actions[spec.action].label;
  d.structural.reserve(spec.structural_params.size());
  for (const auto& arg : spec.structural_params) {
    d.structural.push_back({arg.name, params[arg.param]});
  }
  return d;
}

void remap_params(CondExpr& e, const std::vector<std::size_t>& mapping)
{
  if (e.kind == CondExpr::Kind::Compare) {
    e.param = mapping[e.param];
  }
  for (auto& child : e.operands) {
    remap_params(child, mapping);
  }
}

void collect_params(const CondExpr& e, std::set<std::size_t>& used)
{
  if (e.kind == CondExpr::Kind::Compare) {
    used.insert(e.param);
  }
  for (const auto& child : e.operands) {
    collect_params(child, used);
  }
}

}  // namespace

TemplateAst parse_template(std::string_view source)
{
  Parser parser(lex(source));
  Schema schema = parser.parse_schema();
  return parser.parse_body(std::move(schema));
}

TemplateAst parse_policy(std::string_view body, Schema schema)
{
  Parser parser(lex(body));
  return parser.parse_body(std::move(schema));
}

std::string pretty_print(const TemplateAst& ast)
{
  return print_body(ast, [](std::size_t i) { return "p" + std::to_string(i); });
}

std::string render_instantiated(const TemplateAst& ast, const ParameterVector& params)
{
  check_arity(ast, params.size());
  return print_body(ast, [&](std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", params[i]);
    return std::string(buf);
  });
}

std::string format_template_file(const TemplateAst& ast)
{
  std::ostringstream os;
  for (const auto& v : ast.schema.variables) {
    os << (v.kind == VarKind::Bool ? "bool " : "num ") << v.name << '\n';
  }
  for (const auto& a : ast.schema.actions) {
    os << "action " << a.label;
    if (!a.arg_names.empty()) {
      os << '(';
      for (std::size_t i = 0; i < a.arg_names.size(); ++i) {
        if (i > 0) os << ", ";
        os << a.arg_names[i];
      }
      os << ')';
    }
    os << '\n';
  }
  os << "%%\n" << pretty_print(ast) << '\n';
  return os.str();
}

TemplateAst ablate(const TemplateAst& ast, std::string_view label)
{
  if (label.empty()) {
    throw std::invalid_argument("ablation needs a clause label");
  }
  if (ast.clauses.back().label == label) {
    throw std::invalid_argument("cannot ablate the terminal clause '" + std::string(label) + "'");
  }
  TemplateAst out;
  out.schema = ast.schema;
  for (const auto& c : ast.clauses) {
    if (c.label != label) {
      out.clauses.push_back(c);
    }
  }
  if (out.clauses.size() == ast.clauses.size()) {
    throw std::invalid_argument("no clause labelled '" + std::string(label) + "'");
  }

  std::set<std::size_t> used;
  for (const auto& c : out.clauses) {
    if (c.condition) collect_params(*c.condition, used);
    for (const auto& arg : c.action.structural_params) used.insert(arg.param);
  }
  std::vector<std::size_t> mapping(ast.param_count, 0);
  std::size_t next_index = 0;
  for (std::size_t p : used) {
    mapping[p] = next_index++;
  }
  for (auto& c : out.clauses) {
    if (c.condition) remap_params(*c.condition, mapping);
    for (auto& arg : c.action.structural_params) arg.param = mapping[arg.param];
  }
  out.param_count = next_index;
  return out;
}

std::size_t select_clause(const TemplateAst& ast, std::span<const double> params,
                          std::span<const double> state)
{
  check_arity(ast, params.size());
  const auto& vars = ast.schema.variables;
  if (state.size() < vars.size()) {
    throw PolicyError(PolicyError::Kind::MissingStateVariable,
                      "state lacks variable '" + vars[state.size()].name + "'");
  }
  if (state.size() > vars.size()) {
    throw PolicyError(PolicyError::Kind::ArityMismatch,
                      "state has " + std::to_string(state.size()) + " values, schema declares " +
                          std::to_string(vars.size()));
  }
  return first_match(ast, params, [&](std::size_t v) { return state[v]; });
}

ActionDecision evaluate_policy(const TemplateAst& ast, const ParameterVector& params,
                               std::span<const double> state)
{
  return make_decision(ast, params.values(), select_clause(ast, params.values(), state));
}

Policy::Policy(std::shared_ptr<const TemplateAst> ast, ParameterVector params,
               std::span<const std::string> feature_names)
    : ast_(std::move(ast)), params_(std::move(params)), feature_count_(feature_names.size())
{
  check_arity(*ast_, params_.size());
  columns_.reserve(ast_->schema.variables.size());
  for (const auto& var : ast_->schema.variables) {
    const auto it = std::find(feature_names.begin(), feature_names.end(), var.name);
    if (it == feature_names.end()) {
      throw PolicyError(PolicyError::Kind::MissingStateVariable,
                        "state features lack variable '" + var.name + "'");
    }
    columns_.push_back(static_cast<std::size_t>(it - feature_names.begin()));
  }
}

std::size_t Policy::select(std::span<const double> features) const
{
  if (features.size() != feature_count_) {
    throw PolicyError(PolicyError::Kind::MissingStateVariable,
                      "expected " + std::to_string(feature_count_) + " state features, got " +
                          std::to_string(features.size()));
  }
  return first_match(*ast_, params_.values(), [&](std::size_t v) { return features[columns_[v]]; });
}

std::size_t Policy::action(std::span<const double> features) const
{
  return ast_->clauses[select(features)].action.action;
}

ActionDecision Policy::decide(std::span<const double> features) const
{
  return make_decision(*ast_, params_.values(), select(features));
}

}  // namespace gadm::dsl
