#include "gadm/corpus_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "gadm/random.hpp"

namespace gadm::corpus {

using nlohmann::json;

CorpusError::CorpusError(Kind kind, std::size_t line, const std::string& message)
    : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + message : message),
      kind_(kind),
      line_(line)
{
}

std::size_t CorpusHeader::action_index(std::string_view label) const
{
  const auto it = std::find(action_set.begin(), action_set.end(), label);
  if (it == action_set.end()) {
    throw CorpusError(CorpusError::Kind::SchemaMismatch, 0,
                      "action '" + std::string(label) + "' is not in the corpus action set");
  }
  return static_cast<std::size_t>(it - action_set.begin());
}

std::size_t Corpus::transition_count() const
{
  std::size_t n = 0;
  for (const auto& d : dialogs) n += d.turns.size();
  return n;
}

std::vector<Transition> Corpus::transitions() const
{
  std::vector<Transition> out;
  out.reserve(transition_count());
  for (const auto& d : dialogs) {
    out.insert(out.end(), d.turns.begin(), d.turns.end());
  }
  return out;
}

void Corpus::validate() const
{
  const std::size_t width = header.feature_names.size();
  for (const auto& d : dialogs) {
    if (d.turns.empty()) {
      throw CorpusError(CorpusError::Kind::Malformed, 0, "dialog '" + d.id + "' has no turns");
    }
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const Transition& tr = d.turns[t];
      if (tr.dialog_id != d.id || tr.turn != t) {
        throw CorpusError(CorpusError::Kind::Malformed, 0,
                          "dialog '" + d.id + "': turns must be numbered consecutively from 0");
      }
      if (tr.state_before.size() != width || tr.state_after.size() != width) {
        throw CorpusError(CorpusError::Kind::SchemaMismatch, 0,
                          "dialog '" + d.id + "' turn " + std::to_string(t) + ": feature arity mismatch");
      }
      if (tr.action >= header.action_set.size()) {
        throw CorpusError(CorpusError::Kind::SchemaMismatch, 0,
                          "dialog '" + d.id + "' turn " + std::to_string(t) + ": action out of range");
      }
      const bool last = t + 1 == d.turns.size();
      if (tr.is_terminal && !last) {
        throw CorpusError(CorpusError::Kind::Malformed, 0,
                          "dialog '" + d.id + "' continues after its terminal turn");
      }
      if (last && !tr.is_terminal) {
        throw CorpusError(CorpusError::Kind::MissingTerminal, 0, "dialog '" + d.id + "' has no terminal turn");
      }
    }
  }
}

Corpus make_corpus(CorpusHeader header, std::span<const Transition> transitions)
{
  Corpus c;
  c.header = std::move(header);
  std::map<std::string, bool> seen;
  for (const auto& tr : transitions) {
    if (c.dialogs.empty() || c.dialogs.back().id != tr.dialog_id) {
      if (seen.count(tr.dialog_id) != 0) {
        throw CorpusError(CorpusError::Kind::Malformed, 0,
                          "dialog '" + tr.dialog_id + "' is split across non-adjacent records");
      }
      seen[tr.dialog_id] = true;
      c.dialogs.push_back({tr.dialog_id, {}});
    }
    c.dialogs.back().turns.push_back(tr);
  }
  c.validate();
  return c;
}

namespace {

void write_real(std::string& out, double v)
{
  if (!std::isfinite(v)) {
    throw CorpusError(CorpusError::Kind::Malformed, 0, "non-finite value cannot be serialized");
  }
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

void write_reals(std::string& out, std::span<const double> values)
{
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    write_real(out, values[i]);
  }
  out += ']';
}

void write_strings(std::string& out, std::span<const std::string> values)
{
  out += '[';
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i > 0) out += ',';
    out += json(values[i]).dump();
  }
  out += ']';
}

std::vector<double> read_reals(const json& j, const char* key, std::size_t line)
{
  const json& arr = j.at(key);
  if (!arr.is_array()) {
    throw CorpusError(CorpusError::Kind::ParseError, line, std::string("'") + key + "' must be an array");
  }
  std::vector<double> out;
  out.reserve(arr.size());
  for (const auto& v : arr) {
    if (!v.is_number()) {
      throw CorpusError(CorpusError::Kind::ParseError, line, std::string("'") + key + "' must hold numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

std::string serialize_corpus(const Corpus& corpus)
{
  const CorpusHeader& h = corpus.header;
  std::string out;
  out += "{\"schema_version\":" + std::to_string(h.schema_version) + ",\"feature_names\":";
  write_strings(out, h.feature_names);
  out += ",\"action_set\":";
  write_strings(out, h.action_set);
  out += ",\"reward_config\":{\"name\":" + json(h.reward_config.name).dump() + ",\"per_turn\":";
  write_real(out, h.reward_config.per_turn);
  out += ",\"correct_offer\":";
  write_real(out, h.reward_config.correct_offer);
  out += ",\"duplicate_offer\":";
  write_real(out, h.reward_config.duplicate_offer);
  out += ",\"wrong_offer\":";
  write_real(out, h.reward_config.wrong_offer);
  out += ",\"gamma\":";
  write_real(out, h.reward_config.gamma);
  out += "}}\n";

  for (const auto& d : corpus.dialogs) {
    for (const auto& tr : d.turns) {
      out += "{\"dialog_id\":" + json(tr.dialog_id).dump() + ",\"turn\":" + std::to_string(tr.turn) + ",\"s\":";
      write_reals(out, tr.state_before);
      out += ",\"a\":" + json(h.action_set.at(tr.action)).dump() + ",\"s_next\":";
      write_reals(out, tr.state_after);
      out += tr.is_terminal ? ",\"terminal\":true}\n" : ",\"terminal\":false}\n";
    }
  }
  return out;
}

Corpus parse_corpus(std::string_view text)
{
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  if (lines.empty() || lines[0].find_first_not_of(" \t\r") == std::string_view::npos) {
    throw CorpusError(CorpusError::Kind::ParseError, 1, "missing header record");
  }

  CorpusHeader header;
  try {
    const json h = json::parse(lines[0]);
    header.schema_version = h.at("schema_version").get<int>();
    header.feature_names = h.at("feature_names").get<std::vector<std::string>>();
    header.action_set = h.at("action_set").get<std::vector<std::string>>();
    const json& rc = h.at("reward_config");
    header.reward_config.name = rc.value("name", std::string());
    header.reward_config.per_turn = rc.at("per_turn").get<double>();
    header.reward_config.correct_offer = rc.at("correct_offer").get<double>();
    header.reward_config.duplicate_offer = rc.at("duplicate_offer").get<double>();
    header.reward_config.wrong_offer = rc.at("wrong_offer").get<double>();
    header.reward_config.gamma = rc.at("gamma").get<double>();
  } catch (const json::exception& e) {
    throw CorpusError(CorpusError::Kind::ParseError, 1, std::string("bad header: ") + e.what());
  }
  if (header.schema_version != dialog::kFeatureSchemaVersion) {
    throw CorpusError(CorpusError::Kind::SchemaMismatch, 1,
                      "unsupported schema_version " + std::to_string(header.schema_version));
  }

  Corpus corpus;
  corpus.header = header;
  std::map<std::string, std::size_t> closed;  // dialog id -> line where it ended
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    if (lines[i].find_first_not_of(" \t\r") == std::string_view::npos) {
      continue;
    }
    Transition tr;
    std::string action;
    try {
      const json r = json::parse(lines[i]);
      tr.dialog_id = r.at("dialog_id").get<std::string>();
      tr.turn = r.at("turn").get<std::size_t>();
      tr.state_before = read_reals(r, "s", line);
      action = r.at("a").get<std::string>();
      tr.state_after = read_reals(r, "s_next", line);
      tr.is_terminal = r.at("terminal").get<bool>();
    } catch (const json::exception& e) {
      throw CorpusError(CorpusError::Kind::ParseError, line, e.what());
    }

    const auto it = std::find(header.action_set.begin(), header.action_set.end(), action);
    if (it == header.action_set.end()) {
      throw CorpusError(CorpusError::Kind::SchemaMismatch, line, "action '" + action + "' not in action_set");
    }
    tr.action = static_cast<std::size_t>(it - header.action_set.begin());
    if (tr.state_before.size() != header.feature_names.size() ||
        tr.state_after.size() != header.feature_names.size()) {
      throw CorpusError(CorpusError::Kind::SchemaMismatch, line,
                        "expected " + std::to_string(header.feature_names.size()) + " features");
    }

    const bool continues = !corpus.dialogs.empty() && corpus.dialogs.back().id == tr.dialog_id;
    if (!continues) {
      if (!corpus.dialogs.empty() && !corpus.dialogs.back().turns.back().is_terminal) {
        throw CorpusError(CorpusError::Kind::MissingTerminal, line,
                          "dialog '" + corpus.dialogs.back().id + "' ends without a terminal turn");
      }
      if (closed.count(tr.dialog_id) != 0) {
        throw CorpusError(CorpusError::Kind::Malformed, line,
                          "dialog '" + tr.dialog_id + "' reappears after line " +
                              std::to_string(closed[tr.dialog_id]));
      }
      corpus.dialogs.push_back({tr.dialog_id, {}});
    } else if (corpus.dialogs.back().turns.back().is_terminal) {
      throw CorpusError(CorpusError::Kind::Malformed, line,
                        "dialog '" + tr.dialog_id + "' continues after its terminal turn");
    }
    auto& turns = corpus.dialogs.back().turns;
    if (tr.turn != turns.size()) {
      throw CorpusError(CorpusError::Kind::Malformed, line,
                        "expected turn " + std::to_string(turns.size()) + " of dialog '" + tr.dialog_id + "'");
    }
    closed[tr.dialog_id] = line;
    turns.push_back(std::move(tr));
  }
  if (!corpus.dialogs.empty() && !corpus.dialogs.back().turns.back().is_terminal) {
    throw CorpusError(CorpusError::Kind::MissingTerminal, lines.size(),
                      "dialog '" + corpus.dialogs.back().id + "' ends without a terminal turn");
  }
  return corpus;
}

void save_corpus(const Corpus& corpus, const std::string& path)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw CorpusError(CorpusError::Kind::Io, 0, "cannot write '" + path + "'");
  }
  out << serialize_corpus(corpus);
}

Corpus load_corpus(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CorpusError(CorpusError::Kind::Io, 0, "cannot open '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_corpus(buf.str());
}

void ResamplePlan::validate() const
{
  if (n_rounds == 0) throw std::invalid_argument("n_rounds must be at least 1");
  if (!(split_fraction > 0.0 && split_fraction < 1.0)) {
    throw std::invalid_argument("split_fraction must lie strictly between 0 and 1");
  }
}

std::vector<CorpusSplit> resample_splits(const Corpus& corpus, const ResamplePlan& plan)
{
  plan.validate();
  const std::size_t n = corpus.dialogs.size();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * plan.split_fraction));
  std::vector<CorpusSplit> out;
  out.reserve(plan.n_rounds);
  for (std::size_t round = 0; round < plan.n_rounds; ++round) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    RandomStream rng(derive_seed(plan.seed, round));
    for (std::size_t i = n; i > 1; --i) {
      std::swap(order[i - 1], order[rng.index(i)]);
    }
    CorpusSplit split;
    split.train.header = corpus.header;
    split.test.header = corpus.header;
    for (std::size_t i = 0; i < n; ++i) {
      (i < n_train ? split.train : split.test).dialogs.push_back(corpus.dialogs[order[i]]);
    }
    out.push_back(std::move(split));
  }
  return out;
}

MeanStd summarize(std::span<const double> values)
{
  MeanStd out;
  if (values.empty()) return out;
  out.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - out.mean) * (v - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
  }
  return out;
}

}  // namespace gadm::corpus
