#pragma once

// JSON-lines dialog corpora.
//
// Line 1 is a header object:
//   {"schema_version":1,"feature_names":[...],"action_set":[...],
//    "reward_config":{"name":...,"per_turn":...,"correct_offer":...,
//                     "duplicate_offer":...,"wrong_offer":...,"gamma":...}}
// Every further line is one transition:
//   {"dialog_id":"...","turn":0,"s":[...],"a":"<label>","s_next":[...],"terminal":false}
// Keys appear in exactly this order and reals are written with 17
// significant digits, so writing a loaded canonical file reproduces it
// byte for byte.

#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gadm/dialog_core.hpp"

namespace gadm::corpus {

struct CorpusHeader {
  int schema_version = dialog::kFeatureSchemaVersion;
  std::vector<std::string> feature_names;
  std::vector<std::string> action_set;
  dialog::RewardConfig reward_config;

  std::size_t action_index(std::string_view label) const;  // throws CorpusError
  bool operator==(const CorpusHeader&) const = default;
};

struct Transition {
  std::string dialog_id;
  std::size_t turn = 0;
  std::vector<double> state_before;
  std::size_t action = 0;  // index into CorpusHeader::action_set
  std::vector<double> state_after;
  bool is_terminal = false;
  bool operator==(const Transition&) const = default;
};

struct Dialog {
  std::string id;
  std::vector<Transition> turns;
  bool operator==(const Dialog&) const = default;
};

struct Corpus {
  CorpusHeader header;
  std::vector<Dialog> dialogs;

  std::size_t transition_count() const;
  /// All transitions, dialog by dialog.
  std::vector<Transition> transitions() const;
  /// Checks turn numbering, terminal placement and feature arity.
  void validate() const;
  bool operator==(const Corpus&) const = default;
};

class CorpusError : public std::runtime_error {
 public:
  enum class Kind { ParseError, SchemaMismatch, MissingTerminal, Malformed, Io };

  CorpusError(Kind kind, std::size_t line, const std::string& message);
  Kind kind() const noexcept { return kind_; }
  /// 1-based line number, 0 when not tied to a line.
  std::size_t line() const noexcept { return line_; }

 private:
  Kind kind_;
  std::size_t line_;
};

std::string serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(std::string_view text);
void save_corpus(const Corpus& corpus, const std::string& path);
Corpus load_corpus(const std::string& path);

/// Groups a flat transition list (dialogs contiguous, turns in order) and validates it.
Corpus make_corpus(CorpusHeader header, std::span<const Transition> transitions);

struct ResamplePlan {
  std::size_t n_rounds = 12;
  double split_fraction = 0.5;
  std::uint64_t seed = 0;

  void validate() const;
};

struct CorpusSplit {
  Corpus train;
  Corpus test;
};

/// Independent dialog-level shuffles; the first floor(n * split_fraction)
/// dialogs of each shuffle form the training half.
std::vector<CorpusSplit> resample_splits(const Corpus& corpus, const ResamplePlan& plan);

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for fewer than two values
};

MeanStd summarize(std::span<const double> values);

}  // namespace gadm::corpus
