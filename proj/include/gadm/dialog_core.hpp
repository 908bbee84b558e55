#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "gadm/policy_dsl.hpp"

namespace gadm::dialog {

struct Slot {
  std::string name;
  std::vector<std::string> values;
};

class OntologyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Constraint slots and their value vocabularies.
class Ontology {
 public:
  explicit Ontology(std::vector<Slot> slots);

  /// {"slots": [{"name": "...", "values": ["...", ...]}, ...]}
  static Ontology from_json(std::string_view text);
  static Ontology load(const std::string& path);

  std::size_t slot_count() const noexcept { return slots_.size(); }
  const Slot& slot(std::size_t i) const { return slots_.at(i); }
  const std::vector<Slot>& slots() const noexcept { return slots_; }
  std::optional<std::size_t> find_slot(std::string_view name) const;

 private:
  std::vector<Slot> slots_;
};

struct SlotValue {
  std::size_t slot = 0;
  std::size_t value = 0;
  bool operator==(const SlotValue&) const = default;
};

enum class UserActType { Inform, Affirm, Negate, Deny, Bye };

/// A user dialog act; slot_values refer to ontology indices.
struct DialogAct {
  UserActType act = UserActType::Inform;
  std::vector<SlotValue> slot_values;
  double confidence = 1.0;

  /// Same act and content, ignoring confidence.
  bool same_semantics(const DialogAct& other) const;
};

/// Confidence-ordered, non-increasing; may be empty.
using NBestList = std::vector<DialogAct>;

enum class SystemActType { Welcome, Repeat, Request, ExplicitConf, RequireMore, Offer };

const char* to_string(SystemActType type);
std::optional<SystemActType> parse_system_act(std::string_view label);

struct SystemAct {
  SystemActType type = SystemActType::Welcome;
  std::optional<std::size_t> slot;  // Request / ExplicitConf target
  std::vector<SlotValue> content;   // ExplicitConf: the value; Offer: the query
};

enum class OfferOutcome { None, Correct, Duplicate, Wrong };

/// Canonical identifier for an offered result (its query).
std::string result_id(std::span<const SlotValue> query);

struct DialogState {
  std::vector<std::vector<double>> slot_beliefs;  // [slot][value], each in [0,1]
  double top_slu_score = 0.0;
  bool slu_empty = false;
  std::optional<std::size_t> last_denied_slot;
  bool require_more_issued = false;
  std::set<std::string> offered_results;
  OfferOutcome last_offer = OfferOutcome::None;
  std::size_t turn_index = 0;

  static DialogState initial(const Ontology& ontology);

  /// Highest-scoring value of a slot and its score; value 0 / score 0 when empty.
  SlotValue top_value(std::size_t slot) const;
  double top_score(std::size_t slot) const;
  double second_score(std::size_t slot) const;
  /// Slot with the lowest top score; ties go to the lower index.
  std::size_t weakest_slot() const;
};

struct RewardConfig {
  std::string name;
  double per_turn = -1.0;
  double correct_offer = 100.0;
  double duplicate_offer = -5.0;
  double wrong_offer = -5.0;
  double gamma = 0.9;

  void validate() const;
  bool operator==(const RewardConfig&) const = default;
};

/// -1 per turn, +100 correct, -5 duplicate or wrong, gamma 0.9.
RewardConfig simulation_rewards();
/// -10 per turn, +100 correct, -50 duplicate, -100 wrong, gamma 0.9.
RewardConfig corpus_rewards();

double offer_bonus(OfferOutcome outcome, const RewardConfig& cfg);

/// per_turn plus the offer bonus recorded in s_next when the action is an offer.
double reward(const DialogState& s, SystemActType action, const DialogState& s_next, const RewardConfig& cfg);
double reward(const DialogState& s, std::string_view action_label, const DialogState& s_next,
              const RewardConfig& cfg);

/// sum_j gamma^(j-1) r_j
double discounted_return(std::span<const double> rewards, double gamma);

// Feature layout, version kFeatureSchemaVersion:
//   top_<slot>, second_<slot>          per slot, in ontology order
//   filled_count                       slots with top score > 0.5
//   min_slot_score, mean_slot_score    over per-slot top scores
//   min_slot_margin                    min over slots of top - second
//   top_slu_score
//   slu_empty, user_denied, require_more_pending, dialog_start   {0,1}
//   turn_norm                          turn_index / max_turns, capped at 1
//   offer_correct, offer_duplicate, offer_wrong   {0,1}, outcome of the last offer
inline constexpr int kFeatureSchemaVersion = 1;

std::vector<std::string> feature_names(const Ontology& ontology);
std::vector<double> featurize(const DialogState& state, std::size_t max_turns);
void featurize_into(const DialogState& state, std::size_t max_turns, std::vector<double>& out);

/// Reward computed from feature vectors, using the offer outcome flags of s_next.
class FeatureReward {
 public:
  FeatureReward(std::span<const std::string> feature_names, RewardConfig cfg);
  double operator()(std::span<const double> s, std::size_t action, std::span<const double> s_next) const;
  const RewardConfig& config() const noexcept { return cfg_; }

 private:
  RewardConfig cfg_;
  std::optional<std::size_t> correct_;
  std::optional<std::size_t> duplicate_;
  std::optional<std::size_t> wrong_;
};

/// Turns a template decision into a concrete system act:
/// Request targets the just-denied slot, else the weakest slot;
/// ExplicitConf confirms the weakest slot's top value;
/// Offer queries every slot whose top score exceeds `filter` (default 0).
SystemAct resolve_action(std::string_view label, std::span<const dsl::BoundArg> structural,
                         const DialogState& state);

/// Maps a dialog state (and its feature vector) to a system act.
using SystemPolicy = std::function<SystemAct(const DialogState& state, std::span<const double> features)>;

/// Wraps a bound template as a SystemPolicy. Every action label of the
/// template must name a system act.
SystemPolicy template_policy(dsl::Policy policy);

}  // namespace gadm::dialog
