#include "gadm/dialog_core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace gadm::dialog {

Ontology::Ontology(std::vector<Slot> slots) : slots_(std::move(slots))
{
  if (slots_.empty()) {
    throw OntologyError("ontology declares no slots");
  }
  for (const auto& s : slots_) {
    if (s.values.size() < 2) {
      throw OntologyError("slot '" + s.name + "' needs at least two values");
    }
  }
}

Ontology Ontology::from_json(std::string_view text)
{
  try {
    const auto j = nlohmann::json::parse(text);
    std::vector<Slot> slots;
    for (const auto& s : j.at("slots")) {
      slots.push_back({s.at("name").get<std::string>(), s.at("values").get<std::vector<std::string>>()});
    }
    return Ontology(std::move(slots));
  } catch (const nlohmann::json::exception& e) {
    throw OntologyError(std::string("malformed ontology: ") + e.what());
  }
}

Ontology Ontology::load(const std::string& path)
{
  std::ifstream in(path);
  if (!in) {
    throw OntologyError("cannot open ontology file '" + path + "'");
  }
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::optional<std::size_t> Ontology::find_slot(std::string_view name) const
{
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    if (slots_[i].name == name) return i;
  }
  return std::nullopt;
}

bool DialogAct::same_semantics(const DialogAct& other) const
{
  return act == other.act && slot_values == other.slot_values;
}

const char* to_string(SystemActType type)
{
  switch (type) {
    case SystemActType::Welcome: return "Welcome";
    case SystemActType::Repeat: return "Repeat";
    case SystemActType::Request: return "Request";
    case SystemActType::ExplicitConf: return "ExplicitConf";
    case SystemActType::RequireMore: return "RequireMore";
    case SystemActType::Offer: return "Offer";
  }
  return "?";
}

std::optional<SystemActType> parse_system_act(std::string_view label)
{
  for (auto t : {SystemActType::Welcome, SystemActType::Repeat, SystemActType::Request,
                 SystemActType::ExplicitConf, SystemActType::RequireMore, SystemActType::Offer}) {
    if (label == to_string(t)) return t;
  }
  return std::nullopt;
}

std::string result_id(std::span<const SlotValue> query)
{
  std::vector<SlotValue> sorted(query.begin(), query.end());
  std::sort(sorted.begin(), sorted.end(), [](const SlotValue& a, const SlotValue& b) {
    return a.slot != b.slot ? a.slot < b.slot : a.value < b.value;
  });
  std::string id;
  for (const auto& sv : sorted) {
    if (!id.empty()) id += ',';
    id += std::to_string(sv.slot) + ':' + std::to_string(sv.value);
  }
  return id;
}

DialogState DialogState::initial(const Ontology& ontology)
{
  DialogState s;
  s.slot_beliefs.reserve(ontology.slot_count());
  for (const auto& slot : ontology.slots()) {
    s.slot_beliefs.emplace_back(slot.values.size(), 0.0);
  }
  return s;
}

SlotValue DialogState::top_value(std::size_t slot) const
{
  const auto& b = slot_beliefs.at(slot);
  const auto it = std::max_element(b.begin(), b.end());
  return {slot, static_cast<std::size_t>(it - b.begin())};
}

double DialogState::top_score(std::size_t slot) const
{
  const auto& b = slot_beliefs.at(slot);
  return *std::max_element(b.begin(), b.end());
}

double DialogState::second_score(std::size_t slot) const
{
  double first = 0.0;
  double second = 0.0;
  for (double v : slot_beliefs.at(slot)) {
    if (v > first) {
      second = first;
      first = v;
    } else if (v > second) {
      second = v;
    }
  }
  return second;
}

std::size_t DialogState::weakest_slot() const
{
  std::size_t weakest = 0;
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < slot_beliefs.size(); ++s) {
    const double score = top_score(s);
    if (score < lowest) {
      lowest = score;
      weakest = s;
    }
  }
  return weakest;
}

void RewardConfig::validate() const
{
  if (!(gamma > 0.0 && gamma <= 1.0)) {
    throw std::invalid_argument("reward discount gamma must lie in (0, 1]");
  }
}

RewardConfig simulation_rewards()
{
  return {"simulation", -1.0, 100.0, -5.0, -5.0, 0.9};
}

RewardConfig corpus_rewards()
{
  return {"corpus", -10.0, 100.0, -50.0, -100.0, 0.9};
}

double offer_bonus(OfferOutcome outcome, const RewardConfig& cfg)
{
  switch (outcome) {
    case OfferOutcome::None: return 0.0;
    case OfferOutcome::Correct: return cfg.correct_offer;
    case OfferOutcome::Duplicate: return cfg.duplicate_offer;
    case OfferOutcome::Wrong: return cfg.wrong_offer;
  }
  return 0.0;
}

double reward(const DialogState&, SystemActType action, const DialogState& s_next, const RewardConfig& cfg)
{
  const double bonus = action == SystemActType::Offer ? offer_bonus(s_next.last_offer, cfg) : 0.0;
  return cfg.per_turn + bonus;
}

double reward(const DialogState& s, std::string_view action_label, const DialogState& s_next,
              const RewardConfig& cfg)
{
  const auto type = parse_system_act(action_label);
  if (!type) {
    throw std::invalid_argument("unknown system action '" + std::string(action_label) + "'");
  }
  return reward(s, *type, s_next, cfg);
}

double discounted_return(std::span<const double> rewards, double gamma)
{
  double total = 0.0;
  double discount = 1.0;
  for (double r : rewards) {
    total += discount * r;
    discount *= gamma;
  }
  return total;
}

std::vector<std::string> feature_names(const Ontology& ontology)
{
  std::vector<std::string> names;
  for (const auto& slot : ontology.slots()) names.push_back("top_" + slot.name);
  for (const auto& slot : ontology.slots()) names.push_back("second_" + slot.name);
  for (const char* n : {"filled_count", "min_slot_score", "mean_slot_score", "min_slot_margin",
                        "top_slu_score", "slu_empty", "user_denied", "require_more_pending", "dialog_start",
                        "turn_norm", "offer_correct", "offer_duplicate", "offer_wrong"}) {
    names.emplace_back(n);
  }
  return names;
}

void featurize_into(const DialogState& state, std::size_t max_turns, std::vector<double>& out)
{
  const std::size_t n_slots = state.slot_beliefs.size();
  out.assign(2 * n_slots + 13, 0.0);
  double filled = 0.0;
  double min_score = n_slots == 0 ? 0.0 : 1.0;
  double sum_score = 0.0;
  double min_margin = n_slots == 0 ? 0.0 : 1.0;
  for (std::size_t s = 0; s < n_slots; ++s) {
    const double top = state.top_score(s);
    const double second = state.second_score(s);
    out[s] = top;
    out[n_slots + s] = second;
    filled += top > 0.5 ? 1.0 : 0.0;
    min_score = std::min(min_score, top);
    sum_score += top;
    min_margin = std::min(min_margin, top - second);
  }
  std::size_t k = 2 * n_slots;
  out[k++] = filled;
  out[k++] = min_score;
  out[k++] = n_slots == 0 ? 0.0 : sum_score / static_cast<double>(n_slots);
  out[k++] = min_margin;
  out[k++] = state.top_slu_score;
  out[k++] = state.slu_empty ? 1.0 : 0.0;
  out[k++] = state.last_denied_slot ? 1.0 : 0.0;
  out[k++] = state.require_more_issued ? 0.0 : 1.0;
  out[k++] = state.turn_index == 0 ? 1.0 : 0.0;
  out[k++] = max_turns == 0 ? 0.0
                            : std::min(1.0, static_cast<double>(state.turn_index) / static_cast<double>(max_turns));
  out[k++] = state.last_offer == OfferOutcome::Correct ? 1.0 : 0.0;
  out[k++] = state.last_offer == OfferOutcome::Duplicate ? 1.0 : 0.0;
  out[k++] = state.last_offer == OfferOutcome::Wrong ? 1.0 : 0.0;
}

std::vector<double> featurize(const DialogState& state, std::size_t max_turns)
{
  std::vector<double> out;
  featurize_into(state, max_turns, out);
  return out;
}

FeatureReward::FeatureReward(std::span<const std::string> feature_names, RewardConfig cfg)
    : cfg_(std::move(cfg))
{
  auto find = [&](std::string_view name) -> std::optional<std::size_t> {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) return std::nullopt;
    return static_cast<std::size_t>(it - feature_names.begin());
  };
  correct_ = find("offer_correct");
  duplicate_ = find("offer_duplicate");
  wrong_ = find("offer_wrong");
}

double FeatureReward::operator()(std::span<const double>, std::size_t, std::span<const double> s_next) const
{
  double r = cfg_.per_turn;
  if (correct_ && s_next[*correct_] > 0.5) {
    r += cfg_.correct_offer;
  } else if (duplicate_ && s_next[*duplicate_] > 0.5) {
    r += cfg_.duplicate_offer;
  } else if (wrong_ && s_next[*wrong_] > 0.5) {
    r += cfg_.wrong_offer;
  }
  return r;
}

SystemAct resolve_action(std::string_view label, std::span<const dsl::BoundArg> structural,
                         const DialogState& state)
{
  const auto type = parse_system_act(label);
  if (!type) {
    throw dsl::PolicyError(dsl::PolicyError::Kind::UnknownAction,
                           "'" + std::string(label) + "' is not a system act");
  }
  SystemAct act;
  act.type = *type;
  switch (*type) {
    case SystemActType::Request:
      act.slot = state.last_denied_slot ? *state.last_denied_slot : state.weakest_slot();
      break;
    case SystemActType::ExplicitConf: {
      const std::size_t slot = state.weakest_slot();
      act.slot = slot;
      act.content.push_back(state.top_value(slot));
      break;
    }
    case SystemActType::Offer: {
      double filter = 0.0;
      for (const auto& arg : structural) {
        if (arg.name == "filter") filter = arg.value;
      }
      for (std::size_t s = 0; s < state.slot_beliefs.size(); ++s) {
        if (state.top_score(s) > filter) {
          act.content.push_back(state.top_value(s));
        }
      }
      break;
    }
    default:
      break;
  }
  return act;
}

SystemPolicy template_policy(dsl::Policy policy)
{
  for (const auto& a : policy.ast().schema.actions) {
    if (!parse_system_act(a.label)) {
      throw dsl::PolicyError(dsl::PolicyError::Kind::UnknownAction,
                             "template action '" + a.label + "' is not a system act");
    }
  }
  auto shared = std::make_shared<const dsl::Policy>(std::move(policy));
  return [shared](const DialogState& state, std::span<const double> features) {
    const dsl::ActionDecision d = shared->decide(features);
    return resolve_action(d.label, d.structural, state);
  };
}

}  // namespace gadm::dialog
