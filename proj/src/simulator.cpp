#include "gadm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include <json.hpp>

#include "gadm/parallel.hpp"

namespace gadm::sim {

using dialog::OfferOutcome;
using dialog::SlotValue;
using dialog::SystemActType;
using dialog::UserActType;

void NoiseConfig::validate() const
{
  if (!(error_rate >= 0.0 && error_rate <= 1.0)) {
    throw std::invalid_argument("error_rate must lie in [0, 1]");
  }
  if (nbest_size == 0) {
    throw std::invalid_argument("nbest_size must be at least 1");
  }
  if (!(replace_fraction >= 0.0 && replace_fraction <= 1.0)) {
    throw std::invalid_argument("replace_fraction must lie in [0, 1]");
  }
  if (!(correct_alpha > 0.0 && correct_beta > 0.0 && wrong_alpha > 0.0 && wrong_beta > 0.0)) {
    throw std::invalid_argument("confidence Beta parameters must be positive");
  }
}

namespace {

bool carries_value(const DialogAct& act)
{
  return (act.act == UserActType::Inform || act.act == UserActType::Deny) && !act.slot_values.empty();
}

bool replaceable(const DialogAct& act)
{
  return carries_value(act) || act.act == UserActType::Affirm || act.act == UserActType::Negate;
}

std::size_t other_value(std::size_t value, std::size_t n_values, RandomStream& rng)
{
  std::size_t v = rng.index(n_values - 1);
  return v >= value ? v + 1 : v;
}

DialogAct replaced(const DialogAct& act, const Ontology& ontology, RandomStream& rng)
{
  DialogAct out = act;
  if (act.act == UserActType::Affirm) {
    out.act = UserActType::Negate;
  } else if (act.act == UserActType::Negate) {
    out.act = UserActType::Affirm;
  } else {
    auto& sv = out.slot_values[rng.index(out.slot_values.size())];
    sv.value = other_value(sv.value, ontology.slot(sv.slot).values.size(), rng);
  }
  return out;
}

std::vector<DialogAct> confusions(const DialogAct& top, std::size_t wanted, const Ontology& ontology,
                                  RandomStream& rng)
{
  std::vector<DialogAct> out;
  if (wanted == 0) return out;
  if (top.act == UserActType::Affirm || top.act == UserActType::Negate) {
    DialogAct flip = top;
    flip.act = top.act == UserActType::Affirm ? UserActType::Negate : UserActType::Affirm;
    out.push_back(flip);
    return out;
  }
  if (!carries_value(top)) return out;
  const SlotValue head = top.slot_values.front();
  std::vector<std::size_t> pool;
  for (std::size_t v = 0; v < ontology.slot(head.slot).values.size(); ++v) {
    if (v != head.value) pool.push_back(v);
  }
  const std::size_t n = std::min(wanted, pool.size());
  for (std::size_t i = 0; i < n; ++i) {
    std::swap(pool[i], pool[i + rng.index(pool.size() - i)]);
    DialogAct alt = top;
    alt.slot_values.front().value = pool[i];
    out.push_back(alt);
  }
  return out;
}

}  // namespace

NBestList corrupt(const DialogAct& act, const NoiseConfig& cfg, const Ontology& ontology, RandomStream& rng)
{
  const bool correct = !rng.bernoulli(cfg.error_rate);
  DialogAct top = act;
  if (!correct) {
    const bool replace = rng.bernoulli(cfg.replace_fraction);
    if (!replace || !replaceable(act)) return {};
    top = replaced(act, ontology, rng);
  }

  NBestList out;
  double total = 0.0;
  auto push = [&](DialogAct h) {
    const bool truthful = h.same_semantics(act);
    double c = truthful ? rng.beta(cfg.correct_alpha, cfg.correct_beta) : rng.beta(cfg.wrong_alpha, cfg.wrong_beta);
    if (!out.empty()) c = std::min(out.back().confidence, std::max(0.0, 1.0 - total) * c);
    h.confidence = c;
    total += c;
    out.push_back(std::move(h));
  };
  push(top);
  for (auto& alt : confusions(top, cfg.nbest_size - 1, ontology, rng)) push(std::move(alt));
  return out;
}

bool UserGoal::matches(std::span<const SlotValue> query) const
{
  for (std::size_t s = 0; s < constraints.size(); ++s) {
    const auto it = std::find_if(query.begin(), query.end(), [&](const SlotValue& sv) { return sv.slot == s; });
    if (it == query.end() || it->value != constraints[s]) return false;
  }
  return true;
}

UserGoal sample_goal(const Ontology& ontology, RandomStream& rng)
{
  UserGoal goal;
  for (const auto& slot : ontology.slots()) goal.constraints.push_back(rng.index(slot.values.size()));
  return goal;
}

AgendaUser::AgendaUser(const Ontology& ontology, UserGoal goal, UserConfig cfg, RandomStream& rng)
    : ontology_(&ontology), goal_(std::move(goal)), cfg_(cfg)
{
  std::vector<std::size_t> order(goal_.constraints.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  for (std::size_t s : order) stack_.push_back(inform(s));
}

DialogAct AgendaUser::inform(std::size_t slot) const
{
  DialogAct act;
  act.act = UserActType::Inform;
  act.slot_values.push_back({slot, goal_.constraints.at(slot)});
  return act;
}

void AgendaUser::drop_pending(std::size_t slot)
{
  std::erase_if(stack_, [&](const DialogAct& a) {
    return a.act == UserActType::Inform && !a.slot_values.empty() && a.slot_values.front().slot == slot;
  });
}

DialogAct AgendaUser::pop_or_reinform(RandomStream& rng)
{
  if (!stack_.empty()) {
    DialogAct a = stack_.back();
    stack_.pop_back();
    return a;
  }
  return inform(rng.index(goal_.constraints.size()));
}

DialogAct AgendaUser::respond(const SystemAct& system, OfferOutcome outcome, RandomStream& rng)
{
  DialogAct bye;
  bye.act = UserActType::Bye;

  if (system.type == SystemActType::Repeat) {
    ++consecutive_repeats_;
    if (cfg_.patience > 0 && consecutive_repeats_ >= cfg_.patience) {
      gave_up_ = true;
      return bye;
    }
    if (!last_) last_ = pop_or_reinform(rng);
    return *last_;
  }
  consecutive_repeats_ = 0;

  DialogAct reply;
  switch (system.type) {
    case SystemActType::Request: {
      const std::size_t slot = system.slot.value_or(0);
      drop_pending(slot);
      reply = inform(slot);
      break;
    }
    case SystemActType::ExplicitConf:
      if (system.content.empty()) {
        reply = pop_or_reinform(rng);
      } else {
        const SlotValue sv = system.content.front();
        reply.act = goal_.constraints.at(sv.slot) == sv.value ? UserActType::Affirm : UserActType::Negate;
        reply.slot_values.push_back(sv);
      }
      break;
    case SystemActType::Offer: {
      if (outcome == OfferOutcome::Correct) {
        goal_.satisfied = true;
        reply = bye;
        break;
      }
      reply = bye;
      for (std::size_t s = 0; s < goal_.constraints.size(); ++s) {
        const auto it = std::find_if(system.content.begin(), system.content.end(),
                                     [&](const SlotValue& sv) { return sv.slot == s; });
        if (it == system.content.end()) {
          drop_pending(s);
          reply = inform(s);
          break;
        }
        if (it->value != goal_.constraints[s]) {
          reply.act = UserActType::Deny;
          reply.slot_values = {*it};
          break;
        }
      }
      break;
    }
    default:
      reply = pop_or_reinform(rng);
      break;
  }
  last_ = reply;
  return reply;
}

void update_tracker(DialogState& state, const SystemAct& last_system, const NBestList& observation)
{
  state.last_denied_slot.reset();
  state.slu_empty = observation.empty();
  state.top_slu_score = observation.empty() ? 0.0 : observation.front().confidence;

  auto reset_slot = [&](std::size_t slot) {
    std::fill(state.slot_beliefs.at(slot).begin(), state.slot_beliefs.at(slot).end(), 0.0);
    state.last_denied_slot = slot;
  };

  for (const auto& h : observation) {
    if (h.act != UserActType::Inform) continue;
    for (const auto& sv : h.slot_values) {
      double& b = state.slot_beliefs.at(sv.slot).at(sv.value);
      b = std::max(b, h.confidence);
    }
  }
  if (observation.empty()) return;

  const DialogAct& top = observation.front();
  const bool confirming = last_system.type == SystemActType::ExplicitConf && !last_system.content.empty();
  switch (top.act) {
    case UserActType::Affirm:
      if (confirming) {
        const SlotValue sv = last_system.content.front();
        state.slot_beliefs.at(sv.slot).at(sv.value) = 1.0;
      }
      break;
    case UserActType::Negate:
      if (confirming) reset_slot(last_system.content.front().slot);
      break;
    case UserActType::Deny:
      for (const auto& sv : top.slot_values) reset_slot(sv.slot);
      break;
    default:
      break;
  }
}

const char* to_string(Outcome outcome)
{
  switch (outcome) {
    case Outcome::Success: return "success";
    case Outcome::Failure: return "failure";
    case Outcome::Timeout: return "timeout";
  }
  return "?";
}

DialogSession::DialogSession(const Ontology& ontology, const EpisodeConfig& cfg, const NoiseConfig& noise,
                             RandomStream& rng)
    : ontology_(&ontology),
      cfg_(cfg),
      noise_(noise),
      user_(ontology, sample_goal(ontology, rng), cfg.user, rng),
      state_(DialogState::initial(ontology))
{
  noise_.validate();
  if (cfg_.max_turns == 0) outcome_ = Outcome::Timeout;
}

DialogSession::Step DialogSession::step(const SystemAct& act, RandomStream& rng)
{
  if (finished()) throw std::logic_error("dialog session already finished");

  DialogState next = state_;
  next.turn_index += 1;
  next.last_offer = OfferOutcome::None;
  if (act.type == SystemActType::RequireMore) next.require_more_issued = true;

  Step out;
  if (act.type == SystemActType::Offer) {
    const std::string id = dialog::result_id(act.content);
    if (user_.goal().matches(act.content)) {
      out.offer = OfferOutcome::Correct;
    } else if (next.offered_results.count(id) > 0) {
      out.offer = OfferOutcome::Duplicate;
    } else {
      out.offer = OfferOutcome::Wrong;
    }
    next.offered_results.insert(id);
    next.last_offer = out.offer;
  }

  out.user = user_.respond(act, out.offer, rng);
  ++turns_;
  if (out.offer == OfferOutcome::Correct) {
    outcome_ = Outcome::Success;
  } else if (user_.gave_up()) {
    outcome_ = Outcome::Failure;
  } else {
    out.observation = corrupt(out.user, noise_, *ontology_, rng);
    update_tracker(next, act, out.observation);
  }
  out.reward = dialog::reward(state_, act.type, next, cfg_.rewards);
  state_ = std::move(next);
  if (!outcome_ && turns_ >= cfg_.max_turns) outcome_ = Outcome::Timeout;
  return out;
}

std::vector<double> EpisodeLog::rewards() const
{
  std::vector<double> r;
  r.reserve(turns.size());
  for (const auto& t : turns) r.push_back(t.reward);
  return r;
}

PolicyFailure::PolicyFailure(std::size_t turn, const std::string& what)
    : std::runtime_error("policy failed at turn " + std::to_string(turn) + ": " + what), turn_(turn)
{
}

namespace {

EpisodeSummary run(const dialog::SystemPolicy& policy, const Ontology& ontology, const NoiseConfig& noise,
                   const EpisodeConfig& cfg, RandomStream& rng, EpisodeLog* log)
{
  DialogSession session(ontology, cfg, noise, rng);
  std::vector<double> features;
  EpisodeSummary summary;
  double discount = 1.0;
  while (!session.finished()) {
    dialog::featurize_into(session.state(), cfg.max_turns, features);
    SystemAct act;
    try {
      act = policy(session.state(), features);
    } catch (const std::exception& e) {
      throw PolicyFailure(session.turns(), e.what());
    }
    if (log != nullptr) {
      log->turns.push_back({session.state(), features, act, {}, {}, 0.0});
    }
    auto step = session.step(act, rng);
    summary.discounted_return += discount * step.reward;
    discount *= cfg.rewards.gamma;
    if (log != nullptr) {
      auto& rec = log->turns.back();
      rec.user = std::move(step.user);
      rec.observation = std::move(step.observation);
      rec.reward = step.reward;
    }
  }
  summary.turns = session.turns();
  summary.outcome = *session.outcome();
  if (log != nullptr) {
    log->final_state = session.state();
    log->final_features = dialog::featurize(session.state(), cfg.max_turns);
    log->outcome = summary.outcome;
    log->error_rate = noise.error_rate;
    log->discounted_return = summary.discounted_return;
  }
  return summary;
}

}  // namespace

EpisodeLog run_episode(const dialog::SystemPolicy& policy, const Ontology& ontology, const NoiseConfig& noise,
                       const EpisodeConfig& cfg, RandomStream& rng)
{
  EpisodeLog log;
  run(policy, ontology, noise, cfg, rng, &log);
  return log;
}

EpisodeSummary simulate_episode(const dialog::SystemPolicy& policy, const Ontology& ontology,
                                const NoiseConfig& noise, const EpisodeConfig& cfg, RandomStream& rng)
{
  return run(policy, ontology, noise, cfg, rng, nullptr);
}

double NoiseSchedule::sample(RandomStream& rng) const
{
  if (levels.empty()) throw std::invalid_argument("noise schedule has no levels");
  return levels[rng.index(levels.size())];
}

Ontology restaurant_ontology()
{
  return Ontology({
      {"food", {"thai", "italian", "indian", "chinese", "french", "british", "mexican", "japanese", "korean",
                "spanish", "turkish", "greek", "vietnamese", "lebanese", "seafood"}},
      {"area", {"north", "south", "east", "west", "centre"}},
      {"pricerange", {"budget", "cheap", "moderate", "expensive", "luxury"}},
      {"name", {"the golden wok", "bella napoli", "curry garden", "le petit bistro", "the red lion",
                "taco loco", "sakura", "seoul kitchen", "casa pepe", "anatolia", "the olive tree",
                "pho saigon", "cedar house", "the fish market", "royal spice", "trattoria roma",
                "the blue door", "dragon palace", "el sombrero", "maison blanche"}},
  });
}

SimulationMetrics evaluate_in_simulation(const dialog::SystemPolicy& policy, const SimulationSetup& setup,
                                         std::size_t n_episodes, std::uint64_t seed,
                                         std::optional<double> fixed_error_rate)
{
  std::vector<EpisodeSummary> results(n_episodes);
  parallel_for(n_episodes, [&](std::size_t i) {
    RandomStream rng(derive_seed(seed, i));
    NoiseConfig noise = setup.noise;
    noise.error_rate = fixed_error_rate ? *fixed_error_rate : setup.schedule.sample(rng);
    results[i] = simulate_episode(policy, setup.ontology, noise, setup.episode, rng);
  });

  SimulationMetrics m;
  m.episodes = n_episodes;
  if (n_episodes == 0) return m;
  std::vector<double> returns;
  returns.reserve(n_episodes);
  double length = 0.0;
  double completed = 0.0;
  for (const auto& r : results) {
    returns.push_back(r.discounted_return);
    length += static_cast<double>(r.turns);
    completed += r.outcome == Outcome::Success ? 1.0 : 0.0;
  }
  const auto ms = corpus::summarize(returns);
  m.mean_return = ms.mean;
  m.std_return = ms.std;
  m.mean_length = length / static_cast<double>(n_episodes);
  m.completion_rate = completed / static_cast<double>(n_episodes);
  return m;
}

double fitness_simulation(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                          const SimulationSetup& setup, std::size_t n_episodes, std::uint64_t seed)
{
  const auto names = dialog::feature_names(setup.ontology);
  auto policy = dialog::template_policy(dsl::Policy(std::move(ast), params, names));
  return evaluate_in_simulation(policy, setup, n_episodes, seed).mean_return;
}

corpus::Corpus episodes_to_corpus(std::span<const EpisodeLog> episodes, const Ontology& ontology,
                                  std::vector<std::string> action_set, const dialog::RewardConfig& rewards)
{
  corpus::CorpusHeader header;
  header.feature_names = dialog::feature_names(ontology);
  header.action_set = std::move(action_set);
  header.reward_config = rewards;

  std::vector<corpus::Transition> transitions;
  char id[32];
  for (std::size_t k = 0; k < episodes.size(); ++k) {
    const auto& ep = episodes[k];
    std::snprintf(id, sizeof id, "dlg%06zu", k);
    for (std::size_t j = 0; j < ep.turns.size(); ++j) {
      corpus::Transition t;
      t.dialog_id = id;
      t.turn = j;
      t.state_before = ep.turns[j].features;
      t.action = header.action_index(dialog::to_string(ep.turns[j].system.type));
      t.state_after = j + 1 < ep.turns.size() ? ep.turns[j + 1].features : ep.final_features;
      t.is_terminal = j + 1 == ep.turns.size();
      transitions.push_back(std::move(t));
    }
  }
  return corpus::make_corpus(std::move(header), transitions);
}

corpus::Corpus generate_corpus(const dsl::Policy& behaviour, const SimulationSetup& setup,
                               const CorpusGenConfig& cfg, std::vector<EpisodeLog>* logs)
{
  if (!(cfg.epsilon >= 0.0 && cfg.epsilon <= 1.0)) {
    throw std::invalid_argument("exploration epsilon must lie in [0, 1]");
  }
  std::vector<std::string> labels;
  for (const auto& a : behaviour.ast().schema.actions) labels.push_back(a.label);
  const auto base = dialog::template_policy(behaviour);

  std::vector<EpisodeLog> episodes(cfg.n_dialogs);
  parallel_for(cfg.n_dialogs, [&](std::size_t i) {
    RandomStream rng(derive_seed(cfg.seed, i));
    RandomStream explore(derive_seed(cfg.seed, i, 1));
    NoiseConfig noise = setup.noise;
    noise.error_rate = setup.schedule.sample(rng);
    dialog::SystemPolicy policy = [&](const DialogState& state, std::span<const double> features) {
      if (explore.bernoulli(cfg.epsilon)) {
        return dialog::resolve_action(labels[explore.index(labels.size())], {}, state);
      }
      return base(state, features);
    };
    episodes[i] = run_episode(policy, setup.ontology, noise, setup.episode, rng);
  });

  auto corpus = episodes_to_corpus(episodes, setup.ontology, labels, setup.episode.rewards);
  if (logs != nullptr) *logs = std::move(episodes);
  return corpus;
}

namespace {

std::string describe_pairs(std::span<const SlotValue> pairs, const Ontology& ontology)
{
  std::string out;
  for (const auto& sv : pairs) {
    if (!out.empty()) out += ',';
    out += ontology.slot(sv.slot).name + '=' + ontology.slot(sv.slot).values.at(sv.value);
  }
  return out;
}

}  // namespace

std::string describe(const SystemAct& act, const Ontology& ontology)
{
  std::string out = dialog::to_string(act.type);
  switch (act.type) {
    case SystemActType::Request:
      if (act.slot) out += '(' + ontology.slot(*act.slot).name + ')';
      break;
    case SystemActType::ExplicitConf:
    case SystemActType::Offer:
      out += '(' + describe_pairs(act.content, ontology) + ')';
      break;
    default:
      break;
  }
  return out;
}

std::string describe(const DialogAct& act, const Ontology& ontology)
{
  const char* name = "inform";
  switch (act.act) {
    case UserActType::Inform: name = "inform"; break;
    case UserActType::Affirm: name = "affirm"; break;
    case UserActType::Negate: name = "negate"; break;
    case UserActType::Deny: name = "deny"; break;
    case UserActType::Bye: name = "bye"; break;
  }
  return std::string(name) + '(' + describe_pairs(act.slot_values, ontology) + ')';
}

std::string episode_to_json(const EpisodeLog& log, const Ontology& ontology)
{
  nlohmann::ordered_json j;
  j["outcome"] = to_string(log.outcome);
  j["error_rate"] = log.error_rate;
  j["return"] = log.discounted_return;
  auto turns = nlohmann::ordered_json::array();
  for (std::size_t t = 0; t < log.turns.size(); ++t) {
    const auto& rec = log.turns[t];
    nlohmann::ordered_json turn;
    turn["turn"] = t;
    turn["system"] = describe(rec.system, ontology);
    turn["user"] = describe(rec.user, ontology);
    auto nbest = nlohmann::ordered_json::array();
    for (const auto& h : rec.observation) {
      nbest.push_back({{"act", describe(h, ontology)}, {"confidence", h.confidence}});
    }
    turn["nbest"] = std::move(nbest);
    turn["reward"] = rec.reward;
    turns.push_back(std::move(turn));
  }
  j["turns"] = std::move(turns);
  return j.dump();
}

}  // namespace gadm::sim
