#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gadm/corpus_io.hpp"
#include "gadm/dialog_core.hpp"
#include "gadm/policy_dsl.hpp"
#include "gadm/random.hpp"

namespace gadm::sim {

using dialog::DialogAct;
using dialog::DialogState;
using dialog::NBestList;
using dialog::Ontology;
using dialog::SystemAct;

/// Act-level ASR/SLU error channel.
struct NoiseConfig {
  double error_rate = 0.0;       // probability the top hypothesis is wrong
  std::size_t nbest_size = 3;
  double replace_fraction = 0.5;  // share of errors that replace rather than delete
  // Beta parameters of the confidence draw for correct / wrong hypotheses.
  double correct_alpha = 5.0;
  double correct_beta = 2.0;
  double wrong_alpha = 2.0;
  double wrong_beta = 5.0;

  void validate() const;
};

/// With probability 1 - error_rate the top hypothesis is `act`. Otherwise the
/// value is replaced (uniformly among the other values; affirm and negate
/// swap) or the utterance is deleted, which yields an empty list. Lower
/// entries are distinct confusions. Confidences are non-increasing and sum to
/// at most 1; correct hypotheses draw from Beta(5,2), wrong ones from Beta(2,5).
NBestList corrupt(const DialogAct& act, const NoiseConfig& cfg, const Ontology& ontology, RandomStream& rng);

struct UserGoal {
  std::vector<std::size_t> constraints;  // value index per slot
  bool satisfied = false;

  /// True when the query pins every slot to its goal value.
  bool matches(std::span<const dialog::SlotValue> query) const;
};

UserGoal sample_goal(const Ontology& ontology, RandomStream& rng);

struct UserConfig {
  /// Consecutive Repeat turns tolerated before hanging up; 0 never hangs up.
  std::size_t patience = 3;
};

/// Stack-based user: pending informs in random order, with responses to
/// Request / ExplicitConf / Offer pushed ahead of them.
class AgendaUser {
 public:
  AgendaUser(const Ontology& ontology, UserGoal goal, UserConfig cfg, RandomStream& rng);

  DialogAct respond(const SystemAct& system, dialog::OfferOutcome outcome, RandomStream& rng);

  bool gave_up() const noexcept { return gave_up_; }
  const UserGoal& goal() const noexcept { return goal_; }
  std::span<const DialogAct> agenda() const noexcept { return stack_; }

 private:
  DialogAct inform(std::size_t slot) const;
  void drop_pending(std::size_t slot);
  DialogAct pop_or_reinform(RandomStream& rng);

  const Ontology* ontology_;
  UserGoal goal_;
  UserConfig cfg_;
  std::vector<DialogAct> stack_;  // back is the top
  std::optional<DialogAct> last_;
  std::size_t consecutive_repeats_ = 0;
  bool gave_up_ = false;
};

/// Max-confidence belief tracker: informs raise a value's score to the best
/// confidence seen; deny (or negate after ExplicitConf) clears the slot and
/// flags it as just denied; affirm after ExplicitConf pins the value at 1.
void update_tracker(DialogState& state, const SystemAct& last_system, const NBestList& observation);

enum class Outcome { Success, Failure, Timeout };
const char* to_string(Outcome outcome);

struct EpisodeConfig {
  std::size_t max_turns = 30;
  UserConfig user;
  dialog::RewardConfig rewards = dialog::simulation_rewards();
};

/// One dialog against a fresh user, advanced one system act at a time.
class DialogSession {
 public:
  DialogSession(const Ontology& ontology, const EpisodeConfig& cfg, const NoiseConfig& noise, RandomStream& rng);

  struct Step {
    DialogAct user;
    NBestList observation;
    dialog::OfferOutcome offer = dialog::OfferOutcome::None;
    double reward = 0.0;
  };

  Step step(const SystemAct& act, RandomStream& rng);

  const DialogState& state() const noexcept { return state_; }
  bool finished() const noexcept { return outcome_.has_value(); }
  std::optional<Outcome> outcome() const noexcept { return outcome_; }
  std::size_t turns() const noexcept { return turns_; }
  const AgendaUser& user() const noexcept { return user_; }

 private:
  const Ontology* ontology_;
  EpisodeConfig cfg_;
  NoiseConfig noise_;
  AgendaUser user_;
  DialogState state_;
  std::size_t turns_ = 0;
  std::optional<Outcome> outcome_;
};

struct TurnRecord {
  DialogState state;
  std::vector<double> features;
  SystemAct system;
  DialogAct user;
  NBestList observation;
  double reward = 0.0;
};

struct EpisodeLog {
  std::vector<TurnRecord> turns;
  DialogState final_state;
  std::vector<double> final_features;
  Outcome outcome = Outcome::Timeout;
  double error_rate = 0.0;
  double discounted_return = 0.0;

  std::vector<double> rewards() const;
};

struct EpisodeSummary {
  double discounted_return = 0.0;
  std::size_t turns = 0;
  Outcome outcome = Outcome::Timeout;
};

/// Raised when the policy throws; carries the failing turn.
class PolicyFailure : public std::runtime_error {
 public:
  PolicyFailure(std::size_t turn, const std::string& what);
  std::size_t turn() const noexcept { return turn_; }

 private:
  std::size_t turn_;
};

EpisodeLog run_episode(const dialog::SystemPolicy& policy, const Ontology& ontology, const NoiseConfig& noise,
                       const EpisodeConfig& cfg, RandomStream& rng);

/// run_episode without the per-turn log.
EpisodeSummary simulate_episode(const dialog::SystemPolicy& policy, const Ontology& ontology,
                                const NoiseConfig& noise, const EpisodeConfig& cfg, RandomStream& rng);

/// Error rates drawn uniformly, one per dialog.
struct NoiseSchedule {
  std::vector<double> levels{0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6};
  double sample(RandomStream& rng) const;
};

struct SimulationSetup {
  Ontology ontology;
  NoiseSchedule schedule;
  NoiseConfig noise;  // error_rate is overridden per episode
  EpisodeConfig episode;
};

/// Built-in 4-slot restaurant ontology (food, area, pricerange, name).
Ontology restaurant_ontology();

struct SimulationMetrics {
  double mean_return = 0.0;
  double std_return = 0.0;
  double mean_length = 0.0;
  double completion_rate = 0.0;
  std::size_t episodes = 0;
};

/// Episode i runs on RandomStream(derive_seed(seed, i)); its error rate is
/// `fixed_error_rate` when given, otherwise drawn from the schedule.
/// Episodes may run in parallel; results do not depend on the thread count.
SimulationMetrics evaluate_in_simulation(const dialog::SystemPolicy& policy, const SimulationSetup& setup,
                                         std::size_t n_episodes, std::uint64_t seed,
                                         std::optional<double> fixed_error_rate = std::nullopt);

/// Mean discounted return of the instantiated template over n_episodes.
double fitness_simulation(std::shared_ptr<const dsl::TemplateAst> ast, const dsl::ParameterVector& params,
                          const SimulationSetup& setup, std::size_t n_episodes, std::uint64_t seed);

/// Converts logged episodes into corpus transitions (features before, system
/// act label, features after, terminal on the last turn).
corpus::Corpus episodes_to_corpus(std::span<const EpisodeLog> episodes, const Ontology& ontology,
                                  std::vector<std::string> action_set, const dialog::RewardConfig& rewards);

struct CorpusGenConfig {
  std::size_t n_dialogs = 1000;
  double epsilon = 0.2;  // probability of a uniformly random action each turn
  std::uint64_t seed = 0;
};

/// Synthetic corpus from a templated behaviour policy with epsilon exploration.
/// The action set is the template's action labels.
corpus::Corpus generate_corpus(const dsl::Policy& behaviour, const SimulationSetup& setup,
                               const CorpusGenConfig& cfg, std::vector<EpisodeLog>* logs = nullptr);

/// One JSON object per episode (turn-by-turn acts, N-best lists, rewards).
std::string episode_to_json(const EpisodeLog& log, const Ontology& ontology);

std::string describe(const SystemAct& act, const Ontology& ontology);
std::string describe(const DialogAct& act, const Ontology& ontology);

}  // namespace gadm::sim
