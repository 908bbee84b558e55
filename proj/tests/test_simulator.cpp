#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <map>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "gadm/baselines.hpp"
#include "gadm/simulator.hpp"

using namespace gadm;
using namespace gadm::sim;
using dialog::SlotValue;
using dialog::SystemActType;
using dialog::UserActType;

namespace {

std::shared_ptr<const dsl::TemplateAst> restaurant_template()
{
  std::ifstream in(std::filesystem::path(GADM_DATA_DIR) / "restaurant.gadm");
  std::stringstream ss;
  ss << in.rdbuf();
  return std::make_shared<const dsl::TemplateAst>(dsl::parse_template(ss.str()));
}

SimulationSetup default_setup()
{
  return {restaurant_ontology(), {}, {}, {}};
}

DialogAct inform(std::size_t slot, std::size_t value)
{
  DialogAct a;
  a.act = UserActType::Inform;
  a.slot_values = {{slot, value}};
  return a;
}

dialog::SystemPolicy constant_policy(SystemActType type)
{
  return [type](const DialogState& s, std::span<const double>) {
    return dialog::resolve_action(dialog::to_string(type), {}, s);
  };
}

}  // namespace

TEST_CASE("noise config validation")
{
  NoiseConfig c;
  CHECK_NOTHROW(c.validate());
  c.error_rate = 1.2;
  CHECK_THROWS(c.validate());
  c = {};
  c.nbest_size = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("noiseless channel keeps the truth on top")
{
  const auto o = restaurant_ontology();
  RandomStream rng(1);
  NoiseConfig cfg;
  for (int i = 0; i < 2000; ++i) {
    const auto act = inform(rng.index(4), rng.index(5));
    const auto nbest = corrupt(act, cfg, o, rng);
    REQUIRE(nbest.size() == cfg.nbest_size);
    CHECK(nbest.front().same_semantics(act));
    double total = 0.0;
    for (std::size_t k = 0; k < nbest.size(); ++k) {
      total += nbest[k].confidence;
      CHECK(nbest[k].confidence >= 0.0);
      if (k > 0) {
        CHECK(nbest[k].confidence <= nbest[k - 1].confidence);
        CHECK_FALSE(nbest[k].same_semantics(act));
        CHECK(nbest[k].slot_values.front().slot == act.slot_values.front().slot);
      }
    }
    CHECK(total <= 1.0 + 1e-12);
  }
}

TEST_CASE("saturated channel never reports the truth on top")
{
  const auto o = restaurant_ontology();
  RandomStream rng(2);
  NoiseConfig cfg;
  cfg.error_rate = 1.0;
  std::size_t empty = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto act = inform(rng.index(4), rng.index(5));
    const auto nbest = corrupt(act, cfg, o, rng);
    if (nbest.empty()) {
      ++empty;
      continue;
    }
    CHECK_FALSE(nbest.front().same_semantics(act));
  }
  CHECK(std::abs(empty / 5000.0 - 0.5) < 0.03);
}

TEST_CASE("confirmation answers flip under noise")
{
  const auto o = restaurant_ontology();
  RandomStream rng(3);
  NoiseConfig cfg;
  cfg.error_rate = 1.0;
  cfg.replace_fraction = 1.0;
  DialogAct yes;
  yes.act = UserActType::Affirm;
  yes.slot_values = {{0, 1}};
  const auto nbest = corrupt(yes, cfg, o, rng);
  REQUIRE(nbest.size() == 2);
  CHECK(nbest[0].act == UserActType::Negate);
  CHECK(nbest[1].act == UserActType::Affirm);

  DialogAct bye;
  bye.act = UserActType::Bye;
  CHECK(corrupt(bye, cfg, o, rng).empty());
}

TEST_CASE("channel calibration")
{
  const auto o = restaurant_ontology();
  for (double e : {0.1, 0.3, 0.6}) {
    RandomStream rng(derive_seed(17, static_cast<std::uint64_t>(e * 10)));
    NoiseConfig cfg;
    cfg.error_rate = e;
    const int n = 100000;
    int wrong = 0;
    for (int i = 0; i < n; ++i) {
      const auto act = inform(rng.index(4), rng.index(5));
      const auto nbest = corrupt(act, cfg, o, rng);
      wrong += nbest.empty() || !nbest.front().same_semantics(act);
    }
    CHECK(std::abs(wrong / double(n) - e) < 0.01);
  }
}

TEST_CASE("correct hypotheses are more confident")
{
  const auto o = restaurant_ontology();
  RandomStream rng(4);
  NoiseConfig cfg;
  cfg.error_rate = 0.5;
  double right = 0.0, wrong = 0.0;
  int n_right = 0, n_wrong = 0;
  for (int i = 0; i < 20000; ++i) {
    const auto act = inform(rng.index(4), rng.index(5));
    const auto nbest = corrupt(act, cfg, o, rng);
    if (nbest.empty()) continue;
    if (nbest.front().same_semantics(act)) {
      right += nbest.front().confidence;
      ++n_right;
    } else {
      wrong += nbest.front().confidence;
      ++n_wrong;
    }
  }
  CHECK(right / n_right == doctest::Approx(5.0 / 7.0).epsilon(0.02));
  CHECK(wrong / n_wrong == doctest::Approx(2.0 / 7.0).epsilon(0.03));
}

TEST_CASE("tracker")
{
  const auto o = restaurant_ontology();
  DialogState s = DialogState::initial(o);
  dialog::SystemAct request{SystemActType::Request, 0, {}};

  NBestList obs{inform(0, 2), inform(0, 4)};
  obs[0].confidence = 0.6;
  obs[1].confidence = 0.3;
  update_tracker(s, request, obs);
  CHECK(s.slot_beliefs[0][2] == 0.6);
  CHECK(s.slot_beliefs[0][4] == 0.3);
  CHECK(s.top_slu_score == 0.6);
  CHECK_FALSE(s.slu_empty);

  // Lower confidence never lowers a belief.
  obs[0].confidence = 0.2;
  update_tracker(s, request, {obs[0]});
  CHECK(s.slot_beliefs[0][2] == 0.6);

  update_tracker(s, request, {});
  CHECK(s.slu_empty);
  CHECK(s.top_slu_score == 0.0);

  const dialog::SystemAct conf{SystemActType::ExplicitConf, 0, {{0, 2}}};
  DialogAct yes;
  yes.act = UserActType::Affirm;
  yes.confidence = 0.5;
  update_tracker(s, conf, {yes});
  CHECK(s.slot_beliefs[0][2] == 1.0);

  DialogAct no;
  no.act = UserActType::Negate;
  no.confidence = 0.5;
  update_tracker(s, conf, {no});
  CHECK(s.top_score(0) == 0.0);
  CHECK(s.last_denied_slot == 0u);

  update_tracker(s, request, {inform(1, 1)});
  CHECK_FALSE(s.last_denied_slot.has_value());

  DialogAct deny;
  deny.act = UserActType::Deny;
  deny.slot_values = {{1, 1}};
  update_tracker(s, request, {deny});
  CHECK(s.top_score(1) == 0.0);
  CHECK(s.last_denied_slot == 1u);
}

TEST_CASE("agenda user")
{
  const auto o = restaurant_ontology();
  RandomStream rng(5);
  UserGoal goal{{1, 2, 3, 4}, false};
  AgendaUser user(o, goal, {}, rng);
  CHECK(user.agenda().size() == 4);

  const auto first = user.respond({SystemActType::Welcome, {}, {}}, dialog::OfferOutcome::None, rng);
  CHECK(first.act == UserActType::Inform);
  CHECK(user.agenda().size() == 3);

  const auto asked = user.respond({SystemActType::Request, 2, {}}, dialog::OfferOutcome::None, rng);
  CHECK(asked.slot_values.front() == SlotValue{2, 3});

  const auto yes = user.respond({SystemActType::ExplicitConf, 0, {{0, 1}}}, dialog::OfferOutcome::None, rng);
  CHECK(yes.act == UserActType::Affirm);
  const auto no = user.respond({SystemActType::ExplicitConf, 0, {{0, 3}}}, dialog::OfferOutcome::None, rng);
  CHECK(no.act == UserActType::Negate);

  const auto deny = user.respond({SystemActType::Offer, {}, {{0, 1}, {1, 0}, {2, 3}, {3, 4}}},
                                 dialog::OfferOutcome::Wrong, rng);
  CHECK(deny.act == UserActType::Deny);
  CHECK(deny.slot_values.front() == SlotValue{1, 0});

  const auto missing = user.respond({SystemActType::Offer, {}, {{0, 1}}}, dialog::OfferOutcome::Wrong, rng);
  CHECK(missing.act == UserActType::Inform);
  CHECK(missing.slot_values.front().slot == 1);

  const auto again = user.respond({SystemActType::Repeat, {}, {}}, dialog::OfferOutcome::None, rng);
  CHECK(again.same_semantics(missing));
  user.respond({SystemActType::Repeat, {}, {}}, dialog::OfferOutcome::None, rng);
  CHECK_FALSE(user.gave_up());
  const auto bye = user.respond({SystemActType::Repeat, {}, {}}, dialog::OfferOutcome::None, rng);
  CHECK(bye.act == UserActType::Bye);
  CHECK(user.gave_up());

  UserGoal g2{{0, 0, 0, 0}, false};
  CHECK(g2.matches(std::vector<SlotValue>{{3, 0}, {2, 0}, {1, 0}, {0, 0}}));
  CHECK_FALSE(g2.matches(std::vector<SlotValue>{{0, 0}, {1, 0}, {2, 0}}));
}

TEST_CASE("noiseless dialog with the restaurant template")
{
  const auto setup = default_setup();
  const auto ast = restaurant_template();
  const auto policy = dialog::template_policy(
      dsl::Policy(ast, dsl::ParameterVector({0.0, 0.01, 0.5, 0.0}), dialog::feature_names(setup.ontology)));
  RandomStream rng(1);
  NoiseConfig noise;
  const auto log = run_episode(policy, setup.ontology, noise, setup.episode, rng);
  REQUIRE(log.turns.size() == 6);
  CHECK(log.turns[0].system.type == SystemActType::Welcome);
  for (int t = 1; t <= 3; ++t) CHECK(log.turns[t].system.type == SystemActType::Request);
  CHECK(log.turns[4].system.type == SystemActType::RequireMore);
  CHECK(log.turns[5].system.type == SystemActType::Offer);
  CHECK(log.outcome == Outcome::Success);
  CHECK(log.discounted_return == doctest::Approx(-1 - 0.9 - 0.81 - 0.729 - 0.6561 + 0.59049 * 99));
  CHECK(log.discounted_return == doctest::Approx(dialog::discounted_return(log.rewards(), 0.9)));
  CHECK(log.final_state.last_offer == dialog::OfferOutcome::Correct);
}

TEST_CASE("always repeating times out")
{
  const auto setup = default_setup();
  EpisodeConfig cfg = setup.episode;
  cfg.user.patience = 0;
  RandomStream rng(2);
  const auto log = run_episode(constant_policy(SystemActType::Repeat), setup.ontology, {}, cfg, rng);
  CHECK(log.outcome == Outcome::Timeout);
  CHECK(log.turns.size() == cfg.max_turns);
  double expected = 0.0;
  for (std::size_t j = 0; j < cfg.max_turns; ++j) expected += -1.0 * std::pow(0.9, static_cast<double>(j));
  CHECK(log.discounted_return == doctest::Approx(expected));

  RandomStream rng2(2);
  const auto impatient = run_episode(constant_policy(SystemActType::Repeat), setup.ontology, {}, setup.episode, rng2);
  CHECK(impatient.outcome == Outcome::Failure);
  CHECK(impatient.turns.size() == setup.episode.user.patience);
}

TEST_CASE("duplicate offers are recognised")
{
  const auto o = restaurant_ontology();
  EpisodeConfig cfg;
  RandomStream rng(3);
  DialogSession session(o, cfg, {}, rng);
  const dialog::SystemAct bad{SystemActType::Offer, {}, {}};
  auto first = session.step(bad, rng);
  CHECK(first.offer == dialog::OfferOutcome::Wrong);
  CHECK(first.reward == -6.0);
  auto second = session.step(bad, rng);
  CHECK(second.offer == dialog::OfferOutcome::Duplicate);
  CHECK(session.state().turn_index == 2);
}

TEST_CASE("policy failures carry the turn")
{
  const auto setup = default_setup();
  int calls = 0;
  const dialog::SystemPolicy flaky = [&](const DialogState& s, std::span<const double>) {
    if (++calls == 3) throw std::runtime_error("broken");
    return dialog::resolve_action("Request", {}, s);
  };
  RandomStream rng(4);
  try {
    run_episode(flaky, setup.ontology, {}, setup.episode, rng);
    FAIL("no exception");
  } catch (const PolicyFailure& e) {
    CHECK(e.turn() == 2);
  }
}

TEST_CASE("episode logs are consistent")
{
  const auto setup = default_setup();
  const auto policy = dialog::template_policy(baselines::rule_based_policy(
      restaurant_template(), baselines::default_heuristic_params(), dialog::feature_names(setup.ontology)));
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    RandomStream rng(seed);
    NoiseConfig noise;
    noise.error_rate = 0.3;
    const auto log = run_episode(policy, setup.ontology, noise, setup.episode, rng);
    CHECK(log.discounted_return == doctest::Approx(dialog::discounted_return(log.rewards(), 0.9)));
    CHECK(log.turns.size() <= setup.episode.max_turns);
    RandomStream again(seed);
    const auto summary = simulate_episode(policy, setup.ontology, noise, setup.episode, again);
    CHECK(summary.discounted_return == log.discounted_return);
    CHECK(summary.turns == log.turns.size());
  }
}

TEST_CASE("fitness and evaluation")
{
  const auto setup = default_setup();
  const auto ast = restaurant_template();
  const auto params = baselines::default_heuristic_params();
  const double a = fitness_simulation(ast, params, setup, 50, 9);
  CHECK(a == fitness_simulation(ast, params, setup, 50, 9));
  CHECK(a != fitness_simulation(ast, params, setup, 50, 10));

  const auto policy = dialog::template_policy(dsl::Policy(ast, params, dialog::feature_names(setup.ontology)));
  const auto m = evaluate_in_simulation(policy, setup, 50, 9);
  CHECK(m.mean_return == doctest::Approx(a));
  CHECK(m.episodes == 50);
  CHECK((m.completion_rate >= 0.0 && m.completion_rate <= 1.0));

  SUBCASE("one-episode fitness is that episode's return")
  {
    const double one = fitness_simulation(ast, params, setup, 1, 21);
    RandomStream rng(derive_seed(21, 0));
    NoiseConfig noise = setup.noise;
    noise.error_rate = setup.schedule.sample(rng);
    const auto log = run_episode(policy, setup.ontology, noise, setup.episode, rng);
    CHECK(one == doctest::Approx(dialog::discounted_return(log.rewards(), 0.9)));
  }
}

TEST_CASE("rule policy completion falls with noise")
{
  const auto setup = default_setup();
  const auto policy = dialog::template_policy(baselines::rule_based_policy(
      restaurant_template(), baselines::default_heuristic_params(), dialog::feature_names(setup.ontology)));
  double previous = 1.1;
  for (double e : {0.0, 0.2, 0.4, 0.6}) {
    const auto m = evaluate_in_simulation(policy, setup, 1000, 31, e);
    if (e == 0.0) CHECK(m.completion_rate > 0.99);
    CHECK(m.completion_rate <= previous + 0.01);
    previous = m.completion_rate;
  }
  CHECK(previous < 0.5);
}

TEST_CASE("noise schedule")
{
  NoiseSchedule s;
  RandomStream rng(6);
  std::map<double, int> seen;
  for (int i = 0; i < 7000; ++i) seen[s.sample(rng)]++;
  CHECK(seen.size() == 7);
  for (const auto& [level, count] : seen) CHECK(std::abs(count - 1000) < 150);
}

TEST_CASE("corpus generation")
{
  auto setup = default_setup();
  setup.episode.rewards = dialog::corpus_rewards();
  std::ifstream in(std::filesystem::path(GADM_DATA_DIR) / "corpus_reconstructed.gadm");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto ast = std::make_shared<const dsl::TemplateAst>(dsl::parse_template(ss.str()));
  const dsl::Policy behaviour(ast, dsl::ParameterVector({0.2, 0.6, 0.3, 0.5, 0.7, 0.2}),
                              dialog::feature_names(setup.ontology));
  std::vector<EpisodeLog> logs;
  const auto corpus = generate_corpus(behaviour, setup, {20, 0.2, 5}, &logs);
  CHECK(corpus.dialogs.size() == 20);
  CHECK(logs.size() == 20);
  CHECK_NOTHROW(corpus.validate());
  CHECK(corpus.header.reward_config == dialog::corpus_rewards());
  CHECK(corpus.header.feature_names == dialog::feature_names(setup.ontology));

  // Corpus rewards recomputed from features match the logged rewards.
  const dialog::FeatureReward fr(corpus.header.feature_names, corpus.header.reward_config);
  for (std::size_t d = 0; d < corpus.dialogs.size(); ++d) {
    REQUIRE(corpus.dialogs[d].turns.size() == logs[d].turns.size());
    for (std::size_t t = 0; t < logs[d].turns.size(); ++t) {
      const auto& tr = corpus.dialogs[d].turns[t];
      CHECK(fr(tr.state_before, tr.action, tr.state_after) == logs[d].turns[t].reward);
    }
  }

  const auto again = generate_corpus(behaviour, setup, {20, 0.2, 5});
  CHECK(again == corpus);

  const auto j = nlohmann::json::parse(episode_to_json(logs[0], setup.ontology));
  CHECK(j.at("turns").size() == logs[0].turns.size());
}
