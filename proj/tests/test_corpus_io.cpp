#include <doctest.h>

#include <filesystem>
#include <set>

#include "gadm/corpus_io.hpp"
#include "support.hpp"

using namespace gadm;
using namespace gadm::corpus;
namespace t = gadm::testing;

namespace {

corpus::Corpus multi_turn_corpus(std::size_t dialogs, std::uint64_t seed)
{
  CorpusHeader h;
  h.feature_names = {"position"};
  h.action_set = {"reset", "advance"};
  h.reward_config = dialog::simulation_rewards();
  const auto ts = t::chain_corpus(dialogs, 0.7, seed);
  return make_corpus(h, ts);
}

std::size_t error_line(const std::string& text)
{
  try {
    parse_corpus(text);
  } catch (const CorpusError& e) {
    return e.line();
  }
  return 0;
}

const std::string kHeader =
    R"({"schema_version":1,"feature_names":["x"],"action_set":["a","b"],)"
    R"("reward_config":{"name":"t","per_turn":-1,"correct_offer":100,"duplicate_offer":-5,"wrong_offer":-5,"gamma":0.9}})";

std::string record(const std::string& id, int turn, const std::string& action, bool terminal,
                   const std::string& s = "[0.5]")
{
  return R"({"dialog_id":")" + id + R"(","turn":)" + std::to_string(turn) + R"(,"s":)" + s + R"(,"a":")" + action +
         R"(","s_next":[0.25],"terminal":)" + (terminal ? "true" : "false") + "}";
}

}  // namespace

TEST_CASE("serialization round-trip is byte identical")
{
  const auto c = multi_turn_corpus(30, 1);
  const std::string text = serialize_corpus(c);
  const auto back = parse_corpus(text);
  CHECK(back == c);
  CHECK(serialize_corpus(back) == text);

  const auto synthetic = t::synthetic_corpus(50, 2);
  CHECK(parse_corpus(serialize_corpus(synthetic)) == synthetic);

  const auto path = (std::filesystem::temp_directory_path() / "gadm_test_corpus.jsonl").string();
  save_corpus(c, path);
  CHECK(load_corpus(path) == c);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_corpus(path), CorpusError);
}

TEST_CASE("header-only corpus")
{
  const auto c = parse_corpus(kHeader + "\n");
  CHECK(c.dialogs.empty());
  CHECK(c.transition_count() == 0);
  CHECK(c.header.action_set.size() == 2);
  CHECK(c.header.reward_config.gamma == 0.9);
  CHECK(parse_corpus(serialize_corpus(c)) == c);
}

TEST_CASE("parse errors carry line numbers")
{
  const std::string ok1 = record("d1", 0, "a", false);
  const std::string ok2 = record("d1", 1, "b", true);
  CHECK_NOTHROW(parse_corpus(kHeader + "\n" + ok1 + "\n" + ok2 + "\n"));

  CHECK(error_line("") == 1);
  CHECK(error_line("{not json\n") == 1);
  CHECK(error_line(kHeader + "\n" + ok1 + "\n{broken\n") == 3);
  CHECK(error_line(kHeader + "\n" + ok1 + "\n" + record("d1", 1, "zz", true) + "\n") == 3);
  CHECK(error_line(kHeader + "\n" + record("d1", 0, "a", true, "[0.5, 1]") + "\n") == 2);
  CHECK(error_line(kHeader + "\n" + ok1 + "\n" + record("d1", 2, "b", true) + "\n") == 3);
  CHECK(error_line(kHeader + "\n" + ok1 + "\n" + record("d2", 0, "b", true) + "\n") == 3);
  CHECK(error_line(kHeader + "\n" + ok1 + "\n") == 2);
  CHECK(error_line(kHeader + "\n" + record("d1", 0, "a", true) + "\n" + record("d1", 1, "a", true) + "\n") == 3);

  try {
    parse_corpus(kHeader + "\n" + ok1 + "\n");
    FAIL("expected a missing terminal");
  } catch (const CorpusError& e) {
    CHECK(e.kind() == CorpusError::Kind::MissingTerminal);
  }
  std::string v2 = kHeader;
  v2.replace(v2.find("\"schema_version\":1"), 18, "\"schema_version\":7");
  try {
    parse_corpus(v2 + "\n");
    FAIL("expected a schema mismatch");
  } catch (const CorpusError& e) {
    CHECK(e.kind() == CorpusError::Kind::SchemaMismatch);
  }
}

TEST_CASE("make_corpus validates")
{
  auto ts = t::chain_corpus(3, 0.7, 4);
  CHECK(make_corpus(multi_turn_corpus(1, 1).header, ts).dialogs.size() == 3);
  ts.back().is_terminal = false;
  CHECK_THROWS_AS(make_corpus(multi_turn_corpus(1, 1).header, ts), CorpusError);

  auto c = multi_turn_corpus(3, 5);
  c.dialogs[0].turns[0].state_before.clear();
  CHECK_THROWS_AS(c.validate(), CorpusError);
}

TEST_CASE("resampling")
{
  const auto c = t::synthetic_corpus(1117, 6);
  const ResamplePlan plan{12, 0.5, 99};
  const auto splits = resample_splits(c, plan);
  REQUIRE(splits.size() == 12);
  std::set<std::vector<std::string>> distinct;
  for (const auto& s : splits) {
    CHECK(s.train.dialogs.size() == 558);
    CHECK(s.test.dialogs.size() == 559);
    std::set<std::string> ids;
    std::vector<std::string> order;
    for (const auto& d : s.train.dialogs) {
      ids.insert(d.id);
      order.push_back(d.id);
    }
    for (const auto& d : s.test.dialogs) CHECK(ids.count(d.id) == 0);
    ids.clear();
    for (const auto& d : s.test.dialogs) ids.insert(d.id);
    CHECK(ids.size() == 559);
    distinct.insert(order);
  }
  CHECK(distinct.size() == 12);

  const auto again = resample_splits(c, plan);
  for (std::size_t r = 0; r < 12; ++r) CHECK(again[r].train == splits[r].train);

  CHECK_THROWS(resample_splits(c, {0, 0.5, 1}));
  CHECK_THROWS(resample_splits(c, {3, 1.5, 1}));
}

TEST_CASE("summary statistics")
{
  CHECK(summarize(std::vector<double>{}).mean == 0.0);
  const auto one = summarize(std::vector<double>{4.0});
  CHECK(one.mean == 4.0);
  CHECK(one.std == 0.0);
  const auto s = summarize(std::vector<double>{2, 4, 4, 4, 5, 5, 7, 9});
  CHECK(s.mean == 5.0);
  CHECK(s.std == doctest::Approx(std::sqrt(32.0 / 7.0)));
}
