// Copyright 2026 The evotod Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include <cmath>
#include <map>

#include "doctest.h"
#include "evotod/errors.hpp"
#include "evotod/evaluation.hpp"
#include "evotod/rng.hpp"
#include "metric_oracles.hpp"

using namespace evotod;
using evotod::testing::oracle_bleu;

namespace {

using Tokens = std::vector<std::string>;

Tokens split_ws(const std::string& s) {
  Tokens out;
  std::string cur;
  for (char c : s) {
    if (c == ' ') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

TurnRecord turn(std::string action, std::string response) {
  TurnRecord t;
  t.user_utterance = "u";
  t.system_action = std::move(action);
  t.system_response = std::move(response);
  return t;
}

Trajectory traj(std::string id, std::vector<TurnRecord> turns) {
  Trajectory t;
  t.dialog_id = std::move(id);
  t.turns = std::move(turns);
  return t;
}

}  // namespace

TEST_CASE("bleu identity and the short example") {
  CHECK(bleu({"the cat sat on the mat", "a dog"}, {"the cat sat on the mat", "a dog"}) == doctest::Approx(100.0));
  const double short_case = corpus_bleu({{"the", "cat"}}, {{"the", "cat", "sat"}});
  CHECK(short_case == doctest::Approx(oracle_bleu({{"the", "cat"}}, {{"the", "cat", "sat"}})).epsilon(1e-12));
  // p1 = p2 = 1, higher orders smoothed to 1, brevity penalty e^(1 - 3/2)
  CHECK(short_case == doctest::Approx(100 * std::exp(-0.5)).epsilon(1e-12));
}

TEST_CASE("disjoint vocabulary scores small but non-zero") {
  const std::vector<std::string> cands = {"please find attached our quarterly revenue summary for review today",
                                          "my umbrella broke during yesterday afternoon storm near campus",
                                          "seven purple elephants danced quietly beside old wooden bridges"};
  const std::vector<std::string> refs = {"the hotel is located in the north with free parking available",
                                         "i have booked a table for two people at seven thirty",
                                         "your train leaves cambridge at nine and arrives in london"};
  const double b = bleu(cands, refs);
  CHECK(b > 0.0);
  CHECK(b < 5.0);
}

TEST_CASE("bleu errors") {
  CHECK_THROWS_AS(corpus_bleu({}, {}), ValidationError);
  CHECK_THROWS_AS(corpus_bleu({{"a"}}, {{"a"}, {"b"}}), ValidationError);
  CHECK(corpus_bleu({{}}, {{"a"}}) == 0.0);
}

TEST_CASE("bleu matches the oracle on random corpora") {
  Rng rng(2024);
  const Tokens vocab = {"the", "a", "hotel", "north", "cheap", "is", "in", "train", "at", "food", "[hotel_name]"};
  for (int t = 0; t < 50; ++t) {
    std::vector<Tokens> c(1 + rng.index(6)), r(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
      for (auto n = rng.index(12); n > 0; --n) c[i].push_back(vocab[rng.index(vocab.size())]);
      for (auto n = 1 + rng.index(12); n > 0; --n) r[i].push_back(vocab[rng.index(vocab.size())]);
    }
    const double want = oracle_bleu(c, r);
    const double got = corpus_bleu(c, r);
    CHECK(std::abs(got - want) < 1e-6);
    CHECK(got >= 0.0);
    CHECK(got <= 100.0 + 1e-9);
  }
}

TEST_CASE("bleu tokenizer and delexicalisation") {
  CHECK(bleu_tokenize("The [hotel_name], ok?") == Tokens{"the", "hotel_name", "ok"});
  Delexicalizer d;
  d.add("Golden Wok", "[restaurant_name]");
  CHECK(bleu({"try golden wok"}, {"try [restaurant_name]"}, &d) == doctest::Approx(100.0));
}

TEST_CASE("combine examples") {
  CHECK(std::abs(combine(98.34, 92.86, 21.74) - 117.34) < 0.01);
  CHECK(combine(0, 0, 0) == 0.0);
  CHECK(std::abs(combine(99.10, 96.20, 22.94) - 120.59) < 0.01);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform() * 100, b = rng.uniform() * 100, c = rng.uniform() * 100;
    CHECK(std::abs(combine(a, b, c) - ((a + b) * 0.5 + c)) < 1e-9);
  }
}

TEST_CASE("entropy examples") {
  CHECK(entropy_bits({"hello hello", "Hello!"}) == 0.0);
  CHECK(entropy_bits({"a b"}) == doctest::Approx(1.0));
  CHECK(entropy_bits({"a b", "c d"}) == doctest::Approx(2.0));
  CHECK(entropy_bits({"a a b c"}) == doctest::Approx(1.5));
  CHECK_THROWS_AS(entropy_bits({"", "!!"}), ValidationError);
  CHECK_THROWS_AS(bank_entropy(StrategyBank{}), ValidationError);
  CHECK(entropy_tokenize("Don't stop, NOW") == Tokens{"dont", "stop", "now"});
}

TEST_CASE("entropy bounds") {
  Rng rng(77);
  for (int t = 0; t < 100; ++t) {
    std::string text;
    std::set<std::string> vocab;
    for (auto n = 1 + rng.index(40); n > 0; --n) {
      const std::string w(1, static_cast<char>('a' + rng.index(10)));
      vocab.insert(w);
      text += w + " ";
    }
    const double h = entropy_bits({text});
    CHECK(h >= 0.0);
    CHECK(h <= std::log2(static_cast<double>(vocab.size())) + 1e-12);
  }
}

TEST_CASE("inform and success") {
  Schema schema;
  schema.domains["restaurant"] = {"name", {"area", "food"}, {"phone", "address"}, {}};
  DomainDatabase db;
  db.entities["restaurant"] = {{{"name", "golden wok"}, {"area", "north"}, {"food", "chinese"},
                                {"phone", "01223350688"}, {"address", "191 histon road"}},
                               {{"name", "pizza hut"}, {"area", "centre"}, {"food", "italian"},
                                {"phone", "01223323737"}, {"address", "regent street"}}};
  UserGoal goal;
  goal.domains["restaurant"].informables = {{"area", "north"}};
  goal.domains["restaurant"].requestables = {"phone", "address"};

  const auto full = traj("ok", {turn("recommend(name=golden wok)", "golden wok is in the north."),
                                turn("inform(phone=01223350688)", "call 01223350688, at 191 histon road.")});
  const auto partial = traj("half", {turn("recommend(name=golden wok)", "golden wok, phone 01223350688.")});
  const auto wrong = traj("bad", {turn("recommend(name=pizza hut)", "pizza hut: 01223323737, regent street.")});
  const auto placeholders =
      traj("ph", {turn("recommend(name=golden wok)", "[restaurant_name] has [restaurant_phone] at [restaurant_address]")});

  const auto r = score_dialogs({full, partial, wrong, placeholders}, {goal, goal, goal, goal}, db, schema);
  REQUIRE(r.per_dialog.size() == 4);
  CHECK(r.per_dialog[0].inform);
  CHECK(r.per_dialog[0].success);
  CHECK(r.per_dialog[0].offered.at("restaurant") == "golden wok");
  CHECK(r.per_dialog[1].inform);
  CHECK_FALSE(r.per_dialog[1].success);
  CHECK_FALSE(r.per_dialog[2].inform);
  CHECK_FALSE(r.per_dialog[2].success);
  CHECK(r.per_dialog[3].success);
  CHECK(r.inform == doctest::Approx(75.0));
  CHECK(r.success == doctest::Approx(50.0));

  // the entity mentioned last wins
  const auto switched = traj("sw", {turn("recommend(name=golden wok)", "ok"), turn("recommend(name=pizza hut)", "ok")});
  CHECK_FALSE(evaluate_dialog("sw", switched.turns, goal, db, schema).inform);

  CHECK_THROWS_AS(score_dialogs({full}, {}, db, schema), ValidationError);
  CHECK_THROWS_AS(score_dialogs({}, {}, db, schema), ValidationError);
}

TEST_CASE("synthetic ground truth scores full marks") {
  const auto s = synth_corpus(5, 40);
  std::vector<Trajectory> trajs;
  std::vector<UserGoal> goals;
  for (const auto& d : s.corpus.dialogs) {
    Trajectory t;
    t.dialog_id = d.dialog_id;
    for (const auto& [domain, g] : d.goal.domains) {
      const auto& key = s.schema.domain(domain).key_slot;
      for (const auto& e : s.db.entities.at(domain)) {
        if (!entity_matches(e, g.informables)) continue;
        std::string resp = e.at(key);
        for (const auto& slot : g.requestables) resp += " " + e.at(slot);
        t.turns.push_back(turn("recommend(" + key + "=" + e.at(key) + ")", resp));
        break;
      }
    }
    trajs.push_back(t);
    goals.push_back(d.goal);
  }
  const auto r = score_dialogs(trajs, goals, s.db, s.schema);
  CHECK(r.inform == 100.0);
  CHECK(r.success == 100.0);
}

TEST_CASE("success never exceeds inform") {
  const auto s = synth_corpus(8, 60);
  Rng rng(3);
  std::vector<Trajectory> trajs;
  std::vector<UserGoal> goals;
  for (const auto& d : s.corpus.dialogs) {
    Trajectory t;
    t.dialog_id = d.dialog_id;
    for (const auto& [domain, _] : d.goal.domains) {
      const auto& list = s.db.entities.at(domain);
      const auto& e = list[rng.index(list.size())];
      std::string resp;
      for (const auto& [slot, v] : e) {
        if (rng.bernoulli(0.5)) resp += v + " ";
      }
      t.turns.push_back(turn("inform()", resp));
    }
    trajs.push_back(t);
    goals.push_back(d.goal);
  }
  const auto r = score_dialogs(trajs, goals, s.db, s.schema);
  CHECK(r.success <= r.inform);
  for (const auto& d : r.per_dialog) CHECK((!d.success || d.inform));
}

TEST_CASE("bank statistics") {
  TokenHashEmbedder e(64);
  StrategyBank one;
  Strategy s;
  s.agent_type = AgentType::kDP;
  s.domains = {"hotel"};
  s.content = "ask for the area";
  s.meta.generation_index = 3;
  one.add(s);
  auto st = bank_stats(one, e, FitnessParams{});
  CHECK_FALSE(st.mean_pairwise_similarity.has_value());
  CHECK(st.alive == 1);

  s.meta.generation_index = 5;
  one.add(s);
  st = bank_stats(one, e, FitnessParams{});
  REQUIRE(st.mean_pairwise_similarity.has_value());
  CHECK(*st.mean_pairwise_similarity == doctest::Approx(1.0));
  CHECK(st.avg_generation.at(AgentType::kDP) == doctest::Approx(4.0));
  // gens 3 and 5 normalise to 0 and 1; no feedback yet
  CHECK(*st.mean_alive_fitness == doctest::Approx(0.15));
  CHECK(*st.entropy_bits == doctest::Approx(2.0));

  const auto csv = export_embeddings_csv(one, e);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
  CHECK(csv.rfind("id,agent_type,domains,generation,alive,e0,", 0) == 0);

  StrategyBank empty;
  const auto es = bank_stats(empty, e, FitnessParams{});
  CHECK_FALSE(es.entropy_bits.has_value());
  CHECK(es.alive == 0);
}

TEST_CASE("metrics csv rows line up with the header") {
  PhaseRow row;
  row.phase_pct = 10;
  row.dialogs_processed = 3;
  row.metrics.combine = 50;
  const auto header = metrics_csv_header();
  const auto line = metrics_csv_row(row);
  CHECK(std::count(header.begin(), header.end(), ',') == std::count(line.begin(), line.end(), ','));
  CHECK(line.rfind("10,3,", 0) == 0);
}
