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
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "evotod/errors.hpp"
#include "evotod/rng.hpp"
#include "evotod/strategy_bank.hpp"
#include "json.hpp"

using namespace evotod;

namespace {

Strategy make(AgentType type, DomainSet domains, std::string content, std::int64_t gen = 1) {
  Strategy s;
  s.agent_type = type;
  s.domains = std::move(domains);
  s.content = std::move(content);
  s.rationale = "r";
  s.meta.generation_index = gen;
  return s;
}

// Straight transcription of the fitness formula, kept apart from the library.
double oracle_fitness(double hp, double hm, double n, double gn, double alpha, double eps) {
  return (hp - hm) / (n + eps) + alpha * gn;
}

StrategyBank random_bank(Rng& rng, int n) {
  const std::vector<std::string> pool = {"hotel", "taxi", "train", "restaurant"};
  StrategyBank bank;
  for (int i = 0; i < n; ++i) {
    DomainSet d;
    for (const auto& p : pool) {
      if (rng.bernoulli(0.4)) d.insert(p);
    }
    if (d.empty()) d.insert(pool[rng.index(pool.size())]);
    Strategy s = make(kAgentTypes[rng.index(3)], d, "content " + std::to_string(i),
                      1 + static_cast<std::int64_t>(rng.index(5)));
    s.meta.positive_feedback = static_cast<std::int64_t>(rng.index(10));
    s.meta.negative_feedback = static_cast<std::int64_t>(rng.index(10));
    s.meta.usage_count = s.meta.positive_feedback + s.meta.negative_feedback;
    if (rng.bernoulli(0.3)) s.parents = {"s-000001"};
    const auto id = bank.add(s);
    if (rng.bernoulli(0.2)) bank.retire(id);
  }
  return bank;
}

}  // namespace

TEST_CASE("fitness examples") {
  FitnessParams p;
  StrategyMetadata m;
  CHECK(compute_fitness(m, 0.0, p) == 0.0);

  m = {3, 1, 4, 1};
  CHECK(compute_fitness(m, 0.5, p) == doctest::Approx(2.0 / 4.01 + 0.15).epsilon(1e-12));
  CHECK(compute_fitness(m, 0.5, p) == doctest::Approx(0.648753).epsilon(1e-6));

  m = {0, 5, 5, 1};
  CHECK(compute_fitness(m, 0.0, p) == doctest::Approx(-5.0 / 5.01).epsilon(1e-12));
}

TEST_CASE("fitness params validation") {
  CHECK_THROWS_AS((FitnessParams{0.3, 0.0}.validate()), ValidationError);
  CHECK_THROWS_AS((FitnessParams{-0.1, 0.01}.validate()), ValidationError);
  CHECK_NOTHROW((FitnessParams{0.0, 0.01}.validate()));
}

TEST_CASE("fitness monotone in feedback counts") {
  Rng rng(7);
  FitnessParams p;
  for (int i = 0; i < 500; ++i) {
    StrategyMetadata m{static_cast<std::int64_t>(rng.index(20)), static_cast<std::int64_t>(rng.index(20)),
                       static_cast<std::int64_t>(rng.index(40)), 1};
    const double g = rng.uniform();
    const double base = compute_fitness(m, g, p);
    CHECK(base == doctest::Approx(oracle_fitness(m.positive_feedback, m.negative_feedback, m.usage_count, g,
                                                 p.alpha, p.epsilon)));
    auto up = m;
    ++up.positive_feedback;
    CHECK(compute_fitness(up, g, p) > base);
    auto down = m;
    ++down.negative_feedback;
    CHECK(compute_fitness(down, g, p) < base);
  }
}

TEST_CASE("newer generation gains exactly alpha times the normalised gap") {
  StrategyBank bank;
  const auto a = bank.add(make(AgentType::kDP, {"hotel"}, "a", 1));
  const auto b = bank.add(make(AgentType::kDP, {"hotel"}, "b", 3));
  const auto c = bank.add(make(AgentType::kDP, {"taxi"}, "c", 5));
  FitnessParams p;
  // normalised over all alive DP strategies: gens 1,3,5 -> 0, .5, 1
  CHECK(bank.fitness(b, p) - bank.fitness(a, p) == doctest::Approx(0.3 * 0.5));
  CHECK(bank.fitness(c, p) - bank.fitness(a, p) == doctest::Approx(0.3));
}

TEST_CASE("min max normalisation") {
  Eigen::VectorXd v(4);
  v << 3, 1, 7, 4;
  const auto n = min_max_normalize(v);
  CHECK(n.minCoeff() == 0.0);
  CHECK(n.maxCoeff() == 1.0);
  CHECK(n[3] == doctest::Approx(0.5));
  Eigen::VectorXd one(1);
  one << 9;
  CHECK(min_max_normalize(one)[0] == 0.0);
  Eigen::VectorXd same = Eigen::VectorXd::Constant(3, 2.0);
  CHECK(min_max_normalize(same).isZero());

  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    Eigen::VectorXd r(2 + static_cast<Eigen::Index>(rng.index(10)));
    for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = static_cast<double>(rng.index(6));
    const auto m = min_max_normalize(r);
    if (r.maxCoeff() > r.minCoeff()) {
      CHECK(m.minCoeff() == 0.0);
      CHECK(m.maxCoeff() == 1.0);
    } else {
      CHECK(m.isZero());
    }
  }
}

TEST_CASE("record feedback updates one counter") {
  StrategyBank bank;
  auto s = make(AgentType::kDST, {"hotel"}, "x");
  s.meta.positive_feedback = 2;
  const auto id = bank.add(s);
  auto m = bank.record_feedback(id, FeedbackSignal::kUsed);
  CHECK(m.positive_feedback == 2);
  CHECK(m.usage_count == 1);
  m = bank.record_feedback(id, FeedbackSignal::kPositive);
  CHECK(m.positive_feedback == 3);
  CHECK(m.negative_feedback == 0);
  CHECK(m.usage_count == 1);
  m = bank.record_feedback(id, FeedbackSignal::kNegative);
  CHECK(m.negative_feedback == 1);
  CHECK(m.generation_index == 1);

  CHECK_THROWS_AS(bank.record_feedback("nope", FeedbackSignal::kUsed), NotFoundError);
  bank.retire(id);
  CHECK_THROWS_AS(bank.record_feedback(id, FeedbackSignal::kUsed), LifecycleError);
}

TEST_CASE("add validates invariants") {
  StrategyBank bank;
  CHECK_THROWS_AS(bank.add(make(AgentType::kDST, {}, "x")), ValidationError);
  CHECK_THROWS_AS(bank.add(make(AgentType::kDST, {"hotel"}, "")), ValidationError);
  auto s = make(AgentType::kDST, {"hotel"}, "x");
  s.id = "fixed";
  bank.add(s);
  CHECK_THROWS_AS(bank.add(s), ValidationError);
  CHECK(bank.contains("fixed"));
  CHECK_THROWS_AS(bank.get("missing"), NotFoundError);
}

TEST_CASE("candidate lookup uses exact domain sets") {
  StrategyBank bank;
  const auto hotel = bank.add(make(AgentType::kDST, {"hotel"}, "h"));
  CHECK(bank.candidates_for({"hotel"}, AgentType::kDST).size() == 1);
  CHECK(bank.candidates_for({"hotel"}, AgentType::kDST)[0].id == hotel);
  bank.retire(hotel);
  CHECK(bank.candidates_for({"hotel"}, AgentType::kDST).empty());

  // five-strategy fixture
  StrategyBank f;
  f.add(make(AgentType::kDST, {"hotel"}, "1"));
  f.add(make(AgentType::kDST, {"taxi"}, "2"));
  const auto combo = f.add(make(AgentType::kDST, {"hotel", "taxi"}, "3"));
  f.add(make(AgentType::kDP, {"hotel", "taxi"}, "4"));
  f.add(make(AgentType::kDST, {"hotel", "taxi", "train"}, "5"));
  const auto got = f.candidates_for({"hotel", "taxi"}, AgentType::kDST);
  REQUIRE(got.size() == 1);
  CHECK(got[0].id == combo);
  for (const auto& s : f.strategies()) {
    const bool expected = s.agent_type == AgentType::kDST && s.domains == DomainSet{"hotel", "taxi"};
    CHECK(expected == (s.id == combo));
  }
}

TEST_CASE("candidate lookup property over random banks") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    const auto bank = random_bank(rng, 40);
    for (auto type : kAgentTypes) {
      for (const DomainSet& q : {DomainSet{"hotel"}, DomainSet{"hotel", "taxi"}, DomainSet{"train"}}) {
        const auto got = bank.candidates_for(q, type);
        std::size_t expected = 0;
        for (const auto& s : bank.strategies()) {
          if (s.alive && s.agent_type == type && s.domains == q) ++expected;
        }
        CHECK(got.size() == expected);
        for (const auto& s : got) {
          CHECK(s.alive);
          CHECK(s.agent_type == type);
          CHECK(s.domains == q);
        }
        CHECK(bank.covered(q, type) == (expected > 0));
      }
    }
  }
}

TEST_CASE("snapshot round trip") {
  CHECK(bank_from_json(bank_to_json(StrategyBank{})).size() == 0);

  Rng rng(5);
  const auto bank = random_bank(rng, 30);
  const auto back = bank_from_json(bank_to_json(bank));
  CHECK(back.strategies() == bank.strategies());

  for (int t = 0; t < 10; ++t) {
    const auto b = random_bank(rng, 1 + static_cast<int>(rng.index(50)));
    CHECK(bank_from_json(bank_to_json(b)).strategies() == b.strategies());
  }

  const auto dir = std::filesystem::temp_directory_path() / "evotod_bank_test";
  std::filesystem::create_directories(dir);
  save_bank(bank, dir / "bank.json");
  CHECK(load_bank(dir / "bank.json").strategies() == bank.strategies());
  std::filesystem::remove_all(dir);
}

TEST_CASE("snapshot field names and parse errors") {
  StrategyBank bank;
  bank.add(make(AgentType::kNLG, {"hotel"}, "x"));
  bank.add(make(AgentType::kDP, {"taxi"}, "y"));
  auto doc = nlohmann::json::parse(bank_to_json(bank));
  REQUIRE(doc.is_array());
  for (const char* k : {"id", "agent_type", "domains", "content", "reason", "h_plus", "h_minus", "n_used",
                        "generation", "alive"}) {
    CHECK(doc[0].contains(k));
  }
  doc[1].erase("content");
  try {
    bank_from_json(doc.dump());
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.record().find("record 1") != std::string::npos);
    CHECK(std::string(e.what()).find("content") != std::string::npos);
  }
  CHECK_THROWS_AS(bank_from_json("{"), ParseError);
  CHECK_THROWS_AS(bank_from_json("{}"), ParseError);
}

TEST_CASE("ids continue after a loaded snapshot") {
  StrategyBank bank;
  bank.add(make(AgentType::kNLG, {"hotel"}, "x"));
  bank.add(make(AgentType::kNLG, {"hotel"}, "y"));
  auto back = bank_from_json(bank_to_json(bank));
  const auto id = back.add(make(AgentType::kNLG, {"hotel"}, "z"));
  CHECK_FALSE(bank.contains(id));
  CHECK(back.size() == 3);
}

TEST_CASE("populations group alive members") {
  StrategyBank bank;
  bank.add(make(AgentType::kDST, {"hotel"}, "a"));
  bank.add(make(AgentType::kDST, {"hotel"}, "b"));
  const auto dead = bank.add(make(AgentType::kDP, {"hotel"}, "c"));
  bank.retire(dead);
  const auto pops = bank.populations();
  CHECK(pops.size() == 1);
  CHECK(pops.at({AgentType::kDST, "hotel"}).size() == 2);
  CHECK(bank.alive_count() == 2);
  CHECK(bank.size() == 3);
  CHECK(bank.fitness_table(FitnessParams{}).size() == 2);
}
