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


#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "evotod/errors.hpp"
#include "evotod/evolution_engine.hpp"

using namespace evotod;
using nlohmann::json;

namespace {

// Fixed vectors for known texts; anything else falls back to the hash embedder.
class LookupEmbedder : public Embedder {
 public:
  std::map<std::string, Eigen::VectorXd> table;
  HashEmbedder fallback{6};

  EmbeddingVector embed(const std::string& text) override {
    auto it = table.find(text);
    if (it == table.end()) return fallback.embed(text);
    return {it->second.normalized(), "lookup"};
  }
  std::string model_tag() const override { return "lookup"; }
  Eigen::Index dimension() const override { return 6; }
};

Eigen::VectorXd axis(int i, double angle_deg = 0.0, int j = 1) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(6);
  const double a = angle_deg * M_PI / 180.0;
  v[i] = std::cos(a);
  v[j] += std::sin(a);
  return v;
}

std::string stubs(int n, const std::string& tag) {
  json arr = json::array();
  for (int i = 1; i <= n; ++i) {
    arr.push_back({{"reason", "why " + std::to_string(i)}, {"content", "stub strategy " + std::to_string(i) + " " + tag}});
  }
  return arr.dump();
}

std::string mutation_reply(int score, const std::string& content = "revised strategy") {
  return json{{"strategy", {{"agent_type", "DST"}, {"content", content}, {"reason", "fix"}, {"score", score}}}}.dump();
}

std::string merge_reply(const std::string& content = "merged strategy") {
  return json{{"content", content}, {"reason", "merged"}}.dump();
}

Strategy make(AgentType t, DomainSet d, std::string content, StrategyMetadata m = {}) {
  Strategy s;
  s.agent_type = t;
  s.domains = std::move(d);
  s.content = std::move(content);
  s.rationale = "r";
  s.meta = m;
  return s;
}

// phi = (H+ - H-)/(N + eps) + alpha * gen_norm, gen_norm over the given set
std::map<std::string, double> oracle_fitness(const std::vector<Strategy>& pop, double alpha = 0.3,
                                             double eps = 0.01) {
  std::int64_t lo = pop.front().meta.generation_index, hi = lo;
  for (const auto& s : pop) {
    lo = std::min(lo, s.meta.generation_index);
    hi = std::max(hi, s.meta.generation_index);
  }
  std::map<std::string, double> out;
  for (const auto& s : pop) {
    const double g = hi > lo ? double(s.meta.generation_index - lo) / double(hi - lo) : 0.0;
    out[s.id] = double(s.meta.positive_feedback - s.meta.negative_feedback) / (double(s.meta.usage_count) + eps) +
                alpha * g;
  }
  return out;
}

struct World {
  std::shared_ptr<MockProvider> mock = std::make_shared<MockProvider>();
  ProviderConfig online;
  ProviderConfig offline;
  LlmGateway gateway{mock, online, mock, offline};
  LookupEmbedder embedder;
  StrategyBank bank;
  EvolutionParams params;

  EvolutionEngine engine() { return EvolutionEngine(gateway, embedder, params); }

  void script_genesis() {
    mock->register_handler({TemplateId::kGenesis, {}}, [](const ChatRequest& r) {
      return stubs(std::stoi(r.variables.at("num")),
                   "for " + r.variables.at("agent_type") + " " + r.variables.at("domain_str"));
    });
  }

  Trajectory trajectory(const std::string& dst_id, Outcome outcome = Outcome::kFailure) {
    Trajectory t;
    t.dialog_id = "d1";
    t.domains = {"hotel"};
    t.strategies_used[AgentType::kDST] = dst_id;
    TurnRecord turn;
    turn.user_utterance = "a hotel in the north please";
    turn.system_action = "request(area)";
    turn.system_response = "Which area?";
    t.turns.push_back(turn);
    t.outcome = outcome;
    return t;
  }
};

}  // namespace

TEST_CASE("genesis adds K fresh strategies") {
  World w;
  w.script_genesis();
  auto eng = w.engine();
  auto ids = eng.genesis(w.bank, "hotel", AgentType::kDST);
  CHECK(ids.size() == 10);
  CHECK(w.bank.alive_count() == 10);
  for (const auto& id : ids) {
    const auto s = w.bank.get(id);
    CHECK(s.alive);
    CHECK(s.meta == StrategyMetadata{0, 0, 0, 1});
    CHECK(s.domains == DomainSet{"hotel"});
    CHECK(s.agent_type == AgentType::kDST);
    CHECK(s.parents.empty());
  }
  CHECK(w.bank.get(ids[0]).content == "stub strategy 1 for DST hotel");
  CHECK(w.bank.get(ids[0]).rationale == "why 1");
  const auto call = w.mock->calls().front();
  CHECK(call.variables.at("num") == "10");
  CHECK(call.variables.at("agent_role").size() > 0);
}

TEST_CASE("genesis refuses a population that is already alive") {
  World w;
  w.script_genesis();
  auto eng = w.engine();
  eng.genesis(w.bank, "hotel", AgentType::kDST);
  CHECK_THROWS_AS(eng.genesis(w.bank, "hotel", AgentType::kDST), PreconditionError);
  CHECK(w.bank.alive_count() == 10);
  // other types and domains are independent populations
  CHECK(eng.genesis(w.bank, "hotel", AgentType::kNLG).size() == 10);
  CHECK(eng.genesis(w.bank, "restaurant", AgentType::kDST).size() == 10);
}

TEST_CASE("genesis with the wrong count retries then reports a count mismatch") {
  World w;
  w.mock->register_script({TemplateId::kGenesis, {}}, {stubs(9, "x")});
  auto eng = w.engine();
  try {
    eng.genesis(w.bank, "hotel", AgentType::kDP);
    FAIL("expected CountMismatchError");
  } catch (const CountMismatchError& e) {
    CHECK(e.attempts() == 3);
    CHECK(e.schema_ok());
  }
  CHECK(w.mock->call_count() == 3);
  CHECK(w.bank.size() == 0);
}

TEST_CASE("genesis recovers when a retry returns the right count") {
  World w;
  w.mock->register_script({TemplateId::kGenesis, {}}, {stubs(9, "x"), stubs(10, "y")});
  auto eng = w.engine();
  CHECK(eng.genesis(w.bank, "hotel", AgentType::kDP).size() == 10);
  CHECK(w.mock->call_count() == 2);
}

TEST_CASE("genesis honours a different K") {
  World w;
  w.params.genesis_k = 3;
  w.script_genesis();
  auto eng = w.engine();
  CHECK(eng.genesis(w.bank, "hotel", AgentType::kDP).size() == 3);
}

TEST_CASE("merge_metadata averages with round half up and bumps the generation") {
  CHECK(merge_metadata({{2, 0, 4, 3}, {4, 2, 6, 5}}) == StrategyMetadata{3, 1, 5, 6});
  CHECK(merge_metadata({{1, 0, 0, 1}, {0, 0, 1, 2}}) == StrategyMetadata{1, 0, 1, 3});
  CHECK(merge_metadata({{1, 1, 1, 1}, {1, 1, 1, 1}, {2, 2, 2, 1}}) == StrategyMetadata{1, 1, 1, 2});
  CHECK(merge_metadata({{5, 7, 9, 4}}) == StrategyMetadata{5, 7, 9, 5});
  CHECK_THROWS_AS(merge_metadata({}), ValidationError);
}

TEST_CASE("merge_metadata matches a floating point oracle") {
  std::mt19937_64 gen(11);
  std::uniform_int_distribution<int> v(0, 40), n(1, 6);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<StrategyMetadata> src(n(gen));
    std::int64_t gmax = 0;
    double sp = 0, sm = 0, su = 0;
    for (auto& m : src) {
      m = {v(gen), v(gen), v(gen), v(gen) + 1};
      sp += double(m.positive_feedback);
      sm += double(m.negative_feedback);
      su += double(m.usage_count);
      gmax = std::max(gmax, m.generation_index);
    }
    const double k = double(src.size());
    const auto r = merge_metadata(src);
    CHECK(r.positive_feedback == std::int64_t(std::floor(sp / k + 0.5)));
    CHECK(r.negative_feedback == std::int64_t(std::floor(sm / k + 0.5)));
    CHECK(r.usage_count == std::int64_t(std::floor(su / k + 0.5)));
    CHECK(r.generation_index == gmax + 1);
  }
}

TEST_CASE("compose builds a multi-domain strategy from single-domain sources") {
  World w;
  const auto a = w.bank.add(make(AgentType::kDST, {"hotel"}, "hotel tracking", {2, 0, 4, 3}));
  const auto b = w.bank.add(make(AgentType::kDST, {"restaurant"}, "restaurant tracking", {4, 2, 6, 5}));
  w.mock->register_script({TemplateId::kConsolidation, {}}, {merge_reply("joint tracking")});
  auto eng = w.engine();
  Rng rng(1);
  const auto id = eng.compose_multidomain(w.bank, {"hotel", "restaurant"}, AgentType::kDST, rng);
  const auto s = w.bank.get(id);
  CHECK(s.domains == DomainSet{"hotel", "restaurant"});
  CHECK(s.meta == StrategyMetadata{3, 1, 5, 6});
  CHECK(s.content == "joint tracking");
  CHECK(std::set<std::string>(s.parents.begin(), s.parents.end()) == std::set<std::string>{a, b});
  CHECK(w.bank.get(a).alive);
  CHECK(w.bank.get(b).alive);
  const auto call = w.mock->calls().front();
  CHECK(call.variables.at("strategies_text").find("hotel tracking") != std::string::npos);
  CHECK(call.variables.at("strategies_text").find("restaurant tracking") != std::string::npos);
}

TEST_CASE("compose needs coverage for every domain") {
  World w;
  w.bank.add(make(AgentType::kDST, {"hotel"}, "hotel tracking"));
  w.mock->register_script({TemplateId::kConsolidation, {}}, {merge_reply()});
  auto eng = w.engine();
  Rng rng(1);
  CHECK_THROWS_AS(eng.compose_multidomain(w.bank, {"hotel", "restaurant"}, AgentType::kDST, rng), PreconditionError);
  CHECK_THROWS_AS(eng.compose_multidomain(w.bank, {"hotel"}, AgentType::kDST, rng), PreconditionError);
  CHECK(w.mock->call_count() == 0);
}

TEST_CASE("ensure_coverage fills every agent type for a combination") {
  World w;
  w.script_genesis();
  w.mock->register_script({TemplateId::kConsolidation, {}}, {merge_reply("joint")});
  auto eng = w.engine();
  Rng rng(5);
  std::vector<OperationRecord> log;
  eng.ensure_coverage(w.bank, {"hotel", "restaurant"}, rng, &log);
  for (AgentType t : kAgentTypes) {
    CHECK(w.bank.covered({"hotel"}, t));
    CHECK(w.bank.covered({"restaurant"}, t));
    CHECK(w.bank.candidates_for({"hotel", "restaurant"}, t).size() == 1);
  }
  std::size_t genesis = 0, compose = 0;
  for (const auto& op : log) {
    genesis += op.op == "genesis";
    compose += op.op == "compose";
  }
  CHECK(genesis == 6);
  CHECK(compose == 3);
  CHECK(w.bank.alive_count() == 63);
  // a second pass has nothing to do
  const auto calls = w.mock->call_count();
  eng.ensure_coverage(w.bank, {"hotel", "restaurant"}, rng, &log);
  CHECK(w.mock->call_count() == calls);
}

TEST_CASE("mutation with a negative score penalises and retires the parent") {
  World w;
  const auto p = w.bank.add(make(AgentType::kDST, {"hotel"}, "old", {1, 0, 3, 2}));
  w.mock->register_script({TemplateId::kMutation, {}}, {mutation_reply(-1, "new")});
  auto eng = w.engine();
  auto out = eng.mutate(w.bank, p, w.trajectory(p));
  REQUIRE(out);
  CHECK(out->score == -1);
  const auto parent = w.bank.get(p);
  const auto child = w.bank.get(out->child_id);
  CHECK_FALSE(parent.alive);
  CHECK(parent.meta == StrategyMetadata{1, 1, 3, 2});
  CHECK(child.alive);
  CHECK(child.meta == StrategyMetadata{1, 1, 3, 3});
  CHECK(child.content == "new");
  CHECK(child.parents == std::vector<std::string>{p});
  const auto call = w.mock->calls().front();
  CHECK(call.variables.at("strategies_by_type").find("(target): old") != std::string::npos);
  CHECK(call.variables.at("dialog_result") == "failure");
}

TEST_CASE("mutation score zero and plus one") {
  World w;
  const auto p0 = w.bank.add(make(AgentType::kDST, {"hotel"}, "a", {1, 0, 3, 2}));
  const auto p1 = w.bank.add(make(AgentType::kDST, {"hotel"}, "b", {1, 0, 3, 2}));
  w.mock->register_script({TemplateId::kMutation, {}}, {mutation_reply(0), mutation_reply(1)});
  auto eng = w.engine();
  auto o0 = eng.mutate(w.bank, p0, w.trajectory(p0));
  auto o1 = eng.mutate(w.bank, p1, w.trajectory(p1));
  REQUIRE(o0);
  REQUIRE(o1);
  CHECK(w.bank.get(p0).meta == StrategyMetadata{1, 0, 3, 2});
  CHECK(w.bank.get(o0->child_id).meta == StrategyMetadata{1, 0, 3, 3});
  CHECK(w.bank.get(p1).meta == StrategyMetadata{2, 0, 3, 2});
  CHECK(w.bank.get(o1->child_id).meta == StrategyMetadata{2, 0, 3, 3});
}

TEST_CASE("mutation failures leave the bank untouched") {
  World w;
  const auto p = w.bank.add(make(AgentType::kDST, {"hotel"}, "a", {1, 0, 3, 2}));
  w.mock->register_script({TemplateId::kMutation, {}}, {"not json", "still not", mutation_reply(5)});
  auto eng = w.engine();
  const auto before = w.bank.strategies();
  CHECK_FALSE(eng.mutate(w.bank, p, w.trajectory(p)));
  CHECK(w.mock->call_count() == 3);
  CHECK(w.bank.strategies() == before);

  // an out-of-range score is also a failed call
  World w2;
  const auto q = w2.bank.add(make(AgentType::kDST, {"hotel"}, "a"));
  w2.mock->register_script({TemplateId::kMutation, {}}, {mutation_reply(2)});
  auto eng2 = w2.engine();
  CHECK_FALSE(eng2.mutate(w2.bank, q, w2.trajectory(q)));
  CHECK(w2.bank.alive_count() == 1);

  w2.bank.retire(q);
  CHECK_THROWS_AS(eng2.mutate(w2.bank, q, w2.trajectory(q)), PreconditionError);
}

TEST_CASE("mutation sees critiques aimed at its module") {
  World w;
  const auto p = w.bank.add(make(AgentType::kDST, {"hotel"}, "a"));
  w.mock->register_script({TemplateId::kMutation, {}}, {mutation_reply(0)});
  auto t = w.trajectory(p);
  t.turns[0].critiques.push_back({Role::kDP, Role::kDST, "area was missed", "the user said north"});
  t.turns[0].critiques.push_back({Role::kUserSim, Role::kNLG, "too terse", ""});
  auto eng = w.engine();
  REQUIRE(eng.mutate(w.bank, p, t));
  const auto data = w.mock->calls().front().variables.at("evolve_data");
  CHECK(data.find("area was missed") != std::string::npos);
  CHECK(data.find("the user said north") != std::string::npos);
  CHECK(data.find("too terse") == std::string::npos);
}

TEST_CASE("consolidating duplicates shrinks the population by one") {
  World w;
  const auto a = w.bank.add(make(AgentType::kNLG, {"hotel"}, "same text", {2, 0, 4, 1}));
  const auto b = w.bank.add(make(AgentType::kNLG, {"hotel"}, "same text", {0, 0, 2, 2}));
  w.bank.add(make(AgentType::kNLG, {"hotel"}, "different text"));
  w.mock->register_script({TemplateId::kConsolidation, {}}, {merge_reply()});
  auto eng = w.engine();
  Rng rng(3);
  const auto rep = eng.evolve_epoch(w.bank, {}, rng);
  CHECK(rep.count("consolidation") == 1);
  CHECK(rep.alive_before == 3);
  CHECK(rep.alive_after == 2);
  CHECK(rep.population_after.at("NLG|hotel") == 2);
  CHECK_FALSE(w.bank.get(a).alive);
  CHECK_FALSE(w.bank.get(b).alive);
  const auto merged = w.bank.get(rep.operations.front().outputs.front());
  CHECK(merged.meta == StrategyMetadata{1, 0, 3, 3});
}

TEST_CASE("a similarity chain merges into one strategy") {
  World w;
  // A~B and B~C at cos 30deg, A and C at cos 60deg
  w.embedder.table["A"] = axis(0, 0.0);
  w.embedder.table["B"] = axis(0, 30.0);
  w.embedder.table["C"] = axis(0, 60.0);
  w.embedder.table["D"] = axis(3);
  const auto a = w.bank.add(make(AgentType::kDP, {"hotel"}, "A"));
  const auto b = w.bank.add(make(AgentType::kDP, {"hotel"}, "B"));
  const auto c = w.bank.add(make(AgentType::kDP, {"hotel"}, "C"));
  const auto d = w.bank.add(make(AgentType::kDP, {"hotel"}, "D"));
  w.mock->register_script({TemplateId::kConsolidation, {}}, {merge_reply()});
  auto eng = w.engine();
  auto merged = eng.consolidate(w.bank, {a, b, c});
  REQUIRE(merged);
  CHECK(w.bank.alive_count() == 2);
  CHECK(w.bank.get(d).alive);
  CHECK(w.bank.get(*merged).parents.size() == 3);

  World w2;
  w2.embedder.table = w.embedder.table;
  for (const char* t : {"A", "B", "C", "D"}) w2.bank.add(make(AgentType::kDP, {"hotel"}, t));
  w2.mock->register_script({TemplateId::kConsolidation, {}}, {merge_reply()});
  auto eng2 = w2.engine();
  Rng rng(1);
  const auto rep = eng2.evolve_epoch(w2.bank, {}, rng);
  REQUIRE(rep.count("consolidation") == 1);
  CHECK(rep.operations.front().inputs.size() == 3);
  CHECK(w2.bank.alive_count() == 2);
}

TEST_CASE("consolidate preconditions and failure") {
  World w;
  const auto a = w.bank.add(make(AgentType::kDP, {"hotel"}, "x"));
  const auto b = w.bank.add(make(AgentType::kDP, {"restaurant"}, "x"));
  const auto c = w.bank.add(make(AgentType::kDP, {"hotel"}, "x"));
  auto eng = w.engine();
  CHECK_THROWS_AS(eng.consolidate(w.bank, {a}), PreconditionError);
  CHECK_THROWS_AS(eng.consolidate(w.bank, {a, b}), PreconditionError);
  w.mock->register_script({TemplateId::kConsolidation, {}}, {"{}"});
  CHECK_FALSE(eng.consolidate(w.bank, {a, c}));
  CHECK(w.bank.alive_count() == 3);
}

TEST_CASE("prune keeps the top M of an oversized population") {
  World w;
  std::vector<std::string> ids;
  // fitness rises with i; the two lowest go
  for (int i = 0; i < 12; ++i) {
    ids.push_back(w.bank.add(make(AgentType::kDST, {"hotel"}, "s" + std::to_string(i), {i, 0, 20, 1})));
  }
  w.bank.add(make(AgentType::kDST, {"restaurant"}, "other"));
  auto eng = w.engine();
  const auto removed = eng.prune(w.bank);
  std::vector<std::string> expect = {ids[0], ids[1]};
  std::sort(expect.begin(), expect.end());
  CHECK(removed == expect);
  CHECK(w.bank.alive_count() == 11);
  CHECK(eng.prune(w.bank).empty());
}

TEST_CASE("prune breaks fitness ties toward the newer generation") {
  World w;
  w.params.fitness.alpha = 0.0;  // generations otherwise enter fitness
  std::vector<std::string> ids;
  for (int i = 0; i < 9; ++i) ids.push_back(w.bank.add(make(AgentType::kDST, {"hotel"}, std::to_string(i), {5, 0, 5, 1})));
  const auto old_gen = w.bank.add(make(AgentType::kDST, {"hotel"}, "old", {0, 0, 5, 4}));
  const auto new_gen = w.bank.add(make(AgentType::kDST, {"hotel"}, "new", {0, 0, 5, 7}));
  auto eng = w.engine();
  CHECK(eng.prune(w.bank) == std::vector<std::string>{old_gen});
  CHECK(w.bank.get(new_gen).alive);
}

TEST_CASE("prune leaves populations at or under M alone") {
  World w;
  for (int i = 0; i < 10; ++i) w.bank.add(make(AgentType::kDST, {"hotel"}, std::to_string(i), {0, i, 3, 1}));
  auto eng = w.engine();
  CHECK(eng.prune(w.bank).empty());
  CHECK(w.bank.alive_count() == 10);
}

TEST_CASE("property: prune retains exactly the oracle's top M") {
  std::mt19937_64 gen(2026);
  for (int trial = 0; trial < 60; ++trial) {
    World w;
    std::uniform_int_distribution<int> size(1, 25), small(0, 6), g(1, 8);
    const int n = size(gen);
    w.params.max_population = std::uniform_int_distribution<std::size_t>(1, 12)(gen);
    for (int i = 0; i < n; ++i) {
      w.bank.add(make(AgentType::kNLG, {"hotel"}, std::to_string(i), {small(gen), small(gen), small(gen), g(gen)}));
    }
    const auto pop = w.bank.alive();
    const auto phi = oracle_fitness(pop);
    auto order = pop;
    std::sort(order.begin(), order.end(), [&](const Strategy& a, const Strategy& b) {
      if (std::abs(phi.at(a.id) - phi.at(b.id)) > 1e-12) return phi.at(a.id) > phi.at(b.id);
      if (a.meta.generation_index != b.meta.generation_index) return a.meta.generation_index > b.meta.generation_index;
      return a.id < b.id;
    });
    std::set<std::string> keep;
    for (std::size_t i = 0; i < std::min(order.size(), w.params.max_population); ++i) keep.insert(order[i].id);
    auto eng = w.engine();
    eng.prune(w.bank);
    std::set<std::string> alive;
    for (const auto& s : w.bank.alive()) alive.insert(s.id);
    CHECK(alive == keep);
    CHECK(alive.count(order.front().id) == 1);
  }
}

TEST_CASE("an epoch with nothing to do is a fixed point") {
  World w;
  for (int i = 0; i < 4; ++i) w.bank.add(make(AgentType::kDST, {"hotel"}, "distinct " + std::to_string(i)));
  const auto before = w.bank.strategies();
  auto eng = w.engine();
  Rng rng(9);
  const auto rep = eng.evolve_epoch(w.bank, {}, rng);
  CHECK(rep.operations.empty());
  CHECK(w.bank.strategies() == before);
  CHECK(rep.measured_p == 0.0);
  CHECK_FALSE(rep.measured_mu);
  CHECK(rep.population_before == rep.population_after);
  CHECK(w.mock->call_count() == 0);
  CHECK(rep.epoch_index == 1);
  CHECK(eng.evolve_epoch(w.bank, {}, rng).epoch_index == 2);
}

TEST_CASE("an epoch mutates each flagged strategy once") {
  World w;
  w.script_genesis();
  w.params.consolidate = false;
  auto eng = w.engine();
  for (AgentType t : kAgentTypes) eng.genesis(w.bank, "hotel", t);
  const auto dst = w.bank.candidates_for({"hotel"}, AgentType::kDST).front().id;
  w.mock->register_script({TemplateId::kMutation, {}}, {mutation_reply(-1)});
  const auto calls = w.mock->call_count();
  EvolutionCandidate c1{w.trajectory(dst), {dst}};
  EvolutionCandidate c2{w.trajectory(dst), {dst}};
  Rng rng(4);
  const auto rep = eng.evolve_epoch(w.bank, {c1, c2}, rng);
  CHECK(w.mock->call_count() == calls + 1);
  CHECK(rep.count("mutation") == 1);
  CHECK(rep.count("genesis") == 0);
  CHECK(rep.measured_p == doctest::Approx(1.0 / 30.0));
  REQUIRE(rep.measured_mu);
  // parent at phi 0 with gen_norm 0 among gen-1 peers; child -1/0.01 + 0.3
  CHECK(*rep.measured_mu == doctest::Approx(-100.0 + 0.3));
  CHECK(rep.alive_after == 30);
  CHECK_FALSE(w.bank.get(dst).alive);
}

TEST_CASE("an epoch covers new domains before mutating") {
  World w;
  w.script_genesis();
  w.params.consolidate = false;
  auto eng = w.engine();
  Trajectory t;
  t.dialog_id = "d";
  t.domains = {"taxi"};
  Rng rng(2);
  const auto rep = eng.evolve_epoch(w.bank, {{t, {}}}, rng);
  CHECK(rep.count("genesis") == 3);
  CHECK(rep.population_after.at("DST|taxi") == 10);
  CHECK(rep.alive_after == 30);
}

TEST_CASE("a failed coverage step is logged and skipped") {
  World w;
  w.mock->register_script({TemplateId::kGenesis, {}}, {stubs(2, "x")});
  auto eng = w.engine();
  Trajectory t;
  t.domains = {"taxi"};
  Rng rng(2);
  const auto rep = eng.evolve_epoch(w.bank, {{t, {}}}, rng);
  CHECK(rep.count("skip") == 1);
  CHECK(w.bank.alive_count() == 0);
}

TEST_CASE("property: every population ends at or under M") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 25; ++trial) {
    World w;
    w.mock->register_handler({TemplateId::kConsolidation, {}},
                             [n = 0](const ChatRequest&) mutable { return merge_reply("merged " + std::to_string(n++)); });
    w.mock->register_handler({TemplateId::kMutation, {}},
                             [n = 0](const ChatRequest&) mutable { return mutation_reply(n % 3 - 1, "child " + std::to_string(n++)); });
    std::uniform_int_distribution<int> size(0, 18), small(0, 5), pick(0, 4);
    std::vector<std::string> ids;
    for (AgentType t : kAgentTypes) {
      for (const char* d : {"hotel", "restaurant"}) {
        const int n = size(gen);
        for (int i = 0; i < n; ++i) {
          // a handful of repeated texts so consolidation has work
          const std::string text = pick(gen) == 0 ? "dup" : std::to_string(trial) + d + std::to_string(i);
          ids.push_back(w.bank.add(make(t, {d}, text, {small(gen), small(gen), small(gen), small(gen) + 1})));
        }
      }
    }
    std::vector<EvolutionCandidate> cands;
    if (!ids.empty()) {
      Trajectory t = w.trajectory(ids.front());
      std::set<std::string> flagged;
      for (int i = 0; i < 5; ++i) flagged.insert(ids[gen() % ids.size()]);
      // keep the trajectory inside covered populations only
      t.domains = {};
      cands.push_back({t, flagged});
    }
    auto eng = w.engine();
    Rng rng(trial);
    const auto rep = eng.evolve_epoch(w.bank, cands, rng);
    for (const auto& [key, members] : w.bank.populations()) CHECK(members.size() <= w.params.max_population);
    for (const auto& [key, n] : rep.population_after) CHECK(n <= w.params.max_population);
    CHECK(rep.alive_after == w.bank.alive_count());
  }
}

TEST_CASE("evolution reports round trip through JSON") {
  EvolutionReport r;
  r.epoch_index = 3;
  r.operations = {{"genesis", {"DST|hotel"}, {"s1", "s2"}, ""}, {"mutation", {"s1"}, {"s3"}, "score -1"}};
  r.measured_p = 0.25;
  r.measured_mu = -0.5;
  r.alive_before = 20;
  r.alive_after = 19;
  r.population_before = {{"DST|hotel", 20}};
  r.population_after = {{"DST|hotel", 19}};
  CHECK(report_from_json(report_to_json(r)) == r);
  r.measured_mu.reset();
  const auto j = report_to_json(r);
  CHECK(j["measured_mu"].is_null());
  CHECK(j["operations"][1]["operator"] == "mutation");
  CHECK(report_from_json(j) == r);
  CHECK_THROWS_AS(report_from_json(json{{"epoch_index", 1}}), ParseError);
}

TEST_CASE("trigger policies") {
  TriggerPolicy episode;
  CHECK_FALSE(episode.fires_after_dialog(0));
  CHECK(episode.fires_after_dialog(1));
  CHECK(episode.fires_after_dialog(2));
  TriggerPolicy every3{TriggerKind::kPerNDialogs, 3};
  std::vector<std::size_t> fired;
  for (std::size_t i = 0; i <= 10; ++i) {
    if (every3.fires_after_dialog(i)) fired.push_back(i);
  }
  CHECK(fired == std::vector<std::size_t>{3, 6, 9});
  for (auto k : {TriggerKind::kPerEpisode, TriggerKind::kPerNDialogs, TriggerKind::kPerTurn}) {
    CHECK(trigger_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(trigger_kind_from_string("hourly"), ValidationError);
  CHECK_THROWS_AS((TriggerPolicy{TriggerKind::kPerNDialogs, 0}.validate()), ValidationError);
}

TEST_CASE("evolution params validation") {
  EvolutionParams p;
  CHECK_NOTHROW(p.validate());
  p.genesis_k = 0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p = {};
  p.similarity_threshold = 1.5;
  CHECK_THROWS_AS(p.validate(), ValidationError);
}

TEST_CASE("trajectory history lists each turn") {
  World w;
  auto t = w.trajectory("x");
  t.turns[0].critiques.push_back({Role::kUserSim, Role::kNLG, "too terse", ""});
  const auto h = format_trajectory_history(t);
  CHECK(h.find("Turn 1\nUser: a hotel in the north please\n") == 0);
  CHECK(h.find("System action: request(area)") != std::string::npos);
  CHECK(h.find("too terse") != std::string::npos);
}
