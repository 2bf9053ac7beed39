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


#include <filesystem>
#include <atomic>
#include <set>
#include <thread>

#include "doctest.h"
#include "engine_oracles.hpp"
#include "evotod/engine.hpp"
#include "evotod/errors.hpp"

using namespace evotod;
using nlohmann::json;

namespace {

EngineConfig small_config(std::uint64_t seed = 17) {
  EngineConfig c;
  c.seed = seed;
  c.synthetic.dialogs = 14;
  c.synthetic.test_dialogs = 4;
  c.synthetic.domains = {"hotel", "restaurant"};
  c.synthetic.multi_domain_probability = 0.3;
  c.phase_every = 50;
  return c;
}

std::filesystem::path scratch(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("evotod_engine_" + name);
  std::filesystem::remove_all(p);
  return p;
}

std::size_t lines_in(const std::filesystem::path& p) {
  const auto text = testing::read_file(p);
  return static_cast<std::size_t>(std::count(text.begin(), text.end(), '\n'));
}

}  // namespace

TEST_CASE("run_experiment writes a self-describing run directory") {
  const auto dir = scratch("files");
  Engine engine(small_config());
  const auto rows = engine.run_experiment(dir);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].phase_pct == 0);
  CHECK(rows[0].dialogs_processed == 0);
  CHECK(rows[1].dialogs_processed == 5);
  CHECK(rows[2].dialogs_processed == 10);
  for (const char* f : {"config.json", "ssm.jsonl", "epochs.jsonl", "metrics.csv", "usage.json",
                        "bank_phase_000.json", "bank_phase_050.json", "bank_phase_100.json"}) {
    CHECK_MESSAGE(std::filesystem::exists(dir / f), f);
  }
  CHECK(load_config(dir / "config.json") == engine.config());
  CHECK(lines_in(dir / "metrics.csv") == 4);
  CHECK(lines_in(dir / "ssm.jsonl") == 10);
  CHECK(lines_in(dir / "epochs.jsonl") == 10);
  CHECK(engine.memory().size() == 10);
  CHECK(bank_to_json(load_bank(dir / "bank_phase_100.json")) == bank_to_json(engine.bank()));
  // the memory log reloads to the same records
  StructuredMemory reloaded(dir / "ssm.jsonl");
  CHECK(reloaded.read() == engine.memory().read());
  for (const auto& row : rows) {
    CHECK(row.metrics.combine == doctest::Approx((row.metrics.inform + row.metrics.success) * 0.5 + row.metrics.bleu));
    if (row.analytics.alive == 0) continue;
    REQUIRE(row.analytics.entropy_bits);
    CHECK(*row.analytics.entropy_bits >= 0.0);
  }
  const auto usage = json::parse(testing::read_file(dir / "usage.json"));
  CHECK(usage["calls"].get<std::int64_t>() > 0);
  CHECK_THROWS_AS(engine.run_experiment(dir), PreconditionError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("both loops close without outside input") {
  Engine engine(small_config(5));
  const auto train = engine.world().corpus.split(Split::kTrain);
  std::set<DomainSet> combos;
  for (const auto& d : train) {
    engine.run_dialog(d);
    combos.insert(d.domains.empty() ? d.goal.domain_set() : d.domains);
  }
  CHECK(engine.memory().size() == train.size());
  CHECK(engine.epochs().size() == train.size());
  for (const auto& combo : combos) {
    for (AgentType t : kAgentTypes) CHECK(engine.bank().covered(combo, t));
  }
  for (const auto& [key, members] : engine.bank().populations()) CHECK(members.size() <= 10);
  testing::UsageOracle oracle(engine.bank(), engine.memory().read());
  CHECK(oracle.mismatches().empty());
  std::int64_t total = 0;
  for (const auto& t : engine.memory().read()) total += static_cast<std::int64_t>(t.strategies_used.size());
  CHECK(total == static_cast<std::int64_t>(3 * train.size()));
}

TEST_CASE("runs are byte-reproducible under one seed") {
  const auto a = scratch("repro_a");
  const auto b = scratch("repro_b");
  const auto c = scratch("repro_c");
  Engine(small_config(9)).run_experiment(a);
  Engine(small_config(9)).run_experiment(b);
  Engine(small_config(10)).run_experiment(c);
  CHECK(testing::differing_files(a, b, {"usage.json"}).empty());
  CHECK_FALSE(testing::differing_files(a, c, {"usage.json", "config.json"}).empty());
  auto ua = json::parse(testing::read_file(a / "usage.json"));
  auto ub = json::parse(testing::read_file(b / "usage.json"));
  ua.erase("latency_ms");
  ub.erase("latency_ms");
  CHECK(ua == ub);
  for (const auto& p : {a, b, c}) std::filesystem::remove_all(p);
}

TEST_CASE("zero-shot runs never touch the bank") {
  auto cfg = small_config();
  cfg.flags.zero_shot = true;
  Engine engine(cfg);
  for (const auto& d : engine.world().corpus.split(Split::kTrain)) {
    const auto t = engine.run_dialog(d);
    for (const auto& [type, id] : t.strategies_used) CHECK(id == static_strategy_id(type));
  }
  CHECK(engine.bank().size() == 0);
  CHECK(engine.epochs().empty());
  CHECK(engine.coverage_log().empty());
  CHECK(engine.memory().size() == 10);
  const auto report = engine.evaluate(engine.world().corpus.split(Split::kTest));
  CHECK(report.per_dialog.size() == 4);
  CHECK(engine.bank().size() == 0);
}

TEST_CASE("evaluation leaves the bank and memory alone") {
  Engine engine(small_config());
  const auto train = engine.world().corpus.split(Split::kTrain);
  engine.run_dialog(train[0]);
  const auto bank_before = bank_to_json(engine.bank());
  const auto mem_before = engine.memory().digest();
  const auto r1 = engine.evaluate(engine.world().corpus.split(Split::kTest), {"x"});
  const auto r2 = engine.evaluate(engine.world().corpus.split(Split::kTest), {"x"});
  CHECK(bank_to_json(engine.bank()) == bank_before);
  CHECK(engine.memory().digest() == mem_before);
  CHECK(r1.combine == r2.combine);
  CHECK(r1.per_dialog == r2.per_dialog);
  CHECK_THROWS_AS(engine.evaluate({}), ValidationError);
}

TEST_CASE("per_n_dialogs fires every n dialogs over the unseen window") {
  auto cfg = small_config();
  cfg.trigger = {TriggerKind::kPerNDialogs, 3};
  Engine engine(cfg);
  const auto train = engine.world().corpus.split(Split::kTrain);
  for (std::size_t i = 0; i < 7; ++i) engine.run_dialog(train[i]);
  CHECK(engine.epochs().size() == 2);
  CHECK(engine.dialogs_done() == 7);
  // the manual epoch only sees the last dialog
  const auto calls = engine.gateway().usage().calls;
  const auto report = engine.evolve_now();
  CHECK(report.epoch_index == 3);
  CHECK(engine.gateway().usage().calls >= calls);
  const auto again = engine.evolve_now();
  CHECK(again.count("mutation") == 0);
}

TEST_CASE("per_turn evolution swaps replaced strategies into the live session") {
  auto cfg = small_config(23);
  cfg.trigger.kind = TriggerKind::kPerTurn;
  Engine engine(cfg);
  const auto train = engine.world().corpus.split(Split::kTrain);
  std::size_t swaps_checked = 0;
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& d = train[i];
    const DomainSet domains = d.domains.empty() ? d.goal.domain_set() : d.domains;
    DialogSession session(engine.pipeline(), d.dialog_id, domains, d.goal, engine.strategies_for(domains, d.dialog_id),
                          cfg.flags, cfg.max_turns, TrajectorySource::kCorpusReplay);
    for (const auto& utterance : d.user_utterances()) {
      if (!session.can_continue()) break;
      const auto before = session.context().strategies;
      const auto epochs_before = engine.epochs().size();
      session.step(utterance);
      engine.after_turn(session);
      const auto epochs = engine.epochs();
      for (std::size_t e = epochs_before; e < epochs.size(); ++e) {
        for (const auto& op : epochs[e].operations) {
          if (op.op != "mutation") continue;
          for (const auto& [type, s] : before) {
            if (s.id != op.inputs.front()) continue;
            CHECK(session.context().strategies.at(type).id != s.id);
            CHECK(engine.bank().contains(session.context().strategies.at(type).id));
            ++swaps_checked;
          }
        }
      }
    }
    engine.finish_session(session);
  }
  CHECK(engine.memory().size() == 6);
  CHECK(engine.epochs().size() >= 6);
  MESSAGE("swaps checked: " << swaps_checked);
  CHECK(swaps_checked > 0);
}

TEST_CASE("evolve_now refuses to overlap with a running epoch") {
  Engine engine(small_config());
  engine.run_dialog(engine.world().corpus.split(Split::kTrain)[0]);
  std::atomic<bool> inside{false};
  std::atomic<bool> release{false};
  engine.set_epoch_listener([&](const EvolutionReport&, const StrategyBank&) {
    inside = true;
    while (!release) std::this_thread::yield();
  });
  std::thread t([&] { engine.evolve_now(); });
  while (!inside) std::this_thread::yield();
  CHECK_THROWS_AS(engine.evolve_now(), ConflictError);
  release = true;
  t.join();
}

TEST_CASE("fixture-backed providers resolve from the config") {
  auto cfg = small_config();
  cfg.online.endpoint = "mock:fixture:" + (std::filesystem::path(EVOTOD_FIXTURES) / "mock_genesis.json").string();
  cfg.offline.endpoint = cfg.online.endpoint;
  const World world = load_world(cfg);
  auto provider = provider_for(cfg.online, cfg, world);
  CHECK(dynamic_cast<MockProvider*>(provider.get()) != nullptr);
  cfg.online.endpoint = "mock:nothing";
  CHECK_THROWS_AS(provider_for(cfg.online, cfg, world), ValidationError);
}

TEST_CASE("the engine loads a corpus from files") {
  EngineConfig cfg;
  const std::filesystem::path fx = EVOTOD_FIXTURES;
  cfg.paths.corpus = (fx / "mini_corpus.json").string();
  cfg.paths.db = (fx / "mini_db.json").string();
  cfg.paths.schema = (fx / "mini_schema.json").string();
  Engine engine(cfg);
  CHECK(engine.world().corpus.dialogs.size() == 3);
  const auto t = engine.run_dialog(engine.world().corpus.split(Split::kTrain).front());
  CHECK(t.dialog_id == "D1");
  CHECK(engine.memory().size() == 1);
}
