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
#include <set>

#include "doctest.h"
#include "evotod/action_grammar.hpp"
#include "evotod/dialog_pipeline.hpp"
#include "evotod/evolution_engine.hpp"
#include "evotod/synthetic_agents.hpp"

using namespace evotod;
using nlohmann::json;

namespace {

struct SynthWorld {
  SynthCorpus synth;
  std::shared_ptr<SyntheticAgents> agents;
  ProviderConfig cfg;
  std::unique_ptr<LlmGateway> gateway;
  std::unique_ptr<DialogPipeline> pipeline;

  explicit SynthWorld(std::uint64_t seed, int n = 40, SyntheticParams p = {}) {
    SynthOptions opt;
    opt.multi_domain_probability = 0.0;
    synth = synth_corpus(seed, n, opt);
    p.seed = seed;
    agents = std::make_shared<SyntheticAgents>(synth.db, synth.schema, p);
    gateway = std::make_unique<LlmGateway>(agents, cfg, agents, cfg);
    pipeline = std::make_unique<DialogPipeline>(*gateway, synth.db, synth.schema);
  }

  StrategyBank bank_with_quality(double q) const {
    StrategyBank bank;
    for (const auto& d : SynthOptions{}.domain_pool) {
      for (AgentType t : kAgentTypes) {
        Strategy s;
        s.agent_type = t;
        s.domains = {d};
        s.content = with_quality(std::string(to_string(t)) + " guidance for " + d, q);
        bank.add(s);
      }
    }
    return bank;
  }

  double success_rate(double q) {
    auto bank = bank_with_quality(q);
    EpisodeConfig cfg;
    cfg.record_feedback = false;
    Rng rng(3);
    int ok = 0;
    for (const auto& d : synth.corpus.dialogs) {
      ok += run_episode(d, bank, nullptr, *pipeline, cfg, rng).outcome == Outcome::kSuccess;
    }
    return double(ok) / double(synth.corpus.dialogs.size());
  }
};

ChatRequest request(TemplateId id, Variables v, std::string prompt) {
  ChatRequest r;
  r.template_id = id;
  r.variables = std::move(v);
  r.prompt = std::move(prompt);
  return r;
}

}  // namespace

TEST_CASE("quality markers") {
  CHECK(strategy_quality("be brief [q=0.42]") == doctest::Approx(0.42));
  CHECK_FALSE(strategy_quality("no marker here"));
  CHECK_FALSE(strategy_quality("broken [q=abc]"));
  CHECK_FALSE(strategy_quality("unterminated [q=0.4"));
  CHECK(with_quality("be brief", 0.5) == "be brief [q=0.50]");
  CHECK(with_quality("be brief [q=0.42]", 0.6) == "be brief [q=0.60]");
  CHECK(with_quality("x", 1.7) == "x [q=1.00]");
  CHECK(with_quality("x", -0.2) == "x [q=0.00]");
  CHECK(strategy_quality(with_quality("x", 0.375)) == doctest::Approx(0.38));
}

TEST_CASE("replies are a pure function of seed and prompt") {
  SynthWorld a(1), b(1), c(2);
  const auto r = request(TemplateId::kGenesis, {{"num", "4"}, {"domain_str", "hotel"}, {"agent_type", "DST"}}, "p");
  CHECK(a.agents->complete(r).text == b.agents->complete(r).text);
  CHECK(a.agents->complete(r).text != c.agents->complete(r).text);
  auto r2 = r;
  r2.attempt = 1;
  CHECK(a.agents->complete(r).text != a.agents->complete(r2).text);
  CHECK(a.agents->call_count() == 4);
}

TEST_CASE("genesis output passes the engine and has qualities in range") {
  SynthWorld w(7);
  HashEmbedder emb;
  EvolutionEngine eng(*w.gateway, emb);
  StrategyBank bank;
  const auto ids = eng.genesis(bank, "hotel", AgentType::kDP);
  REQUIRE(ids.size() == 10);
  std::set<std::string> contents;
  for (const auto& id : ids) {
    const auto s = bank.get(id);
    const auto q = strategy_quality(s.content);
    REQUIRE(q);
    CHECK(*q >= 0.3 - 0.005);
    CHECK(*q <= 0.6 + 0.005);
    contents.insert(s.content);
  }
  CHECK(contents.size() == 10);
}

TEST_CASE("mutation moves quality by one step, upward with probability p_improve") {
  SynthWorld w(11);
  int up = 0, n = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::string target = with_quality("DST guidance " + std::to_string(i), 0.5);
    const auto reply = json::parse(w.agents
                                       ->complete(request(TemplateId::kMutation,
                                                          {{"strategies_by_type", "- DST (target): " + target},
                                                           {"agent_type", "DST"},
                                                           {"dialog_result", i % 2 ? "failure" : "success"}},
                                                          "prompt " + std::to_string(i)))
                                       .text);
    const auto& s = reply["strategy"];
    CHECK(s["score"] == (i % 2 ? -1 : 0));
    const double q = *strategy_quality(s["content"].get<std::string>());
    CHECK((std::abs(q - 0.6) < 1e-9 || std::abs(q - 0.4) < 1e-9));
    up += q > 0.5;
    ++n;
  }
  const double p = 0.8, sigma = std::sqrt(p * (1 - p) / n);
  CHECK(std::abs(double(up) / n - p) < 4 * sigma);
}

TEST_CASE("mutation clamps quality near the ends") {
  SyntheticParams p;
  p.p_improve = 1.0;
  SynthWorld w(3, 10, p);
  const auto reply = json::parse(
      w.agents->complete(request(TemplateId::kMutation, {{"strategies_by_type", "- DP (target): x [q=0.95]"}}, "m"))
          .text);
  CHECK(*strategy_quality(reply["strategy"]["content"].get<std::string>()) == doctest::Approx(0.98));
}

TEST_CASE("consolidation averages the source qualities") {
  SynthWorld w(5);
  const auto reply = json::parse(
      w.agents
          ->complete(request(TemplateId::kConsolidation,
                             {{"strategies_text", "Content: a [q=0.20]\nContent: b [q=0.60]\nContent: c [q=0.40]"},
                              {"agent_type", "NLG"},
                              {"domains_str", "hotel"}},
                             "c"))
          .text);
  CHECK(*strategy_quality(reply["content"].get<std::string>()) == doctest::Approx(0.40));
  const auto none = json::parse(
      w.agents->complete(request(TemplateId::kConsolidation, {{"strategies_text", "Content: a"}}, "d")).text);
  CHECK(*strategy_quality(none["content"].get<std::string>()) == doctest::Approx(0.5));
}

TEST_CASE("a perfect tracker records every stated constraint") {
  SynthWorld w(9);
  const std::string utterance =
      "I am looking for a hotel " + synth_phrase("area", w.synth.db.entities.at("hotel").front().at("area")) + ".";
  const auto reply = json::parse(w.agents
                                     ->complete(request(TemplateId::kDST,
                                                        {{"user_utterance", utterance},
                                                         {"domains", "hotel"},
                                                         {"formatted_esb", "track [q=1.00]"}},
                                                        utterance))
                                     .text);
  CHECK(reply["belief_state"]["hotel"]["area"] == w.synth.db.entities.at("hotel").front().at("area"));
}

TEST_CASE("dialogs played by the synthetic agents are well formed") {
  SynthWorld w(21, 15);
  auto bank = w.bank_with_quality(0.7);
  EpisodeConfig cfg;
  Rng rng(1);
  for (const auto& d : w.synth.corpus.dialogs) {
    const auto t = run_episode(d, bank, nullptr, *w.pipeline, cfg, rng);
    CHECK(!t.turns.empty());
    for (const auto& turn : t.turns) {
      CHECK_FALSE(turn.system_failure);
      CHECK(is_valid_action(turn.system_action));
      CHECK(!turn.system_response.empty());
    }
  }
}

TEST_CASE("higher strategy quality gives a higher success rate") {
  SynthWorld w(31, 60);
  const double lo = w.success_rate(0.05);
  const double mid = w.success_rate(0.5);
  const double hi = w.success_rate(1.0);
  MESSAGE("success at q=0.05/0.5/1.0: " << lo << " " << mid << " " << hi);
  CHECK(hi > mid);
  CHECK(mid > lo);
  CHECK(hi - lo > 0.3);
}
