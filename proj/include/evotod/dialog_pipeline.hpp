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

// Online loop: DST -> DP (+ database) -> NLG -> UserSim per turn, with peer
// critique, optional arbitration and the single-agent variant.

#ifndef EVOTOD_DIALOG_PIPELINE_HPP_
#define EVOTOD_DIALOG_PIPELINE_HPP_

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evotod/corpus.hpp"
#include "evotod/llm_gateway.hpp"
#include "evotod/rng.hpp"
#include "evotod/selection.hpp"
#include "evotod/strategy_bank.hpp"
#include "evotod/structured_memory.hpp"

namespace evotod {

struct PipelineFlags {
  bool with_reasoning = true;
  bool with_peer_critique = true;
  bool e2e_agent = false;
  bool arbitration = false;
  bool zero_shot = false;

  bool operator==(const PipelineFlags&) const = default;
};

// Reserved ids of the static zero-shot strategies.
std::string static_strategy_id(AgentType type);  // "static:DST"
std::map<AgentType, Strategy> zero_shot_strategies(const DomainSet& domains);

struct DbQuery {
  std::string domain;
  SlotValues constraints;
};

// Case-insensitive match; "dontcare" and absent slots match everything.
// Throws DatabaseError on an unknown domain or a slot outside the schema.
std::vector<Entity> query_database(const DomainDatabase& db, const Schema& schema, const DbQuery& query);

// Drops domains outside `domains`, slots outside the schema and empty values.
BeliefState sanitize_belief(const nlohmann::json& raw, const DomainSet& domains, const Schema& schema);

struct DialogContext {
  DomainSet domains;
  std::optional<UserGoal> goal;
  int turn_index = 0;
  std::vector<TurnRecord> history;
  std::map<AgentType, Strategy> strategies;
  PipelineFlags flags;
  int max_turns = 30;
};

class DialogPipeline {
 public:
  DialogPipeline(LlmGateway& gateway, const DomainDatabase& db, const Schema& schema);

  // Runs one turn and appends it to ctx.history. Agent failures do not
  // throw: the returned record carries system_failure and a System critique.
  // `next_user_utterance` is shown to the user-side critic when known.
  TurnRecord run_turn(DialogContext& ctx, const std::string& user_utterance,
                      const std::optional<std::string>& next_user_utterance = std::nullopt);

  const DomainDatabase& db() const { return db_; }
  const Schema& schema() const { return schema_; }
  LlmGateway& gateway() { return gateway_; }

 private:
  void run_modular(DialogContext& ctx, TurnRecord& rec, const std::optional<std::string>& next);
  void run_e2e(DialogContext& ctx, TurnRecord& rec);

  LlmGateway& gateway_;
  const DomainDatabase& db_;
  const Schema& schema_;
};

// One dialog in progress.
class DialogSession {
 public:
  DialogSession(DialogPipeline& pipeline, std::string dialog_id, DomainSet domains,
                std::optional<UserGoal> goal, std::map<AgentType, Strategy> strategies,
                PipelineFlags flags, int max_turns, TrajectorySource source);

  TurnRecord step(const std::string& user_utterance,
                  const std::optional<std::string>& next_user_utterance = std::nullopt);
  // False after a system failure or at the turn cap.
  bool can_continue() const;
  bool failed() const { return failed_; }

  void replace_strategy(AgentType type, Strategy strategy);
  const DialogContext& context() const { return ctx_; }
  const std::string& dialog_id() const { return dialog_id_; }

  // Replay with a goal: success evaluator. Live chat without a goal: the last
  // user-side critique is empty and no system failure occurred.
  Outcome assess() const;
  // Snapshot of the dialog so far as an unsaved trajectory.
  Trajectory trajectory(Outcome outcome) const;

 private:
  DialogPipeline& pipeline_;
  std::string dialog_id_;
  DialogContext ctx_;
  TrajectorySource source_;
  bool failed_ = false;
};

// Per-episode feedback: every used strategy gets `used`; flagged strategies
// (failure or a non-empty critique on their agent) get `negative`, the rest
// `positive`. Ids not alive in the bank are skipped. Returns the ids updated.
std::vector<std::string> apply_episode_feedback(StrategyBank& bank, const Trajectory& trajectory);

struct EpisodeConfig {
  SelectionPolicy policy;
  FitnessParams fitness;
  PipelineFlags flags;
  int max_turns = 30;
  TrajectorySource source = TrajectorySource::kCorpusReplay;
  bool record_feedback = true;
};

// Called after each turn; may swap strategies through the session.
using TurnHook = std::function<void(DialogSession&, const TurnRecord&)>;

// Selects one strategy per agent (or the static ones in zero-shot mode),
// replays the dialog's user turns, assesses the outcome, records feedback
// and appends to `memory` when given. Throws NoCandidatesError when a
// population is empty.
Trajectory run_episode(const CorpusDialog& dialog, StrategyBank& bank, StructuredMemory* memory,
                       DialogPipeline& pipeline, const EpisodeConfig& config, Rng& rng,
                       const TurnHook& hook = {});

std::map<AgentType, Strategy> select_strategies(const StrategyBank& bank, const DomainSet& domains,
                                                const SelectionPolicy& policy, const FitnessParams& fitness,
                                                Rng& rng);

}  // namespace evotod

#endif  // EVOTOD_DIALOG_PIPELINE_HPP_
