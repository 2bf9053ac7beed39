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

// Offline loop: Genesis, multi-domain composition, Mutation, Consolidation
// and Pruning over the strategy bank.

#ifndef EVOTOD_EVOLUTION_ENGINE_HPP_
#define EVOTOD_EVOLUTION_ENGINE_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evotod/embedding.hpp"
#include "evotod/llm_gateway.hpp"
#include "evotod/rng.hpp"
#include "evotod/strategy_bank.hpp"
#include "evotod/structured_memory.hpp"
#include "json.hpp"

namespace evotod {

struct EvolutionParams {
  int genesis_k = 10;
  std::size_t max_population = 10;  // M
  double similarity_threshold = 0.8;
  FitnessParams fitness;
  bool consolidate = true;
  bool prune = true;

  void validate() const;
};

struct OperationRecord {
  std::string op;  // genesis | compose | mutation | consolidation | prune | skip
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string note;

  bool operator==(const OperationRecord&) const = default;
};

struct EvolutionReport {
  std::int64_t epoch_index = 0;
  std::vector<OperationRecord> operations;
  double measured_p = 0.0;               // flagged / alive before mutation
  std::optional<double> measured_mu;     // mean child minus parent fitness
  std::size_t alive_before = 0;
  std::size_t alive_after = 0;
  std::map<std::string, std::size_t> population_before;  // "DST|hotel" -> size
  std::map<std::string, std::size_t> population_after;

  std::size_t count(const std::string& op) const;
  bool operator==(const EvolutionReport&) const = default;
};

nlohmann::json report_to_json(const EvolutionReport& report);
EvolutionReport report_from_json(const nlohmann::json& j);

enum class TriggerKind { kPerEpisode, kPerNDialogs, kPerTurn };

std::string_view to_string(TriggerKind kind);
TriggerKind trigger_kind_from_string(std::string_view text);

struct TriggerPolicy {
  TriggerKind kind = TriggerKind::kPerEpisode;
  int n = 1;

  void validate() const;
  // True when an epoch runs after the `dialogs_done`-th finished dialog.
  bool fires_after_dialog(std::size_t dialogs_done) const;
};

struct MutationOutcome {
  int score = 0;
  std::string child_id;
};

class EvolutionEngine {
 public:
  EvolutionEngine(LlmGateway& gateway, Embedder& embedder, EvolutionParams params = {});

  // K strategies for a single domain. Throws PreconditionError when the
  // population is already alive, CountMismatchError when the reply keeps
  // having the wrong length.
  std::vector<std::string> genesis(StrategyBank& bank, const std::string& domain, AgentType type);

  // One composite for a multi-domain combo from a random strategy of each
  // constituent domain. Sources stay alive.
  std::string compose_multidomain(StrategyBank& bank, const DomainSet& combo, AgentType type, Rng& rng);

  // Genesis / composition for every agent type lacking a population for
  // `combo`. Appends the operations to `log`.
  void ensure_coverage(StrategyBank& bank, const DomainSet& combo, Rng& rng,
                       std::vector<OperationRecord>* log = nullptr);

  // Applies the reply's score to the parent, inserts the child and retires
  // the parent. Returns nullopt (bank untouched) when the gateway fails.
  std::optional<MutationOutcome> mutate(StrategyBank& bank, const std::string& strategy_id,
                                        const Trajectory& trajectory);

  // Merges >= 2 alive strategies of one population and retires them.
  // Returns nullopt (bank untouched) when the gateway fails.
  std::optional<std::string> consolidate(StrategyBank& bank, const std::vector<std::string>& group);

  // Keeps the top M of each population by fitness; ties prefer the newer
  // generation, then the smaller id. Returns the retired ids.
  std::vector<std::string> prune(StrategyBank& bank) const;

  // Coverage, mutation over the flagged strategies, consolidation, pruning.
  // Operator failures are logged as "skip" records.
  EvolutionReport evolve_epoch(StrategyBank& bank, const std::vector<EvolutionCandidate>& candidates, Rng& rng);

  const EvolutionParams& params() const { return params_; }
  std::int64_t epochs_run() const { return epochs_; }
  void set_epochs_run(std::int64_t n) { epochs_ = n; }

 private:
  LlmGateway& gateway_;
  Embedder& embedder_;
  EvolutionParams params_;
  std::int64_t epochs_ = 0;
};

// Component-wise round-half-up average; generation = max + 1.
StrategyMetadata merge_metadata(const std::vector<StrategyMetadata>& sources);

// Transcript used by the Mutation prompt, critiques included.
std::string format_trajectory_history(const Trajectory& trajectory);

}  // namespace evotod

#endif  // EVOTOD_EVOLUTION_ENGINE_HPP_
