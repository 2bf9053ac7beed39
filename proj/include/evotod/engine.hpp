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

// Orchestrator: wires the world, providers, bank, memory and both loops, and
// runs the phased train-and-evaluate protocol.

#ifndef EVOTOD_ENGINE_HPP_
#define EVOTOD_ENGINE_HPP_

#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "evotod/config.hpp"
#include "evotod/corpus.hpp"
#include "evotod/dialog_pipeline.hpp"
#include "evotod/embedding.hpp"
#include "evotod/evaluation.hpp"
#include "evotod/evolution_engine.hpp"
#include "evotod/llm_gateway.hpp"
#include "evotod/strategy_bank.hpp"
#include "evotod/structured_memory.hpp"

namespace evotod {

struct World {
  Corpus corpus;
  DomainDatabase db;
  Schema schema;
};

// The synthetic world when `paths.corpus` is empty, the files otherwise.
World load_world(const EngineConfig& config);

// Resolves "mock:synthetic", "mock:fixture:<path>" and http(s) endpoints.
std::shared_ptr<ChatProvider> provider_for(const ProviderConfig& provider, const EngineConfig& config,
                                           const World& world);

struct EvalOptions {
  std::string label = "eval";
};

class Engine {
 public:
  explicit Engine(EngineConfig config);
  Engine(EngineConfig config, World world, std::shared_ptr<ChatProvider> online,
         std::shared_ptr<ChatProvider> offline);

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  // Coverage (Genesis / composition) for `domains` unless zero-shot.
  void prepare(const DomainSet& domains);

  // One training episode: coverage, selection, replay, feedback, memory
  // append and, when the trigger fires, an evolution epoch.
  Trajectory run_dialog(const CorpusDialog& dialog);

  // Epoch over the memory window not yet evolved on. Throws ConflictError
  // when another epoch is running.
  EvolutionReport evolve_now();

  // Replays `dialogs` against a copy of the bank: no feedback, no memory.
  MetricReport evaluate(const std::vector<CorpusDialog>& dialogs, const EvalOptions& options = {});

  BankAnalytics analytics() const;

  // Phased protocol into `run_dir` (created). Needs an empty memory.
  std::vector<PhaseRow> run_experiment(const std::filesystem::path& run_dir);

  // Live chat support.
  std::map<AgentType, Strategy> strategies_for(const DomainSet& domains, const std::string& label);
  void after_turn(DialogSession& session);
  Trajectory finish_session(const DialogSession& session);

  const EngineConfig& config() const { return config_; }
  const World& world() const { return world_; }
  StrategyBank& bank() { return bank_; }
  const StrategyBank& bank() const { return bank_; }
  StructuredMemory& memory() { return *memory_; }
  LlmGateway& gateway() { return *gateway_; }
  DialogPipeline& pipeline() { return *pipeline_; }
  Embedder& embedder() { return *embedder_; }
  EvolutionEngine& evolution() { return *evolution_; }
  std::vector<EvolutionReport> epochs() const;
  std::vector<OperationRecord> coverage_log() const;
  std::size_t dialogs_done() const;

  // Shared by turns, exclusive for epochs.
  std::shared_mutex& bank_gate() { return bank_gate_; }

  // Redirects memory and epoch logging to files (used by run_experiment).
  void attach_memory(std::unique_ptr<StructuredMemory> memory);
  void set_epoch_log(std::filesystem::path path);
  // Called after every epoch while the bank is held exclusively.
  void set_epoch_listener(std::function<void(const EvolutionReport&, const StrategyBank&)> listener);

 private:
  void init(World world, std::shared_ptr<ChatProvider> online, std::shared_ptr<ChatProvider> offline);
  EpisodeConfig episode_config(TrajectorySource source, bool record_feedback) const;
  EvolutionReport run_epoch(const std::vector<EvolutionCandidate>& candidates);
  void swap_replaced(DialogSession& session, const EvolutionReport& report);
  void after_dialog_locked();

  EngineConfig config_;
  World world_;
  std::shared_ptr<ChatProvider> online_;
  std::shared_ptr<ChatProvider> offline_;
  std::unique_ptr<LlmGateway> gateway_;
  std::unique_ptr<Embedder> embedder_;
  std::unique_ptr<EvolutionEngine> evolution_;
  std::unique_ptr<DialogPipeline> pipeline_;
  std::unique_ptr<StructuredMemory> memory_;
  Delexicalizer delexicalizer_;
  StrategyBank bank_;

  mutable std::mutex state_mu_;
  std::mutex epoch_mu_;
  std::shared_mutex bank_gate_;
  std::uint64_t evolved_upto_ = 0;
  std::size_t dialogs_done_ = 0;
  std::size_t coverage_calls_ = 0;
  std::vector<EvolutionReport> epochs_;
  std::vector<OperationRecord> coverage_log_;
  std::filesystem::path epoch_log_;
  std::function<void(const EvolutionReport&, const StrategyBank&)> epoch_listener_;
};

}  // namespace evotod

#endif  // EVOTOD_ENGINE_HPP_
