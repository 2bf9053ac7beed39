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

// Engine configuration: every hyperparameter, mode flag, provider and path of
// a run, with a JSON form that fully describes it.

#ifndef EVOTOD_CONFIG_HPP_
#define EVOTOD_CONFIG_HPP_

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "evotod/dialog_pipeline.hpp"
#include "evotod/evolution_engine.hpp"
#include "evotod/llm_gateway.hpp"
#include "evotod/selection.hpp"
#include "evotod/strategy_bank.hpp"
#include "json.hpp"

namespace evotod {

struct EmbedderConfig {
  std::string kind = "token-hash";  // hash | token-hash | http(s) URL
  int dimension = 384;
  std::string model;

  bool operator==(const EmbedderConfig&) const = default;
};

struct PathConfig {
  // An empty corpus path selects the built-in synthetic world.
  std::string corpus;
  std::string db;
  std::string schema;
  std::string bank;  // initial bank snapshot
  std::string ssm;   // file-backed memory log

  bool operator==(const PathConfig&) const = default;
};

struct SyntheticConfig {
  int dialogs = 30;
  int test_dialogs = 10;
  int entities_per_domain = 12;
  double multi_domain_probability = 0.3;
  std::vector<std::string> domains = {"hotel", "restaurant", "attraction", "train"};
  double p_improve = 0.8;
  double step = 0.1;

  bool operator==(const SyntheticConfig&) const = default;
};

struct EngineConfig {
  std::uint64_t seed = 0;
  FitnessParams fitness;
  SelectionPolicy selection;
  EvolutionParams evolution;
  TriggerPolicy trigger;
  int max_turns = 30;
  PipelineFlags flags;
  ProviderConfig online = default_online();
  ProviderConfig offline = default_offline();
  EmbedderConfig embedder;
  PathConfig paths;
  SyntheticConfig synthetic;
  int phase_every = 10;  // percent of the train split between evaluations

  // Throws ValidationError naming the offending field.
  void validate() const;

  static ProviderConfig default_online();
  static ProviderConfig default_offline();
};

bool operator==(const EngineConfig& a, const EngineConfig& b);

nlohmann::json config_to_json(const EngineConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
EngineConfig config_from_json(const nlohmann::json& j);
EngineConfig load_config(const std::filesystem::path& path);
void save_config(const EngineConfig& config, const std::filesystem::path& path);

}  // namespace evotod

#endif  // EVOTOD_CONFIG_HPP_
