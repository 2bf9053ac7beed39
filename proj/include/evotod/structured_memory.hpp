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

// Append-only trajectory store. Records live in a JSON Lines file with a
// sidecar "<log>.idx" mapping record id to byte offset.

#ifndef EVOTOD_STRUCTURED_MEMORY_HPP_
#define EVOTOD_STRUCTURED_MEMORY_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "evotod/corpus.hpp"
#include "evotod/types.hpp"

namespace evotod {

struct CritiqueEntry {
  Role author = Role::kDST;
  Role target = Role::kUserSim;
  std::string text;  // empty: no issue found
  std::string rationale;

  bool operator==(const CritiqueEntry&) const = default;
};

struct TurnRecord {
  std::string user_utterance;
  BeliefState belief_state;
  std::string system_action;
  std::string system_response;
  std::vector<CritiqueEntry> critiques;
  std::optional<std::int64_t> db_result_count;
  // Set when an agent call failed after retries; the turn is then partial.
  std::optional<std::string> system_failure;

  bool operator==(const TurnRecord&) const = default;
};

enum class Outcome { kSuccess, kFailure };
enum class TrajectorySource { kCorpusReplay, kLiveChat };

std::string_view to_string(Outcome outcome);
std::string_view to_string(TrajectorySource source);

struct Trajectory {
  std::uint64_t record_id = 0;  // assigned on append
  std::string dialog_id;
  DomainSet domains;
  UserGoal goal;
  std::map<AgentType, std::string> strategies_used;
  std::vector<TurnRecord> turns;
  Outcome outcome = Outcome::kFailure;
  TrajectorySource source = TrajectorySource::kCorpusReplay;

  bool operator==(const Trajectory&) const = default;
};

std::string trajectory_to_json(const Trajectory& trajectory);
Trajectory trajectory_from_json(const std::string& line);

// Throws ValidationError naming the offending field.
void validate_trajectory(const Trajectory& trajectory, int max_turns = 30);

// Records with after_id < record_id <= upto_id (upto unbounded when absent).
struct MemoryWindow {
  std::uint64_t after_id = 0;
  std::optional<std::uint64_t> upto_id;
};

struct EvolutionCandidate {
  Trajectory trajectory;
  std::set<std::string> flagged;  // strategy ids
};

// A used strategy is flagged when the dialog failed or when some non-empty
// critique targets its agent. Either rule can be switched off.
std::set<std::string> flag_strategies(const Trajectory& trajectory, bool on_failure = true,
                                      bool on_critique = true);

class StructuredMemory {
 public:
  // In-memory store.
  StructuredMemory() = default;
  // File-backed store; existing records are loaded.
  explicit StructuredMemory(std::filesystem::path log_path, int max_turns = 30);

  StructuredMemory(const StructuredMemory&) = delete;
  StructuredMemory& operator=(const StructuredMemory&) = delete;

  std::uint64_t append(Trajectory trajectory);

  Trajectory get(std::uint64_t record_id) const;
  std::vector<Trajectory> read(const MemoryWindow& window = {}) const;
  std::size_t size() const;
  std::uint64_t last_id() const;

  std::vector<EvolutionCandidate> query_for_evolution(const MemoryWindow& window) const;

  // FNV-1a over every stored line, in order.
  std::string digest() const;
  // Digest of the stored text of one record.
  std::string record_digest(std::uint64_t record_id) const;

  const std::filesystem::path& path() const { return path_; }

 private:
  mutable std::shared_mutex mu_;
  std::filesystem::path path_;
  int max_turns_ = 30;
  std::vector<Trajectory> records_;
  std::vector<std::string> lines_;
  std::uint64_t bytes_ = 0;
};

}  // namespace evotod

#endif  // EVOTOD_STRUCTURED_MEMORY_HPP_
