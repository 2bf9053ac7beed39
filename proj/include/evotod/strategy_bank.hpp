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

// The evolvable strategy bank: strategy records, feedback accounting, fitness
// and domain-indexed lookup.

#ifndef EVOTOD_STRATEGY_BANK_HPP_
#define EVOTOD_STRATEGY_BANK_HPP_

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "evotod/types.hpp"

namespace evotod {

struct StrategyMetadata {
  std::int64_t positive_feedback = 0;
  std::int64_t negative_feedback = 0;
  std::int64_t usage_count = 0;
  std::int64_t generation_index = 1;

  bool operator==(const StrategyMetadata&) const = default;
};

struct Strategy {
  std::string id;
  AgentType agent_type = AgentType::kDST;
  DomainSet domains;
  std::string content;
  std::string rationale;
  StrategyMetadata meta;
  bool alive = true;
  // ids this strategy was derived from (empty for Genesis output)
  std::vector<std::string> parents;

  bool operator==(const Strategy&) const = default;
};

enum class FeedbackSignal { kPositive, kNegative, kUsed };

struct FitnessParams {
  double alpha = 0.3;
  double epsilon = 0.01;

  void validate() const;
};

// (H+ - H-) / (N + eps) + alpha * gen_norm
template <typename Scalar>
Scalar compute_fitness(const StrategyMetadata& meta, Scalar gen_norm,
                       const FitnessParams& params) {
  const Scalar net = static_cast<Scalar>(meta.positive_feedback) -
                     static_cast<Scalar>(meta.negative_feedback);
  return net / (static_cast<Scalar>(meta.usage_count) + static_cast<Scalar>(params.epsilon)) +
         static_cast<Scalar>(params.alpha) * gen_norm;
}

// Maps min to 0 and max to 1. A constant (or single-element) input maps to 0.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> min_max_normalize(
    const Eigen::MatrixBase<Derived>& values) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  if (values.size() == 0) return Vector();
  const Scalar lo = values.minCoeff();
  const Scalar hi = values.maxCoeff();
  if (!(hi > lo)) return Vector::Zero(values.size());
  return ((values.array() - lo) / (hi - lo)).matrix();
}

// Fitness of every member of one population (all of one agent type), with the
// generation index normalised over exactly these members.
Eigen::VectorXd population_fitness(const std::vector<Strategy>& members,
                                   const FitnessParams& params);

class StrategyBank {
 public:
  StrategyBank() = default;
  explicit StrategyBank(std::vector<Strategy> strategies);
  StrategyBank(const StrategyBank& other);
  StrategyBank& operator=(const StrategyBank& other);
  StrategyBank(StrategyBank&& other) noexcept;
  StrategyBank& operator=(StrategyBank&& other) noexcept;

  // Inserts a strategy, assigning an id when `strategy.id` is empty.
  // Throws ValidationError on an invariant violation or duplicate id.
  std::string add(Strategy strategy);

  Strategy get(const std::string& id) const;
  bool contains(const std::string& id) const;

  StrategyMetadata record_feedback(const std::string& id, FeedbackSignal signal);

  // Alive strategies of `agent_type` whose domain set equals `domains`.
  std::vector<Strategy> candidates_for(const DomainSet& domains, AgentType agent_type) const;
  bool covered(const DomainSet& domains, AgentType agent_type) const;

  // Marks a strategy dead; it stays in the bank for lineage audit.
  void retire(const std::string& id);

  std::vector<Strategy> strategies() const;
  std::vector<Strategy> alive(std::optional<AgentType> agent_type = std::nullopt) const;
  std::size_t size() const;
  std::size_t alive_count() const;

  // Fitness with the generation index normalised over the alive population of
  // the strategy's agent type. Dead strategies are normalised against the
  // same population and clamped to [0, 1].
  double fitness(const std::string& id, const FitnessParams& params) const;
  // Fitness of every alive strategy keyed by id.
  std::map<std::string, double> fitness_table(const FitnessParams& params) const;

  // Populations keyed by (agent type, domain set); alive members only.
  std::map<std::pair<AgentType, std::string>, std::vector<Strategy>> populations() const;

 private:
  double fitness_locked(const Strategy& s, const FitnessParams& params) const;

  mutable std::shared_mutex mu_;
  std::vector<Strategy> strategies_;
  std::unordered_map<std::string, std::size_t> index_;
  std::uint64_t next_id_ = 1;
};

// Snapshot file: a JSON array of records with fields
// {id, agent_type, domains, content, reason, h_plus, h_minus, n_used, generation, alive,
// parents}; `parents` may be omitted on load.
std::string bank_to_json(const StrategyBank& bank);
StrategyBank bank_from_json(const std::string& text);
void save_bank(const StrategyBank& bank, const std::filesystem::path& destination);
StrategyBank load_bank(const std::filesystem::path& source);

}  // namespace evotod

#endif  // EVOTOD_STRATEGY_BANK_HPP_
