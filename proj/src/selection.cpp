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

#include "evotod/selection.hpp"

namespace evotod {

std::string_view to_string(SelectionKind kind) {
  switch (kind) {
    case SelectionKind::kBoltzmann: return "boltzmann";
    case SelectionKind::kRouletteWheel: return "roulette_wheel";
    case SelectionKind::kUniformRandom: return "uniform_random";
    case SelectionKind::kEpsilonGreedy: return "epsilon_greedy";
  }
  return "?";
}

SelectionKind selection_kind_from_string(std::string_view text) {
  if (text == "boltzmann") return SelectionKind::kBoltzmann;
  if (text == "roulette_wheel" || text == "roulette") return SelectionKind::kRouletteWheel;
  if (text == "uniform_random" || text == "uniform" || text == "random") {
    return SelectionKind::kUniformRandom;
  }
  if (text == "epsilon_greedy") return SelectionKind::kEpsilonGreedy;
  throw ValidationError("policy", "unknown selection policy '" + std::string(text) + "'");
}

void SelectionPolicy::validate() const {
  if (!(temperature > 0.0)) throw ValidationError("temperature", "temperature must be > 0");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) {
    throw ValidationError("epsilon", "epsilon must lie in [0, 1]");
  }
}

Eigen::Index sample_index(const Eigen::VectorXd& probabilities, Rng& rng, std::string_view site) {
  const Eigen::Index n = probabilities.size();
  if (n == 0) throw NoCandidatesError("selection over an empty candidate list");
  const double u = rng.uniform(site);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    acc += probabilities[i];
    if (u < acc) return i;
  }
  // rounding left u just above the accumulated mass; take the last non-zero entry
  for (Eigen::Index i = n - 1; i >= 0; --i) {
    if (probabilities[i] > 0.0) return i;
  }
  return n - 1;
}

Eigen::Index select_index(const Eigen::VectorXd& fitness, const SelectionPolicy& policy, Rng& rng) {
  return sample_index(selection_distribution(fitness, policy), rng);
}

const Strategy& select(const std::vector<Strategy>& candidates, const Eigen::VectorXd& fitness,
                       const SelectionPolicy& policy, Rng& rng) {
  if (candidates.empty()) throw NoCandidatesError("no candidate strategies to select from");
  if (static_cast<std::size_t>(fitness.size()) != candidates.size()) {
    throw ValidationError("fitness", "fitness vector does not match the candidate list");
  }
  return candidates[static_cast<std::size_t>(select_index(fitness, policy, rng))];
}

Strategy select(const std::vector<Strategy>& candidates, const StrategyBank& bank,
                const FitnessParams& params, const SelectionPolicy& policy,
                std::uint64_t rng_seed) {
  if (candidates.empty()) throw NoCandidatesError("no candidate strategies to select from");
  Eigen::VectorXd fitness(static_cast<Eigen::Index>(candidates.size()));
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    fitness[static_cast<Eigen::Index>(i)] = bank.fitness(candidates[i].id, params);
  }
  Rng rng(rng_seed);
  return select(candidates, fitness, policy, rng);
}

}  // namespace evotod
