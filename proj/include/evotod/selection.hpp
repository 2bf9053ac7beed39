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

// Strategy selection over fitness scores: Boltzmann (softmax with
// temperature) plus roulette-wheel, uniform and epsilon-greedy variants.

#ifndef EVOTOD_SELECTION_HPP_
#define EVOTOD_SELECTION_HPP_

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "evotod/errors.hpp"
#include "evotod/rng.hpp"
#include "evotod/strategy_bank.hpp"

namespace evotod {

enum class SelectionKind { kBoltzmann, kRouletteWheel, kUniformRandom, kEpsilonGreedy };

std::string_view to_string(SelectionKind kind);
SelectionKind selection_kind_from_string(std::string_view text);

struct SelectionPolicy {
  SelectionKind kind = SelectionKind::kBoltzmann;
  double temperature = 1.0;  // Boltzmann only
  double epsilon = 0.1;      // epsilon-greedy only

  void validate() const;
};

// Floor added to min-shifted fitness so every roulette candidate stays selectable.
inline constexpr double kRouletteFloor = 1e-6;

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> selection_distribution(
    const Eigen::MatrixBase<Derived>& fitness, const SelectionPolicy& policy) {
  using Scalar = typename Derived::Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  policy.validate();
  const Eigen::Index n = fitness.size();
  if (n == 0) throw NoCandidatesError("selection over an empty candidate list");

  Vector p(n);
  switch (policy.kind) {
    case SelectionKind::kBoltzmann: {
      const Scalar tau = static_cast<Scalar>(policy.temperature);
      // max-shifted exponents keep the largest term at exp(0)
      p = ((fitness.array() - fitness.maxCoeff()) / tau).exp().matrix();
      break;
    }
    case SelectionKind::kRouletteWheel:
      p = ((fitness.array() - fitness.minCoeff()).max(Scalar(0)) + Scalar(kRouletteFloor)).matrix();
      break;
    case SelectionKind::kUniformRandom:
      p.setOnes();
      break;
    case SelectionKind::kEpsilonGreedy: {
      // greedy mass is split evenly between tied maxima
      const Scalar best = fitness.maxCoeff();
      const Scalar eps = static_cast<Scalar>(policy.epsilon);
      const auto ties = (fitness.array() == best).count();
      p.setConstant(eps / static_cast<Scalar>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        if (fitness[i] == best) p[i] += (Scalar(1) - eps) / static_cast<Scalar>(ties);
      }
      return p;
    }
  }
  return p / p.sum();
}

// Inverse-CDF draw from a probability vector.
Eigen::Index sample_index(const Eigen::VectorXd& probabilities, Rng& rng,
                          std::string_view site = "select");

// Draws one index according to selection_distribution(fitness, policy).
Eigen::Index select_index(const Eigen::VectorXd& fitness, const SelectionPolicy& policy, Rng& rng);

// Draws one candidate. `fitness[i]` belongs to `candidates[i]`.
const Strategy& select(const std::vector<Strategy>& candidates, const Eigen::VectorXd& fitness,
                       const SelectionPolicy& policy, Rng& rng);

// Convenience: fitness from the bank, then a seeded draw.
Strategy select(const std::vector<Strategy>& candidates, const StrategyBank& bank,
                const FitnessParams& params, const SelectionPolicy& policy, std::uint64_t rng_seed);

}  // namespace evotod

#endif  // EVOTOD_SELECTION_HPP_
