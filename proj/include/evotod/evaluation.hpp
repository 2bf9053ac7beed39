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

// Dialog metrics (Inform, Success, BLEU, Combine) and bank analytics.

#ifndef EVOTOD_EVALUATION_HPP_
#define EVOTOD_EVALUATION_HPP_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "evotod/corpus.hpp"
#include "evotod/embedding.hpp"
#include "evotod/strategy_bank.hpp"
#include "evotod/structured_memory.hpp"

namespace evotod {

struct DialogScore {
  std::string dialog_id;
  bool inform = false;
  bool success = false;
  // domain -> key value of the entity offered last
  std::map<std::string, std::string> offered;

  bool operator==(const DialogScore&) const = default;
};

// The entity of `domain` mentioned last, scanning each turn's action and then
// its response for the key-slot values of the db entities.
std::optional<Entity> offered_entity(const std::vector<TurnRecord>& turns, const std::string& domain,
                                     const DomainDatabase& db, const Schema& schema);

// Inform: for every goal domain with informable constraints the offered
// entity satisfies them. Success: Inform, and every requested slot's value
// (or its "[domain_slot]" placeholder) appears in some system response.
DialogScore evaluate_dialog(const std::string& dialog_id, const std::vector<TurnRecord>& turns,
                            const UserGoal& goal, const DomainDatabase& db, const Schema& schema);

struct InformSuccess {
  double inform = 0.0;   // percent
  double success = 0.0;  // percent
  std::vector<DialogScore> per_dialog;
};

// `goals[i]` belongs to `trajectories[i]`; throws ValidationError on a size
// mismatch or an empty list.
InformSuccess score_dialogs(const std::vector<Trajectory>& trajectories, const std::vector<UserGoal>& goals,
                            const DomainDatabase& db, const Schema& schema);

// Lower-cased runs of [a-z0-9_]; everything else separates tokens.
std::vector<std::string> bleu_tokenize(std::string_view text);

// Corpus BLEU-4 in [0, 100]: uniform weights, brevity penalty, add-one
// smoothing for n >= 2. A zero unigram match count is floored at 0.1 so that
// disjoint corpora score small but non-zero. An empty candidate corpus
// scores 0. Throws ValidationError on empty or misaligned input.
double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references);
// Tokenises with bleu_tokenize after optional delexicalisation.
double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
            const Delexicalizer* delexicalizer = nullptr);

inline double combine(double inform, double success, double bleu_score) {
  return (inform + success) * 0.5 + bleu_score;
}

struct MetricReport {
  double inform = 0.0;
  double success = 0.0;
  double bleu = 0.0;
  double combine = 0.0;
  std::vector<DialogScore> per_dialog;
};

// Whitespace tokens, lower-cased, with non-alphanumeric characters removed.
std::vector<std::string> entropy_tokenize(std::string_view text);
// Shannon entropy in bits of the pooled unigram distribution. Throws
// ValidationError when there are no tokens.
double entropy_bits(const std::vector<std::string>& texts);
// Over alive contents; throws ValidationError when nothing is alive.
double bank_entropy(const StrategyBank& bank);

struct BankAnalytics {
  std::optional<double> entropy_bits;
  std::optional<double> mean_pairwise_similarity;
  std::optional<double> mean_alive_fitness;
  std::map<AgentType, double> avg_generation;
  std::size_t alive = 0;
  std::size_t total = 0;
};

BankAnalytics bank_stats(const StrategyBank& bank, Embedder& embedder, const FitnessParams& params);

// One row per strategy: id, agent_type, domains, generation, alive, then the
// embedding coordinates.
std::string export_embeddings_csv(const StrategyBank& bank, Embedder& embedder, bool include_dead = false);

struct PhaseRow {
  int phase_pct = 0;
  std::size_t dialogs_processed = 0;
  MetricReport metrics;
  BankAnalytics analytics;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const PhaseRow& row);

}  // namespace evotod

#endif  // EVOTOD_EVALUATION_HPP_
