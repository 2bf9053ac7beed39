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

#include "evotod/evaluation.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>

#include "evotod/errors.hpp"

namespace evotod {

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

// Position of the last whole-word occurrence of `needle` in `hay` (both
// lower-case), or npos.
std::size_t last_word_match(const std::string& hay, const std::string& needle) {
  if (needle.empty()) return std::string::npos;
  std::size_t found = std::string::npos;
  for (std::size_t pos = hay.find(needle); pos != std::string::npos; pos = hay.find(needle, pos + 1)) {
    const std::size_t end = pos + needle.size();
    const bool left = pos == 0 || !word_char(hay[pos - 1]);
    const bool right = end >= hay.size() || !word_char(hay[end]);
    if (left && right) found = pos;
  }
  return found;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

}  // namespace

std::optional<Entity> offered_entity(const std::vector<TurnRecord>& turns, const std::string& domain,
                                     const DomainDatabase& db, const Schema& schema) {
  auto it = db.entities.find(domain);
  if (it == db.entities.end() || !schema.has_domain(domain)) return std::nullopt;
  const std::string& key = schema.domain(domain).key_slot;
  std::optional<Entity> last;
  for (const auto& turn : turns) {
    for (const std::string* text : {&turn.system_action, &turn.system_response}) {
      const std::string hay = to_lower(*text);
      std::size_t best_pos = std::string::npos;
      std::size_t best_len = 0;
      const Entity* best = nullptr;
      for (const auto& e : it->second) {
        auto k = e.find(key);
        if (k == e.end()) continue;
        const std::string needle = to_lower(k->second);
        const std::size_t pos = last_word_match(hay, needle);
        if (pos == std::string::npos) continue;
        // latest end position wins; longer names win ties
        const std::size_t end = pos + needle.size();
        if (best == nullptr || end > best_pos + best_len ||
            (end == best_pos + best_len && needle.size() > best_len)) {
          best = &e;
          best_pos = pos;
          best_len = needle.size();
        }
      }
      if (best != nullptr) last = *best;
    }
  }
  return last;
}

DialogScore evaluate_dialog(const std::string& dialog_id, const std::vector<TurnRecord>& turns,
                            const UserGoal& goal, const DomainDatabase& db, const Schema& schema) {
  DialogScore score;
  score.dialog_id = dialog_id;
  bool inform = true;
  bool success = true;
  std::vector<std::string> responses;
  for (const auto& t : turns) responses.push_back(to_lower(t.system_response));
  auto mentioned = [&](const std::string& needle) {
    const std::string n = to_lower(needle);
    return std::any_of(responses.begin(), responses.end(),
                       [&](const std::string& r) { return !n.empty() && r.find(n) != std::string::npos; });
  };

  for (const auto& [domain, g] : goal.domains) {
    const auto entity = offered_entity(turns, domain, db, schema);
    if (entity && schema.has_domain(domain)) {
      const auto k = entity->find(schema.domain(domain).key_slot);
      if (k != entity->end()) score.offered[domain] = k->second;
    }
    if (!g.informables.empty() && (!entity || !entity_matches(*entity, g.informables))) inform = false;
    for (const auto& slot : g.requestables) {
      const std::string placeholder = "[" + domain + "_" + slot + "]";
      bool answered = mentioned(placeholder);
      if (!answered && entity) {
        auto v = entity->find(slot);
        answered = v != entity->end() && mentioned(v->second);
      }
      if (!answered) success = false;
    }
  }
  score.inform = inform;
  score.success = inform && success;
  return score;
}

InformSuccess score_dialogs(const std::vector<Trajectory>& trajectories, const std::vector<UserGoal>& goals,
                            const DomainDatabase& db, const Schema& schema) {
  if (trajectories.size() != goals.size()) {
    throw ValidationError("goals", "goal list does not match the trajectory list");
  }
  if (trajectories.empty()) throw ValidationError("trajectories", "nothing to score");
  InformSuccess out;
  std::size_t inform = 0;
  std::size_t success = 0;
  for (std::size_t i = 0; i < trajectories.size(); ++i) {
    if (trajectories[i].goal.domains.size() > 0 && !(trajectories[i].goal == goals[i])) {
      throw ValidationError("goals", "goal mismatch for dialog " + trajectories[i].dialog_id);
    }
    auto s = evaluate_dialog(trajectories[i].dialog_id, trajectories[i].turns, goals[i], db, schema);
    inform += s.inform ? 1 : 0;
    success += s.success ? 1 : 0;
    out.per_dialog.push_back(std::move(s));
  }
  const double n = static_cast<double>(trajectories.size());
  out.inform = 100.0 * static_cast<double>(inform) / n;
  out.success = 100.0 * static_cast<double>(success) / n;
  return out;
}

std::vector<std::string> bleu_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (word_char(c)) {
      cur += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double corpus_bleu(const std::vector<std::vector<std::string>>& candidates,
                   const std::vector<std::vector<std::string>>& references) {
  if (candidates.empty()) throw ValidationError("candidates", "empty corpus");
  if (candidates.size() != references.size()) {
    throw ValidationError("references", "candidate and reference lists differ in length");
  }
  constexpr int kOrder = 4;
  std::array<double, kOrder> matches{};
  std::array<double, kOrder> totals{};
  double cand_len = 0.0;
  double ref_len = 0.0;
  for (std::size_t s = 0; s < candidates.size(); ++s) {
    const auto& c = candidates[s];
    const auto& r = references[s];
    cand_len += static_cast<double>(c.size());
    ref_len += static_cast<double>(r.size());
    for (int n = 1; n <= kOrder; ++n) {
      if (c.size() < static_cast<std::size_t>(n)) continue;
      std::map<std::vector<std::string>, int> ref_counts;
      for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_counts[{r.begin() + i, r.begin() + i + n}];
      std::map<std::vector<std::string>, int> cand_counts;
      for (std::size_t i = 0; i + n <= c.size(); ++i) ++cand_counts[{c.begin() + i, c.begin() + i + n}];
      for (const auto& [gram, count] : cand_counts) {
        auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) matches[n - 1] += std::min(count, it->second);
      }
      totals[n - 1] += static_cast<double>(c.size() - n + 1);
    }
  }
  if (cand_len == 0.0) return 0.0;
  double log_sum = 0.0;
  for (int n = 1; n <= kOrder; ++n) {
    double p;
    if (n == 1) {
      p = (matches[0] > 0.0 ? matches[0] : 0.1) / totals[0];
    } else {
      p = (matches[n - 1] + 1.0) / (totals[n - 1] + 1.0);
    }
    log_sum += std::log(p) / kOrder;
  }
  const double bp = cand_len > ref_len ? 1.0 : std::exp(1.0 - ref_len / cand_len);
  return 100.0 * bp * std::exp(log_sum);
}

double bleu(const std::vector<std::string>& candidates, const std::vector<std::string>& references,
            const Delexicalizer* delexicalizer) {
  std::vector<std::vector<std::string>> c;
  std::vector<std::vector<std::string>> r;
  for (const auto& s : candidates) c.push_back(bleu_tokenize(delexicalizer ? delexicalizer->apply(s) : s));
  for (const auto& s : references) r.push_back(bleu_tokenize(delexicalizer ? delexicalizer->apply(s) : s));
  return corpus_bleu(c, r);
}

std::vector<std::string> entropy_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  for (std::string word; in >> word;) {
    std::string t;
    for (char c : word) {
      if (std::isalnum(static_cast<unsigned char>(c))) {
        t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      }
    }
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

double entropy_bits(const std::vector<std::string>& texts) {
  std::unordered_map<std::string, double> counts;
  double total = 0.0;
  for (const auto& text : texts) {
    for (auto& t : entropy_tokenize(text)) {
      counts[t] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) throw ValidationError("texts", "no tokens to compute entropy over");
  Eigen::ArrayXd q(static_cast<Eigen::Index>(counts.size()));
  Eigen::Index i = 0;
  for (const auto& [_, c] : counts) q[i++] = c / total;
  return std::max(0.0, -(q * q.log()).sum() / std::log(2.0));
}

double bank_entropy(const StrategyBank& bank) {
  std::vector<std::string> texts;
  for (const auto& s : bank.alive()) texts.push_back(s.content);
  if (texts.empty()) throw ValidationError("bank", "no alive strategies");
  return entropy_bits(texts);
}

BankAnalytics bank_stats(const StrategyBank& bank, Embedder& embedder, const FitnessParams& params) {
  BankAnalytics out;
  const auto alive = bank.alive();
  out.alive = alive.size();
  out.total = bank.size();
  if (alive.empty()) return out;
  std::vector<std::string> texts;
  for (const auto& s : alive) texts.push_back(s.content);
  try {
    out.entropy_bits = entropy_bits(texts);
  } catch (const ValidationError&) {
  }

  const auto table = bank.fitness_table(params);
  double sum = 0.0;
  for (const auto& [_, f] : table) sum += f;
  out.mean_alive_fitness = sum / static_cast<double>(table.size());

  std::map<AgentType, std::pair<double, double>> gen;
  for (const auto& s : alive) {
    gen[s.agent_type].first += static_cast<double>(s.meta.generation_index);
    gen[s.agent_type].second += 1.0;
  }
  for (const auto& [type, acc] : gen) out.avg_generation[type] = acc.first / acc.second;

  if (alive.size() >= 2) {
    Eigen::MatrixXd rows(static_cast<Eigen::Index>(alive.size()), embedder.dimension());
    for (std::size_t i = 0; i < alive.size(); ++i) {
      rows.row(static_cast<Eigen::Index>(i)) = embedder.embed(alive[i].content).values.transpose();
    }
    const Eigen::MatrixXd s = similarity_matrix(rows);
    const double n = static_cast<double>(alive.size());
    // off-diagonal mean
    out.mean_pairwise_similarity = (s.sum() - s.diagonal().sum()) / (n * (n - 1.0));
  }
  return out;
}

std::string export_embeddings_csv(const StrategyBank& bank, Embedder& embedder, bool include_dead) {
  std::ostringstream out;
  out << "id,agent_type,domains,generation,alive";
  for (Eigen::Index i = 0; i < embedder.dimension(); ++i) out << ",e" << i;
  out << "\n";
  for (const auto& s : include_dead ? bank.strategies() : bank.alive()) {
    out << s.id << ',' << to_string(s.agent_type) << ',' << domain_key(s.domains) << ','
        << s.meta.generation_index << ',' << (s.alive ? 1 : 0);
    const auto v = embedder.embed(s.content).values;
    for (Eigen::Index i = 0; i < v.size(); ++i) out << ',' << fmt(v[i]);
    out << "\n";
  }
  return out.str();
}

std::string metrics_csv_header() {
  return "phase_pct,dialogs_processed,inform,success,bleu,combine,entropy_bits,"
         "mean_pairwise_similarity,mean_alive_fitness,avg_gen_dst,avg_gen_dp,avg_gen_nlg,"
         "alive_strategies,total_strategies\n";
}

std::string metrics_csv_row(const PhaseRow& row) {
  auto gen = [&](AgentType t) {
    auto it = row.analytics.avg_generation.find(t);
    return it == row.analytics.avg_generation.end() ? std::string() : fmt(it->second);
  };
  std::ostringstream out;
  out << row.phase_pct << ',' << row.dialogs_processed << ',' << fmt(row.metrics.inform) << ','
      << fmt(row.metrics.success) << ',' << fmt(row.metrics.bleu) << ',' << fmt(row.metrics.combine) << ','
      << fmt(row.analytics.entropy_bits) << ',' << fmt(row.analytics.mean_pairwise_similarity) << ','
      << fmt(row.analytics.mean_alive_fitness) << ',' << gen(AgentType::kDST) << ','
      << gen(AgentType::kDP) << ',' << gen(AgentType::kNLG) << ',' << row.analytics.alive << ','
      << row.analytics.total << "\n";
  return out.str();
}

}  // namespace evotod
