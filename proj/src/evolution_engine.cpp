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

#include "evotod/evolution_engine.hpp"

#include <algorithm>
#include <set>

#include "evotod/errors.hpp"
#include "json_io.hpp"

namespace evotod {

using nlohmann::json;

void EvolutionParams::validate() const {
  if (genesis_k < 1) throw ValidationError("genesis_k", "K must be at least 1");
  if (max_population < 1) throw ValidationError("max_population", "M must be at least 1");
  if (!(similarity_threshold > -1.0 && similarity_threshold <= 1.0)) {
    throw ValidationError("similarity_threshold", "threshold must lie in (-1, 1]");
  }
  fitness.validate();
}

std::size_t EvolutionReport::count(const std::string& op) const {
  return static_cast<std::size_t>(
      std::count_if(operations.begin(), operations.end(), [&](const auto& r) { return r.op == op; }));
}

json report_to_json(const EvolutionReport& r) {
  json ops = json::array();
  for (const auto& o : r.operations) {
    json j = {{"operator", o.op}, {"inputs", o.inputs}, {"outputs", o.outputs}};
    if (!o.note.empty()) j["note"] = o.note;
    ops.push_back(std::move(j));
  }
  json j = {{"epoch_index", r.epoch_index},
            {"operations", std::move(ops)},
            {"measured_p", r.measured_p},
            {"measured_mu", r.measured_mu ? json(*r.measured_mu) : json(nullptr)},
            {"alive_before", r.alive_before},
            {"alive_after", r.alive_after},
            {"population_before", r.population_before},
            {"population_after", r.population_after}};
  return j;
}

EvolutionReport report_from_json(const json& j) {
  EvolutionReport r;
  try {
    r.epoch_index = j.at("epoch_index").get<std::int64_t>();
    for (const auto& o : j.at("operations")) {
      r.operations.push_back({o.at("operator").get<std::string>(), o.at("inputs").get<std::vector<std::string>>(),
                              o.at("outputs").get<std::vector<std::string>>(), o.value("note", "")});
    }
    r.measured_p = j.at("measured_p").get<double>();
    if (!j.at("measured_mu").is_null()) r.measured_mu = j["measured_mu"].get<double>();
    r.alive_before = j.at("alive_before").get<std::size_t>();
    r.alive_after = j.at("alive_after").get<std::size_t>();
    r.population_before = j.at("population_before").get<std::map<std::string, std::size_t>>();
    r.population_after = j.at("population_after").get<std::map<std::string, std::size_t>>();
  } catch (const json::exception& e) {
    throw ParseError("epoch", std::string("malformed evolution report: ") + e.what());
  }
  return r;
}

std::string_view to_string(TriggerKind kind) {
  switch (kind) {
    case TriggerKind::kPerEpisode: return "per_episode";
    case TriggerKind::kPerNDialogs: return "per_n_dialogs";
    case TriggerKind::kPerTurn: return "per_turn";
  }
  return "per_episode";
}

TriggerKind trigger_kind_from_string(std::string_view text) {
  if (text == "per_episode") return TriggerKind::kPerEpisode;
  if (text == "per_n_dialogs") return TriggerKind::kPerNDialogs;
  if (text == "per_turn") return TriggerKind::kPerTurn;
  throw ValidationError("trigger", "unknown trigger policy '" + std::string(text) + "'");
}

void TriggerPolicy::validate() const {
  if (n < 1) throw ValidationError("trigger.n", "n must be at least 1");
}

bool TriggerPolicy::fires_after_dialog(std::size_t dialogs_done) const {
  if (kind == TriggerKind::kPerNDialogs) return dialogs_done > 0 && dialogs_done % static_cast<std::size_t>(n) == 0;
  return dialogs_done > 0;
}

StrategyMetadata merge_metadata(const std::vector<StrategyMetadata>& sources) {
  if (sources.empty()) throw ValidationError("sources", "nothing to merge");
  const auto n = static_cast<std::int64_t>(sources.size());
  // floor(sum / n + 1/2) in integers
  auto avg = [n](std::int64_t sum) { return (2 * sum + n) / (2 * n); };
  std::int64_t hp = 0, hm = 0, used = 0, gen = 0;
  for (const auto& m : sources) {
    hp += m.positive_feedback;
    hm += m.negative_feedback;
    used += m.usage_count;
    gen = std::max(gen, m.generation_index);
  }
  return {avg(hp), avg(hm), avg(used), gen + 1};
}

std::string format_trajectory_history(const Trajectory& t) {
  std::string out;
  int i = 1;
  for (const auto& turn : t.turns) {
    out += "Turn " + std::to_string(i++) + "\n";
    out += "User: " + turn.user_utterance + "\n";
    out += "Belief state: " + json(turn.belief_state).dump() + "\n";
    out += "System action: " + turn.system_action + "\n";
    out += "System: " + turn.system_response + "\n";
    for (const auto& c : turn.critiques) {
      if (c.text.empty()) continue;
      out += "Critique (" + std::string(to_string(c.author)) + " on " + std::string(to_string(c.target)) +
             "): " + c.text + "\n";
    }
  }
  return out;
}

namespace {

std::string population_label(AgentType type, const DomainSet& domains) {
  return std::string(to_string(type)) + "|" + domain_key(domains);
}

std::map<std::string, std::size_t> population_sizes(const StrategyBank& bank) {
  std::map<std::string, std::size_t> out;
  for (const auto& s : bank.alive()) ++out[population_label(s.agent_type, s.domains)];
  return out;
}

std::string strategies_text(const std::vector<Strategy>& sources) {
  std::string out = "## Strategies to Merge";
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out += "\n\n### Strategy " + std::to_string(i + 1) + " (" + join_domains(sources[i].domains) + ")\n";
    out += "Content: " + sources[i].content;
    if (!sources[i].rationale.empty()) out += "\nReason: " + sources[i].rationale;
  }
  return out;
}

bool same_population(const Strategy& a, const Strategy& b) {
  return a.agent_type == b.agent_type && a.domains == b.domains;
}

}  // namespace

EvolutionEngine::EvolutionEngine(LlmGateway& gateway, Embedder& embedder, EvolutionParams params)
    : gateway_(gateway), embedder_(embedder), params_(std::move(params)) {
  params_.validate();
}

std::vector<std::string> EvolutionEngine::genesis(StrategyBank& bank, const std::string& domain, AgentType type) {
  const DomainSet combo = {domain};
  if (bank.covered(combo, type)) {
    throw PreconditionError("population " + population_label(type, combo) + " is already alive");
  }
  const std::size_t k = static_cast<std::size_t>(params_.genesis_k);
  Variables v = {{"num", std::to_string(k)},
                 {"domain_str", domain},
                 {"agent_type", std::string(to_string(type))},
                 {"agent_role", std::string(agent_role_description(type))}};
  CallOptions opt;
  opt.semantic_check = [k](const json& r) -> std::optional<std::string> {
    if (r.size() != k) return "expected " + std::to_string(k) + " strategies, got " + std::to_string(r.size());
    for (const auto& item : r) {
      if (item["content"].get<std::string>().empty()) return std::string("empty strategy content");
    }
    return std::nullopt;
  };
  StructuredReply reply;
  try {
    reply = gateway_.complete_structured(ProviderRole::kOffline, TemplateId::kGenesis, v, opt);
  } catch (const StructuredOutputError& e) {
    if (e.schema_ok() && std::string(e.what()).find("expected ") != std::string::npos) {
      throw CountMismatchError(e.what(), e.raw_reply(), e.attempts(), true);
    }
    throw;
  }
  std::vector<std::string> ids;
  for (const auto& item : reply.value) {
    Strategy s;
    s.agent_type = type;
    s.domains = combo;
    s.content = item["content"].get<std::string>();
    s.rationale = item["reason"].get<std::string>();
    ids.push_back(bank.add(std::move(s)));
  }
  return ids;
}

std::string EvolutionEngine::compose_multidomain(StrategyBank& bank, const DomainSet& combo, AgentType type,
                                                 Rng& rng) {
  if (combo.size() < 2) throw PreconditionError("composition needs at least two domains");
  std::vector<Strategy> sources;
  for (const auto& d : combo) {
    auto members = bank.candidates_for({d}, type);
    if (members.empty()) {
      throw PreconditionError("no " + std::string(to_string(type)) + " strategy for domain '" + d + "'");
    }
    sources.push_back(members[rng.index(members.size())]);
  }
  Variables v = {{"agent_type", std::string(to_string(type))},
                 {"domains_str", join_domains(combo)},
                 {"strategies_text", strategies_text(sources)}};
  auto reply = gateway_.complete_structured(ProviderRole::kOffline, TemplateId::kConsolidation, v);
  std::vector<StrategyMetadata> metas;
  Strategy s;
  for (const auto& src : sources) {
    metas.push_back(src.meta);
    s.parents.push_back(src.id);
  }
  s.agent_type = type;
  s.domains = combo;
  s.content = reply.value["content"].get<std::string>();
  s.rationale = reply.value["reason"].get<std::string>();
  s.meta = merge_metadata(metas);
  return bank.add(std::move(s));
}

void EvolutionEngine::ensure_coverage(StrategyBank& bank, const DomainSet& combo, Rng& rng,
                                      std::vector<OperationRecord>* log) {
  for (AgentType type : kAgentTypes) {
    if (bank.covered(combo, type)) continue;
    for (const auto& d : combo) {
      if (bank.covered({d}, type)) continue;
      auto ids = genesis(bank, d, type);
      if (log) log->push_back({"genesis", {population_label(type, {d})}, ids, ""});
    }
    if (combo.size() >= 2) {
      Rng sub = rng.fork("compose:" + population_label(type, combo));
      const std::string id = compose_multidomain(bank, combo, type, sub);
      if (log) log->push_back({"compose", bank.get(id).parents, {id}, population_label(type, combo)});
    }
  }
}

std::optional<MutationOutcome> EvolutionEngine::mutate(StrategyBank& bank, const std::string& strategy_id,
                                                       const Trajectory& trajectory) {
  const Strategy parent = bank.get(strategy_id);
  if (!parent.alive) throw PreconditionError("strategy " + strategy_id + " is not alive");

  std::string current;
  for (const auto& [type, id] : trajectory.strategies_used) {
    std::string content = bank.contains(id) ? bank.get(id).content : std::string("(unavailable)");
    if (!current.empty()) current += "\n";
    current += "- " + std::string(to_string(type)) + (id == strategy_id ? " (target)" : "") + ": " + content;
  }
  std::string feedback;
  for (const auto& turn : trajectory.turns) {
    for (const auto& c : turn.critiques) {
      if (c.text.empty()) continue;
      const auto target = as_agent_type(c.target);
      const bool relevant = c.author == Role::kSystem || c.target == Role::kE2E ||
                            (target && *target == parent.agent_type) || c.author == Role::kE2E;
      if (!relevant) continue;
      feedback += "- " + std::string(to_string(c.author)) + ": " + c.text;
      if (!c.rationale.empty()) feedback += " (" + c.rationale + ")";
      feedback += "\n";
    }
  }
  if (feedback.empty()) feedback = "No critiques were raised against this module.";

  Variables v = {{"agent_type", std::string(to_string(parent.agent_type))},
                 {"agent_goal", std::string(agent_role_description(parent.agent_type))},
                 {"domain_str", join_domains(parent.domains)},
                 {"dialog_result", std::string(to_string(trajectory.outcome))},
                 {"goal", goal_to_json(trajectory.goal).dump()},
                 {"formatted_history", format_trajectory_history(trajectory)},
                 {"strategies_by_type", current},
                 {"evolve_data", feedback}};
  CallOptions opt;
  opt.semantic_check = [](const json& r) -> std::optional<std::string> {
    const json& s = r["strategy"];
    const auto score = s["score"].get<std::int64_t>();
    if (score < -1 || score > 1) return std::string("score must be -1, 0 or 1");
    if (s["content"].get<std::string>().empty()) return std::string("empty strategy content");
    return std::nullopt;
  };
  StructuredReply reply;
  try {
    reply = gateway_.complete_structured(ProviderRole::kOffline, TemplateId::kMutation, v, opt);
  } catch (const StructuredOutputError&) {
    return std::nullopt;
  } catch (const TransportError&) {
    return std::nullopt;
  }
  const json& out = reply.value["strategy"];
  const int score = static_cast<int>(out["score"].get<std::int64_t>());
  if (score == 1) bank.record_feedback(strategy_id, FeedbackSignal::kPositive);
  if (score == -1) bank.record_feedback(strategy_id, FeedbackSignal::kNegative);
  Strategy child;
  child.agent_type = parent.agent_type;
  child.domains = parent.domains;
  child.content = out["content"].get<std::string>();
  child.rationale = out["reason"].get<std::string>();
  child.meta = bank.get(strategy_id).meta;
  child.meta.generation_index += 1;
  child.parents = {strategy_id};
  const std::string child_id = bank.add(std::move(child));
  bank.retire(strategy_id);
  return MutationOutcome{score, child_id};
}

std::optional<std::string> EvolutionEngine::consolidate(StrategyBank& bank, const std::vector<std::string>& group) {
  if (group.size() < 2) throw PreconditionError("consolidation needs at least two strategies");
  std::vector<Strategy> sources;
  for (const auto& id : group) {
    sources.push_back(bank.get(id));
    if (!sources.back().alive) throw PreconditionError("strategy " + id + " is not alive");
    if (!same_population(sources.front(), sources.back())) {
      throw PreconditionError("consolidation group spans several populations");
    }
  }
  Variables v = {{"agent_type", std::string(to_string(sources.front().agent_type))},
                 {"domains_str", join_domains(sources.front().domains)},
                 {"strategies_text", strategies_text(sources)}};
  StructuredReply reply;
  try {
    reply = gateway_.complete_structured(ProviderRole::kOffline, TemplateId::kConsolidation, v);
  } catch (const StructuredOutputError&) {
    return std::nullopt;
  } catch (const TransportError&) {
    return std::nullopt;
  }
  if (reply.value["content"].get<std::string>().empty()) return std::nullopt;
  Strategy merged;
  std::vector<StrategyMetadata> metas;
  for (const auto& s : sources) {
    metas.push_back(s.meta);
    merged.parents.push_back(s.id);
  }
  merged.agent_type = sources.front().agent_type;
  merged.domains = sources.front().domains;
  merged.content = reply.value["content"].get<std::string>();
  merged.rationale = reply.value["reason"].get<std::string>();
  merged.meta = merge_metadata(metas);
  const std::string id = bank.add(std::move(merged));
  for (const auto& s : sources) bank.retire(s.id);
  return id;
}

std::vector<std::string> EvolutionEngine::prune(StrategyBank& bank) const {
  std::vector<std::string> removed;
  const auto table = bank.fitness_table(params_.fitness);
  for (auto& [key, members] : bank.populations()) {
    if (members.size() <= params_.max_population) continue;
    std::sort(members.begin(), members.end(), [&](const Strategy& a, const Strategy& b) {
      const double fa = table.at(a.id);
      const double fb = table.at(b.id);
      if (fa != fb) return fa > fb;
      if (a.meta.generation_index != b.meta.generation_index) {
        return a.meta.generation_index > b.meta.generation_index;
      }
      return a.id < b.id;
    });
    for (std::size_t i = params_.max_population; i < members.size(); ++i) {
      bank.retire(members[i].id);
      removed.push_back(members[i].id);
    }
  }
  std::sort(removed.begin(), removed.end());
  return removed;
}

EvolutionReport EvolutionEngine::evolve_epoch(StrategyBank& bank, const std::vector<EvolutionCandidate>& candidates,
                                              Rng& rng) {
  EvolutionReport report;
  report.epoch_index = ++epochs_;
  report.alive_before = bank.alive_count();
  report.population_before = population_sizes(bank);

  // coverage
  std::set<DomainSet> combos;
  for (const auto& c : candidates) combos.insert(c.trajectory.domains);
  for (const auto& combo : combos) {
    try {
      ensure_coverage(bank, combo, rng, &report.operations);
    } catch (const Error& e) {
      report.operations.push_back({"skip", {domain_key(combo)}, {}, std::string("coverage: ") + e.what()});
    }
  }

  // mutation: each flagged strategy once, against the latest trajectory that flagged it
  std::map<std::string, const Trajectory*> flagged;
  for (const auto& c : candidates) {
    for (const auto& id : c.flagged) flagged[id] = &c.trajectory;
  }
  std::vector<std::pair<std::string, const Trajectory*>> targets;
  for (const auto& [id, t] : flagged) {
    if (bank.contains(id) && bank.get(id).alive) targets.emplace_back(id, t);
  }
  const std::size_t alive_pre_mutation = bank.alive_count();
  report.measured_p = alive_pre_mutation == 0 ? 0.0
                                              : static_cast<double>(targets.size()) /
                                                    static_cast<double>(alive_pre_mutation);
  double delta_sum = 0.0;
  std::size_t delta_n = 0;
  for (const auto& [id, t] : targets) {
    const double before = bank.fitness(id, params_.fitness);
    auto outcome = mutate(bank, id, *t);
    if (!outcome) {
      report.operations.push_back({"skip", {id}, {}, "mutation failed"});
      continue;
    }
    delta_sum += bank.fitness(outcome->child_id, params_.fitness) - before;
    ++delta_n;
    report.operations.push_back({"mutation", {id}, {outcome->child_id}, "score " + std::to_string(outcome->score)});
  }
  if (delta_n > 0) report.measured_mu = delta_sum / static_cast<double>(delta_n);

  // consolidation
  if (params_.consolidate) {
    for (const auto& [key, members] : bank.populations()) {
      if (members.size() < 2) continue;
      for (const auto& group : similar_groups(members, embedder_, params_.similarity_threshold)) {
        std::vector<std::string> ids;
        for (auto i : group) ids.push_back(members[i].id);
        auto merged = consolidate(bank, ids);
        if (merged) {
          report.operations.push_back({"consolidation", ids, {*merged}, ""});
        } else {
          report.operations.push_back({"skip", ids, {}, "consolidation failed"});
        }
      }
    }
  }

  // pruning
  if (params_.prune) {
    auto removed = prune(bank);
    if (!removed.empty()) report.operations.push_back({"prune", removed, {}, ""});
  }

  report.alive_after = bank.alive_count();
  report.population_after = population_sizes(bank);
  return report;
}

}  // namespace evotod
