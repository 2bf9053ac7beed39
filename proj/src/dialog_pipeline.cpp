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

#include "evotod/dialog_pipeline.hpp"

#include <algorithm>
#include <set>

#include "evotod/action_grammar.hpp"
#include "evotod/errors.hpp"
#include "evotod/evaluation.hpp"
#include "json_io.hpp"

namespace evotod {

using nlohmann::json;

std::string static_strategy_id(AgentType type) { return "static:" + std::string(to_string(type)); }

std::map<AgentType, Strategy> zero_shot_strategies(const DomainSet& domains) {
  std::map<AgentType, Strategy> out;
  for (AgentType t : kAgentTypes) {
    Strategy s;
    s.id = static_strategy_id(t);
    s.agent_type = t;
    s.domains = domains;
    s.content = static_strategy_text(t);
    out[t] = std::move(s);
  }
  return out;
}

std::vector<Entity> query_database(const DomainDatabase& db, const Schema& schema, const DbQuery& query) {
  auto it = db.entities.find(query.domain);
  if (it == db.entities.end() || !schema.has_domain(query.domain)) {
    throw DatabaseError("unknown domain '" + query.domain + "'");
  }
  const DomainSchema& ds = schema.domain(query.domain);
  for (const auto& [slot, _] : query.constraints) {
    if (!ds.has_slot(slot)) throw DatabaseError("unknown slot '" + slot + "' in domain '" + query.domain + "'");
  }
  std::vector<Entity> out;
  for (const auto& e : it->second) {
    if (entity_matches(e, query.constraints)) out.push_back(e);
  }
  return out;
}

BeliefState sanitize_belief(const json& raw, const DomainSet& domains, const Schema& schema) {
  BeliefState out;
  if (!raw.is_object()) return out;
  for (auto d = raw.begin(); d != raw.end(); ++d) {
    if (domains.count(d.key()) == 0 || !schema.has_domain(d.key()) || !d.value().is_object()) continue;
    const DomainSchema& ds = schema.domain(d.key());
    SlotValues slots;
    for (auto s = d.value().begin(); s != d.value().end(); ++s) {
      const std::string slot = to_lower(s.key());
      if (!ds.has_slot(slot) || s.value().is_null()) continue;
      std::string v = s.value().is_string() ? s.value().get<std::string>() : s.value().dump();
      if (v.empty()) continue;
      slots[slot] = std::move(v);
    }
    if (!slots.empty()) out[d.key()] = std::move(slots);
  }
  return out;
}

namespace {

struct AgentFailure {
  Role role;
  std::string message;
};

std::string belief_json(const BeliefState& b) { return json(b).dump(); }

std::string format_history(const DialogContext& ctx, const std::string& extra = {}) {
  std::string out;
  if (!ctx.history.empty()) {
    out = "## Dialog History\n";
    for (const auto& t : ctx.history) {
      out += "User: " + t.user_utterance + "\n";
      out += "System action: " + t.system_action + "\n";
      out += "System: " + t.system_response + "\n";
    }
  }
  if (!extra.empty()) out += (out.empty() ? "" : "\n") + extra;
  return out;
}

std::string format_strategy(const Strategy& s, bool with_reasoning) {
  std::string out = "## Strategy\n" + s.content;
  if (with_reasoning && !s.rationale.empty()) out += "\nRationale: " + s.rationale;
  return out;
}

std::string format_all_strategies(const DialogContext& ctx) {
  std::string out = "## Strategies";
  for (AgentType t : kAgentTypes) {
    auto it = ctx.strategies.find(t);
    if (it == ctx.strategies.end()) continue;
    out += "\n### " + std::string(to_string(t)) + "\n" + it->second.content;
    if (ctx.flags.with_reasoning && !it->second.rationale.empty()) out += "\nRationale: " + it->second.rationale;
  }
  return out;
}

std::string format_db_results(const std::optional<DbQuery>& query, const std::vector<Entity>& results,
                              const std::optional<std::string>& error) {
  if (!query) return "";
  std::string out = "## Database Results\n- Domain: " + query->domain + "\n";
  if (error) return out + "- Error: " + *error;
  out += "- Matches: " + std::to_string(results.size());
  const std::size_t shown = std::min<std::size_t>(results.size(), 5);
  for (std::size_t i = 0; i < shown; ++i) out += "\n" + json(results[i]).dump();
  return out;
}

// Reads {"domain": d, "state": {d: {...}}} (or a flat state) into a query.
std::optional<DbQuery> read_query(const json& q) {
  if (!q.is_object() || !q.contains("domain") || !q["domain"].is_string()) return std::nullopt;
  DbQuery out;
  out.domain = to_lower(q["domain"].get<std::string>());
  json state = q.value("state", json::object());
  if (state.is_object() && state.contains(out.domain) && state[out.domain].is_object()) state = state[out.domain];
  if (state.is_object()) {
    for (auto it = state.begin(); it != state.end(); ++it) {
      if (it.value().is_string() && !it.value().get<std::string>().empty()) {
        out.constraints[to_lower(it.key())] = it.value().get<std::string>();
      }
    }
  }
  return out;
}

std::string critique_text(const json& reply) {
  return reply.contains("critique") && reply["critique"].is_string() ? reply["critique"].get<std::string>() : "";
}

std::string reason_text(const json& reply) {
  return reply.contains("reason") && reply["reason"].is_string() ? reply["reason"].get<std::string>() : "";
}

}  // namespace

DialogPipeline::DialogPipeline(LlmGateway& gateway, const DomainDatabase& db, const Schema& schema)
    : gateway_(gateway), db_(db), schema_(schema) {}

TurnRecord DialogPipeline::run_turn(DialogContext& ctx, const std::string& user_utterance,
                                    const std::optional<std::string>& next_user_utterance) {
  if (ctx.turn_index >= ctx.max_turns) {
    throw PreconditionError("dialog reached the turn cap of " + std::to_string(ctx.max_turns));
  }
  TurnRecord rec;
  rec.user_utterance = user_utterance;
  rec.belief_state = ctx.history.empty() ? BeliefState{} : ctx.history.back().belief_state;
  if (ctx.flags.e2e_agent) {
    run_e2e(ctx, rec);
  } else {
    run_modular(ctx, rec, next_user_utterance);
  }
  ctx.history.push_back(rec);
  ++ctx.turn_index;
  return rec;
}

void DialogPipeline::run_modular(DialogContext& ctx, TurnRecord& rec, const std::optional<std::string>& next) {
  const PipelineFlags& flags = ctx.flags;
  const std::string domains = join_domains(ctx.domains);
  std::set<std::string> omit;
  if (!flags.with_peer_critique) omit.insert("critique");
  const BeliefState previous = rec.belief_state;
  Role current = Role::kDST;

  auto critique = [&](Role author, Role target, const json& reply) {
    if (!flags.with_peer_critique) return std::string();
    const std::string text = critique_text(reply);
    rec.critiques.push_back({author, target, text, reason_text(reply)});
    return text;
  };

  // Asks the arbiter to settle a critique; returns final_output when accepted.
  auto arbitrate = [&](AgentType target, Role critic, const json& original,
                       const std::string& text) -> std::optional<json> {
    if (!flags.arbitration || text.empty()) return std::nullopt;
    Variables v = {{"domains", domains},
                   {"target_agent", std::string(to_string(target))},
                   {"agent_role", std::string(agent_role_description(target))},
                   {"original_output", original.dump()},
                   {"critic_agent", std::string(to_string(critic))},
                   {"critique_content", text},
                   {"formatted_history", format_history(ctx)},
                   {"formatted_belief_state", "- Belief State: " + belief_json(rec.belief_state)}};
    try {
      auto reply = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kArbiter, v);
      if (reply.value["critique_accepted"].get<bool>()) return reply.value["final_output"];
    } catch (const StructuredOutputError&) {
      // an undecided arbitration keeps the original output
    }
    return std::nullopt;
  };

  try {
    // DST
    current = Role::kDST;
    json dst_out;
    {
      Variables v = {{"domains", domains},
                     {"user_utterance", rec.user_utterance},
                     {"previous_belief_state", "- Previous Belief State: " + belief_json(previous)},
                     {"formatted_history", format_history(ctx)},
                     {"formatted_esb", format_strategy(ctx.strategies.at(AgentType::kDST), flags.with_reasoning)}};
      CallOptions opt;
      opt.omit_fields = omit;
      dst_out = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kDST, v, opt).value;
      rec.belief_state = sanitize_belief(dst_out["belief_state"], ctx.domains, schema_);
      critique(Role::kDST, Role::kUserSim, dst_out);
    }

    // DP
    current = Role::kDP;
    json dp_out;
    std::optional<DbQuery> query;
    std::vector<Entity> results;
    std::optional<std::string> db_error;
    {
      std::string extra;
      if (flags.with_reasoning && !reason_text(dst_out).empty()) extra = "DST reason: " + reason_text(dst_out);
      Variables v = {{"domains", domains},
                     {"user_utterance", rec.user_utterance},
                     {"belief_state", belief_json(rec.belief_state)},
                     {"pre_belief_state", belief_json(previous)},
                     {"formatted_history", format_history(ctx, extra)},
                     {"formatted_esb", format_strategy(ctx.strategies.at(AgentType::kDP), flags.with_reasoning)}};
      CallOptions opt;
      opt.omit_fields = omit;
      opt.semantic_check = [&](const json& r) -> std::optional<std::string> {
        try {
          validate_action_slots(parse_system_action(r["system_action"].get<std::string>()), schema_, ctx.domains);
        } catch (const Error& e) {
          return std::string(e.what());
        }
        return std::nullopt;
      };
      dp_out = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kDP, v, opt).value;
      rec.system_action = dp_out["system_action"].get<std::string>();
      const std::string text = critique(Role::kDP, Role::kDST, dp_out);
      if (auto fo = arbitrate(AgentType::kDST, Role::kDP, dst_out, text)) {
        const json& b = fo->is_object() && fo->contains("belief_state") ? (*fo)["belief_state"] : *fo;
        if (b.is_object()) rec.belief_state = sanitize_belief(b, ctx.domains, schema_);
      }
      if (dp_out["query_db"].get<bool>() && dp_out.contains("query")) query = read_query(dp_out["query"]);
      if (query) {
        try {
          results = query_database(db_, schema_, *query);
          rec.db_result_count = static_cast<std::int64_t>(results.size());
        } catch (const DatabaseError& e) {
          db_error = e.what();
        }
      }
    }

    // NLG
    current = Role::kNLG;
    json nlg_out;
    {
      std::string extra;
      if (flags.with_reasoning && !reason_text(dp_out).empty()) extra = "DP reason: " + reason_text(dp_out);
      Variables v = {{"domains", domains},
                     {"user_utterance", rec.user_utterance},
                     {"system_action", rec.system_action},
                     {"formatted_db_results", format_db_results(query, results, db_error)},
                     {"formatted_history", format_history(ctx, extra)},
                     {"formatted_esb", format_strategy(ctx.strategies.at(AgentType::kNLG), flags.with_reasoning)}};
      CallOptions opt;
      opt.omit_fields = omit;
      nlg_out = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kNLG, v, opt).value;
      rec.system_response = nlg_out["system_utterance"].get<std::string>();
      const std::string text = critique(Role::kNLG, Role::kDP, nlg_out);
      if (auto fo = arbitrate(AgentType::kDP, Role::kNLG, dp_out, text)) {
        std::string action;
        if (fo->is_string()) action = fo->get<std::string>();
        if (fo->is_object() && fo->contains("system_action") && (*fo)["system_action"].is_string()) {
          action = (*fo)["system_action"].get<std::string>();
        }
        if (is_valid_action(action)) rec.system_action = action;
      }
    }

    // UserSim: critique of the response only
    if (flags.with_peer_critique) {
      current = Role::kUserSim;
      std::string prev = "- System Action: " + rec.system_action + "\n- System Response: " + rec.system_response;
      if (flags.with_reasoning && !reason_text(nlg_out).empty()) prev += "\n- NLG Reason: " + reason_text(nlg_out);
      if (next) prev += "\n- Next User Utterance: " + *next;
      Variables v = {{"domains", domains},
                     {"goal", ctx.goal ? goal_to_json(*ctx.goal).dump() : std::string("(not provided)")},
                     {"formatted_prev_agent_output", prev},
                     {"belief_state", belief_json(rec.belief_state)},
                     {"formatted_history", format_history(ctx)}};
      auto reply = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kUserSim, v).value;
      const std::string text = critique(Role::kUserSim, Role::kNLG, reply);
      if (auto fo = arbitrate(AgentType::kNLG, Role::kUserSim, nlg_out, text)) {
        if (fo->is_string() && !fo->get<std::string>().empty()) rec.system_response = fo->get<std::string>();
        if (fo->is_object() && fo->contains("system_utterance") && (*fo)["system_utterance"].is_string()) {
          rec.system_response = (*fo)["system_utterance"].get<std::string>();
        }
      }
    }
  } catch (const StructuredOutputError& e) {
    rec.system_failure = std::string(to_string(current)) + ": " + e.what();
    rec.critiques.push_back({Role::kSystem, current, "system failure: " + std::string(e.what()), e.raw_reply()});
  } catch (const TransportError& e) {
    rec.system_failure = std::string(to_string(current)) + ": " + e.what();
    rec.critiques.push_back({Role::kSystem, current, "system failure: " + std::string(e.what()), ""});
  }
}

void DialogPipeline::run_e2e(DialogContext& ctx, TurnRecord& rec) {
  const PipelineFlags& flags = ctx.flags;
  const std::string domains = join_domains(ctx.domains);
  const BeliefState previous = rec.belief_state;
  CallOptions opt;
  if (!flags.with_peer_critique) opt.omit_fields.insert("critique");
  try {
    Variables v = {{"domains", domains},
                   {"user_utterance", rec.user_utterance},
                   {"pre_belief_state", belief_json(previous)},
                   {"formatted_history", format_history(ctx)},
                   {"formatted_esb", format_all_strategies(ctx)}};
    opt.semantic_check = [&](const json& r) -> std::optional<std::string> {
      try {
        validate_action_slots(parse_system_action(r["system_action"].get<std::string>()), schema_, ctx.domains);
      } catch (const Error& e) {
        return std::string(e.what());
      }
      return std::nullopt;
    };
    json out = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kE2EPart1, v, opt).value;
    rec.belief_state = sanitize_belief(out["belief_state"], ctx.domains, schema_);
    rec.system_action = out["system_action"].get<std::string>();
    rec.system_response = out["system_utterance"].get<std::string>();
    if (flags.with_peer_critique) {
      rec.critiques.push_back({Role::kE2E, Role::kUserSim, critique_text(out), reason_text(out)});
    }
    if (out["db_query_needed"].get<bool>()) {
      std::optional<DbQuery> query;
      if (out.contains("query")) query = read_query(out["query"]);
      std::vector<Entity> results;
      std::optional<std::string> db_error;
      if (query) {
        try {
          results = query_database(db_, schema_, *query);
          rec.db_result_count = static_cast<std::int64_t>(results.size());
        } catch (const DatabaseError& e) {
          db_error = e.what();
        }
      }
      Variables v2 = {{"domains", domains},
                      {"user_utterance", rec.user_utterance},
                      {"belief_state", belief_json(rec.belief_state)},
                      {"system_action", rec.system_action},
                      {"formatted_db_results", format_db_results(query, results, db_error)},
                      {"formatted_history", format_history(ctx)},
                      {"formatted_esb", format_all_strategies(ctx)}};
      json out2 = gateway_.complete_structured(ProviderRole::kOnline, TemplateId::kE2EPart2, v2).value;
      rec.system_response = out2["system_utterance"].get<std::string>();
    }
  } catch (const StructuredOutputError& e) {
    rec.system_failure = "E2E: " + std::string(e.what());
    rec.critiques.push_back({Role::kSystem, Role::kE2E, "system failure: " + std::string(e.what()), e.raw_reply()});
  } catch (const TransportError& e) {
    rec.system_failure = "E2E: " + std::string(e.what());
    rec.critiques.push_back({Role::kSystem, Role::kE2E, "system failure: " + std::string(e.what()), ""});
  }
}

// Session -------------------------------------------------------------------------

DialogSession::DialogSession(DialogPipeline& pipeline, std::string dialog_id, DomainSet domains,
                             std::optional<UserGoal> goal, std::map<AgentType, Strategy> strategies,
                             PipelineFlags flags, int max_turns, TrajectorySource source)
    : pipeline_(pipeline), dialog_id_(std::move(dialog_id)), source_(source) {
  if (domains.empty()) throw ValidationError("domains", "a dialog needs at least one domain");
  for (AgentType t : kAgentTypes) {
    if (strategies.count(t) == 0) {
      throw ValidationError("strategies", "no strategy for " + std::string(to_string(t)));
    }
  }
  ctx_.domains = std::move(domains);
  ctx_.goal = std::move(goal);
  ctx_.strategies = std::move(strategies);
  ctx_.flags = flags;
  ctx_.max_turns = max_turns;
}

TurnRecord DialogSession::step(const std::string& user_utterance,
                               const std::optional<std::string>& next_user_utterance) {
  if (!can_continue()) throw LifecycleError("dialog " + dialog_id_ + " cannot take more turns");
  TurnRecord rec = pipeline_.run_turn(ctx_, user_utterance, next_user_utterance);
  if (rec.system_failure) failed_ = true;
  return rec;
}

bool DialogSession::can_continue() const { return !failed_ && ctx_.turn_index < ctx_.max_turns; }

void DialogSession::replace_strategy(AgentType type, Strategy strategy) {
  if (strategy.agent_type != type) throw ValidationError("agent_type", "strategy is for another agent");
  ctx_.strategies[type] = std::move(strategy);
}

Outcome DialogSession::assess() const {
  if (failed_ || ctx_.history.empty()) return Outcome::kFailure;
  if (ctx_.goal && !ctx_.goal->domains.empty()) {
    return evaluate_dialog(dialog_id_, ctx_.history, *ctx_.goal, pipeline_.db(), pipeline_.schema()).success
               ? Outcome::kSuccess
               : Outcome::kFailure;
  }
  for (auto it = ctx_.history.back().critiques.rbegin(); it != ctx_.history.back().critiques.rend(); ++it) {
    if (it->author == Role::kUserSim) return it->text.empty() ? Outcome::kSuccess : Outcome::kFailure;
  }
  return Outcome::kSuccess;
}

Trajectory DialogSession::trajectory(Outcome outcome) const {
  Trajectory t;
  t.dialog_id = dialog_id_;
  t.domains = ctx_.domains;
  if (ctx_.goal) t.goal = *ctx_.goal;
  for (const auto& [type, s] : ctx_.strategies) t.strategies_used[type] = s.id;
  t.turns = ctx_.history;
  t.outcome = outcome;
  t.source = source_;
  return t;
}

// Episodes --------------------------------------------------------------------------

std::vector<std::string> apply_episode_feedback(StrategyBank& bank, const Trajectory& trajectory) {
  const auto flagged = flag_strategies(trajectory);
  std::set<std::string> seen;
  std::vector<std::string> updated;
  for (const auto& [_, id] : trajectory.strategies_used) {
    if (!seen.insert(id).second) continue;
    if (!bank.contains(id) || !bank.get(id).alive) continue;
    bank.record_feedback(id, FeedbackSignal::kUsed);
    bank.record_feedback(id, flagged.count(id) ? FeedbackSignal::kNegative : FeedbackSignal::kPositive);
    updated.push_back(id);
  }
  return updated;
}

std::map<AgentType, Strategy> select_strategies(const StrategyBank& bank, const DomainSet& domains,
                                                const SelectionPolicy& policy, const FitnessParams& fitness,
                                                Rng& rng) {
  std::map<AgentType, Strategy> out;
  for (AgentType t : kAgentTypes) {
    auto candidates = bank.candidates_for(domains, t);
    if (candidates.empty()) {
      throw NoCandidatesError("no " + std::string(to_string(t)) + " strategies for " + domain_key(domains));
    }
    Eigen::VectorXd phi(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      phi[static_cast<Eigen::Index>(i)] = bank.fitness(candidates[i].id, fitness);
    }
    out[t] = select(candidates, phi, policy, rng);
  }
  return out;
}

Trajectory run_episode(const CorpusDialog& dialog, StrategyBank& bank, StructuredMemory* memory,
                       DialogPipeline& pipeline, const EpisodeConfig& config, Rng& rng, const TurnHook& hook) {
  const DomainSet domains = dialog.domains.empty() ? dialog.goal.domain_set() : dialog.domains;
  auto strategies = config.flags.zero_shot
                        ? zero_shot_strategies(domains)
                        : select_strategies(bank, domains, config.policy, config.fitness, rng);
  DialogSession session(pipeline, dialog.dialog_id, domains, dialog.goal, std::move(strategies), config.flags,
                        config.max_turns, config.source);
  const auto users = dialog.user_utterances();
  for (std::size_t i = 0; i < users.size() && session.can_continue(); ++i) {
    std::optional<std::string> next;
    if (i + 1 < users.size()) next = users[i + 1];
    const TurnRecord rec = session.step(users[i], next);
    if (hook) hook(session, rec);
  }
  Trajectory t = session.trajectory(session.assess());
  if (config.record_feedback && !config.flags.zero_shot) apply_episode_feedback(bank, t);
  if (memory != nullptr) t.record_id = memory->append(t);
  return t;
}

}  // namespace evotod
