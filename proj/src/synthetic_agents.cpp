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

#include "evotod/synthetic_agents.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "evotod/action_grammar.hpp"
#include "evotod/errors.hpp"
#include "evotod/rng.hpp"
#include "json.hpp"

namespace evotod {

using nlohmann::json;

namespace {

constexpr std::string_view kMarkerPrefix = "[q=";

const std::vector<std::string>& vocabulary() {
  static const std::vector<std::string> words = {
      "confirm",   "clarify",   "summarise", "prioritise", "verify",   "ground",     "track",     "carry",
      "revise",    "anchor",    "compare",   "filter",     "rank",     "offer",      "narrow",    "widen",
      "explicit",  "implicit",  "concise",   "polite",     "direct",   "stepwise",   "early",     "late",
      "slots",     "values",    "entities",  "constraints", "requests", "options",   "matches",   "turns",
      "dontcare",  "synonyms",  "typos",     "corrections", "context", "history",    "ellipsis",  "coreference",
      "database",  "queries",   "results",   "fallbacks",  "defaults", "alternatives", "bookings", "references",
      "ask",       "repeat",    "avoid",     "prefer",     "check",    "mention",    "list",      "drop",
      "numbers",   "names",     "areas",     "prices",     "times",    "days",       "stars",     "types"};
  return words;
}

std::string random_words(Rng& rng, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) {
    if (i > 0) out += " ";
    out += vocabulary()[rng.index(vocabulary().size())];
  }
  return out;
}

std::string strip_marker(std::string_view content) {
  std::string out(content);
  for (auto pos = out.find(kMarkerPrefix); pos != std::string::npos; pos = out.find(kMarkerPrefix)) {
    const auto end = out.find(']', pos);
    if (end == std::string::npos) break;
    std::size_t from = pos;
    while (from > 0 && out[from - 1] == ' ') --from;
    out.erase(from, end + 1 - from);
  }
  return out;
}

bool contains_ci(std::string_view hay, std::string_view needle) {
  return to_lower(hay).find(to_lower(needle)) != std::string::npos;
}

bool has_word(const std::string& lowered, const std::string& word) {
  for (auto pos = lowered.find(word); pos != std::string::npos; pos = lowered.find(word, pos + 1)) {
    const bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(lowered[pos - 1]));
    const auto end = pos + word.size();
    const bool right = end >= lowered.size() || !std::isalnum(static_cast<unsigned char>(lowered[end]));
    if (left && right) return true;
  }
  return false;
}

std::string join_and(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

std::vector<std::string> split_domains(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto comma = text.find(',', start);
    if (comma == std::string::npos) comma = text.size();
    std::string d = text.substr(start, comma - start);
    d.erase(0, d.find_first_not_of(' '));
    d.erase(d.find_last_not_of(' ') + 1);
    if (!d.empty()) out.push_back(d);
    start = comma + 1;
  }
  return out;
}

json json_after_brace(const std::string& text) {
  const auto pos = text.find('{');
  if (pos == std::string::npos) return json::object();
  try {
    return json::parse(text.substr(pos));
  } catch (const json::exception&) {
    return json::object();
  }
}

std::string line_value(const std::string& text, const std::string& prefix) {
  auto pos = text.find(prefix);
  if (pos == std::string::npos) return {};
  pos += prefix.size();
  return text.substr(pos, text.find('\n', pos) - pos);
}

std::string fmt_q(double q) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", q);
  return buf;
}

}  // namespace

std::optional<double> strategy_quality(std::string_view content) {
  const auto pos = content.find(kMarkerPrefix);
  if (pos == std::string_view::npos) return std::nullopt;
  const auto end = content.find(']', pos);
  if (end == std::string_view::npos) return std::nullopt;
  try {
    return std::stod(std::string(content.substr(pos + kMarkerPrefix.size(), end - pos - kMarkerPrefix.size())));
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::string with_quality(std::string_view content, double q) {
  return strip_marker(content) + " [q=" + fmt_q(std::clamp(q, 0.0, 1.0)) + "]";
}

namespace {

// Per-call view of the world; all randomness comes from `rng`.
class World {
 public:
  World(const DomainDatabase& db, const Schema& schema, const SyntheticParams& params, Rng& rng)
      : db_(db), schema_(schema), params_(params), rng_(rng) {}

  double quality(const std::string& text) const {
    return strategy_quality(text).value_or(params_.default_q);
  }

  // Quality of one "### TYPE" section of a combined strategy block.
  double section_quality(const std::string& esb, const std::string& type) const {
    const auto pos = esb.find("### " + type + "\n");
    if (pos == std::string::npos) return params_.default_q;
    const auto next = esb.find("### ", pos + 4);
    return quality(esb.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
  }

  std::optional<std::string> mentioned_domain(const std::string& utterance,
                                              const std::vector<std::string>& domains) const {
    const std::string lowered = to_lower(utterance);
    for (const auto& d : domains) {
      if (has_word(lowered, d)) return d;
    }
    return std::nullopt;
  }

  SlotValues mentioned_slots(const std::string& utterance, const std::string& domain) const {
    SlotValues out;
    if (!schema_.has_domain(domain) || !db_.has_domain(domain)) return out;
    const std::string lowered = to_lower(utterance);
    for (const auto& slot : schema_.domain(domain).informable) {
      std::string best;
      for (const auto& e : db_.entities.at(domain)) {
        auto it = e.find(slot);
        if (it == e.end() || it->second.size() <= best.size()) continue;
        if (lowered.find(to_lower(synth_phrase(slot, it->second))) != std::string::npos) best = it->second;
      }
      if (!best.empty()) out[slot] = best;
    }
    return out;
  }

  std::optional<std::pair<std::string, Entity>> find_entity(const std::string& key_value) const {
    for (const auto& [d, list] : db_.entities) {
      if (!schema_.has_domain(d)) continue;
      const auto& key = schema_.domain(d).key_slot;
      for (const auto& e : list) {
        auto it = e.find(key);
        if (it != e.end() && to_lower(it->second) == to_lower(key_value)) return std::make_pair(d, e);
      }
    }
    return std::nullopt;
  }

  json track(const std::string& utterance, const json& previous, const std::vector<std::string>& domains,
             double q) {
    json state = previous.is_object() ? previous : json::object();
    if (auto d = mentioned_domain(utterance, domains)) {
      for (const auto& [slot, value] : mentioned_slots(utterance, *d)) {
        if (rng_.bernoulli((1.0 - q) * 0.6, "dst-drop")) continue;
        state[*d][slot] = value;
      }
    }
    return state;
  }

  struct Decision {
    std::string action;
    json query = nullptr;
    std::string critique;
  };

  Decision decide(const std::string& utterance, const json& belief, const std::string& history,
                  const std::vector<std::string>& domains, double q) {
    Decision out;
    const auto d = mentioned_domain(utterance, domains);
    if (d) {
      for (const auto& [slot, value] : mentioned_slots(utterance, *d)) {
        const json& dom = belief.is_object() && belief.contains(*d) ? belief[*d] : json::object();
        if (!dom.contains(slot) || !dom[slot].is_string() || to_lower(dom[slot].get<std::string>()) != to_lower(value)) {
          out.critique = "The belief state is missing " + slot + "=" + value + ".";
          break;
        }
      }
      SlotValues constraints;
      if (belief.is_object() && belief.contains(*d) && belief[*d].is_object()) {
        for (auto it = belief[*d].begin(); it != belief[*d].end(); ++it) {
          if (it.value().is_string()) constraints[it.key()] = it.value().get<std::string>();
        }
      }
      const auto& all = db_.entities.at(*d);
      std::vector<const Entity*> matches;
      for (const auto& e : all) {
        if (entity_matches(e, constraints)) matches.push_back(&e);
      }
      const Entity* chosen = (!matches.empty() && rng_.bernoulli(q, "dp-correct"))
                                 ? matches[rng_.index(matches.size(), "dp-pick")]
                                 : &all[rng_.index(all.size(), "dp-random")];
      const auto& key = schema_.domain(*d).key_slot;
      out.action = "recommend(" + key + "=" + chosen->at(key) + ")";
      out.query = {{"domain", *d}, {"state", {{*d, constraints}}}};
      return out;
    }
    // a follow-up request about the entity recommended last
    const auto pos = history.rfind("System action: recommend(");
    if (pos != std::string::npos) {
      const std::string line = line_value(history.substr(pos), "System action: ");
      try {
        const auto acts = parse_system_action(line);
        if (!acts.empty() && !acts.front().slots.empty()) {
          if (auto found = find_entity(acts.front().slots.front().second)) {
            const auto& [dom, e] = *found;
            const auto& ds = schema_.domain(dom);
            const std::string lowered = to_lower(utterance);
            std::string args = ds.key_slot + "=" + e.at(ds.key_slot);
            bool any = false;
            for (const auto& slot : ds.requestable) {
              if (has_word(lowered, slot) && e.count(slot)) {
                args += "," + slot + "=" + e.at(slot);
                any = true;
              }
            }
            if (any) {
              out.action = "inform(" + args + ")";
              return out;
            }
          }
        }
      } catch (const ParseError&) {
      }
    }
    out.action = "inform()";
    return out;
  }

  std::pair<std::string, std::string> realize(const std::string& action, const std::string& utterance,
                                              double q) {
    std::vector<DialogAct> acts;
    try {
      acts = parse_system_action(action);
    } catch (const ParseError&) {
      return {"Sorry, could you repeat that?", ""};
    }
    const DialogAct& act = acts.front();
    if (act.type == "recommend" && !act.slots.empty()) {
      const std::string value = act.slots.front().second;
      auto found = find_entity(value);
      if (!found) return {value + " is available.", "The recommended entity " + value + " is not in the database."};
      const auto& [dom, e] = *found;
      std::vector<std::string> phrases;
      std::string critique;
      for (const auto& [slot, wanted] : mentioned_slots(utterance, dom)) {
        phrases.push_back(synth_phrase(slot, e.at(slot)));
        if (critique.empty() && to_lower(e.at(slot)) != to_lower(wanted)) {
          critique = value + " does not satisfy " + slot + "=" + wanted + ".";
        }
      }
      std::string text = value + " is a " + dom;
      if (!phrases.empty()) text += " " + join_and(phrases);
      return {text + ". Would you like more details?", critique};
    }
    if (act.type == "inform" && act.slots.size() > 1) {
      std::vector<std::string> answers;
      for (std::size_t i = 1; i < act.slots.size(); ++i) {
        if (rng_.bernoulli(0.5 + 0.5 * q, "nlg-include")) {
          answers.push_back("the " + act.slots[i].first + " is " + act.slots[i].second);
        }
      }
      if (answers.empty()) return {"Sure, let me check that for you.", ""};
      return {"Sure, " + join_and(answers) + ".", ""};
    }
    return {"You are welcome. Goodbye!", ""};
  }

  std::string user_check(const std::string& action, const std::string& response) const {
    try {
      for (const auto& act : parse_system_action(action)) {
        if (act.type != "inform") continue;
        for (std::size_t i = 1; i < act.slots.size(); ++i) {
          if (!contains_ci(response, act.slots[i].second)) return "You did not tell me the " + act.slots[i].first + ".";
        }
      }
    } catch (const ParseError&) {
      return "I could not follow that reply.";
    }
    return "";
  }

 private:
  const DomainDatabase& db_;
  const Schema& schema_;
  const SyntheticParams& params_;
  Rng& rng_;
};

std::string var(const Variables& v, const std::string& name) {
  auto it = v.find(name);
  return it == v.end() ? std::string() : it->second;
}

}  // namespace

SyntheticAgents::SyntheticAgents(DomainDatabase db, Schema schema, SyntheticParams params)
    : db_(std::move(db)), schema_(std::move(schema)), params_(params) {}

ChatReply SyntheticAgents::complete(const ChatRequest& request) {
  ++calls_;
  Rng rng(mix_seed(params_.seed ^ fnv1a64(request.prompt) ^ (0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(request.attempt))));
  World world(db_, schema_, params_, rng);
  const Variables& v = request.variables;
  const auto domains = split_domains(var(v, "domains"));
  json out;
  switch (request.template_id) {
    case TemplateId::kDST: {
      const double q = world.quality(var(v, "formatted_esb"));
      out = {{"critique", ""},
             {"belief_state", world.track(var(v, "user_utterance"), json_after_brace(var(v, "previous_belief_state")),
                                          domains, q)},
             {"reason", "Tracked the constraints stated in the user turn."}};
      break;
    }
    case TemplateId::kDP: {
      const double q = world.quality(var(v, "formatted_esb"));
      auto d = world.decide(var(v, "user_utterance"), json_after_brace(var(v, "belief_state")),
                            var(v, "formatted_history"), domains, q);
      out = {{"critique", d.critique},
             {"system_action", d.action},
             {"reason", "Chose the next act from the belief state."},
             {"query_db", !d.query.is_null()},
             {"query", d.query}};
      break;
    }
    case TemplateId::kNLG: {
      const double q = world.quality(var(v, "formatted_esb"));
      auto [text, critique] = world.realize(var(v, "system_action"), var(v, "user_utterance"), q);
      out = {{"critique", critique}, {"system_utterance", text}, {"reason", "Verbalised the system act."}};
      break;
    }
    case TemplateId::kUserSim: {
      const std::string prev = var(v, "formatted_prev_agent_output");
      out = {{"critique", world.user_check(line_value(prev, "- System Action: "), line_value(prev, "- System Response: "))}};
      break;
    }
    case TemplateId::kE2EPart1: {
      const std::string esb = var(v, "formatted_esb");
      const std::string utterance = var(v, "user_utterance");
      json belief = world.track(utterance, json_after_brace(var(v, "pre_belief_state")), domains,
                                world.section_quality(esb, "DST"));
      auto d = world.decide(utterance, belief, var(v, "formatted_history"), domains, world.section_quality(esb, "DP"));
      auto [text, critique] = world.realize(d.action, utterance, world.section_quality(esb, "NLG"));
      out = {{"critique", ""},
             {"belief_state", belief},
             {"system_action", d.action},
             {"reason", "Tracked, decided and verbalised in one step."},
             {"db_query_needed", !d.query.is_null()},
             {"query", d.query},
             {"system_utterance", text}};
      break;
    }
    case TemplateId::kE2EPart2: {
      auto [text, critique] = world.realize(var(v, "system_action"), var(v, "user_utterance"),
                                            world.section_quality(var(v, "formatted_esb"), "NLG"));
      out = {{"system_utterance", text}, {"reason", "Verbalised the act with the database results."}};
      break;
    }
    case TemplateId::kArbiter: {
      out = {{"final_output", json_after_brace(var(v, "original_output"))},
             {"reason", "The original output stands."},
             {"critique_accepted", false}};
      break;
    }
    case TemplateId::kGenesis: {
      const int n = std::stoi(var(v, "num"));
      out = json::array();
      for (int i = 0; i < n; ++i) {
        const double q = params_.genesis_q_lo + (params_.genesis_q_hi - params_.genesis_q_lo) * rng.uniform("genesis-q");
        const std::string content = var(v, "agent_type") + " strategy for " + var(v, "domain_str") + ": " +
                                    random_words(rng, 8) + ".";
        out.push_back({{"reason", "Initial guidance for the " + var(v, "domain_str") + " domain."},
                       {"content", with_quality(content, q)}});
      }
      break;
    }
    case TemplateId::kMutation: {
      const std::string current = var(v, "strategies_by_type");
      const std::string target = line_value(current, "(target): ");
      const double q = world.quality(target);
      const bool improve = rng.bernoulli(params_.p_improve, "mutation-improve");
      const double q2 = std::clamp(q + (improve ? params_.step : -params_.step), 0.02, 0.98);
      std::string body = strip_marker(target);
      // swap one word for a fresh one
      const auto space = body.rfind(' ');
      if (space != std::string::npos) body = body.substr(0, space) + " " + random_words(rng, 1) + ".";
      out = {{"strategy",
              {{"agent_type", var(v, "agent_type")},
               {"content", with_quality(body, q2)},
               {"reason", improve ? "Addressed the observed failure." : "Reworded the guidance."},
               {"score", var(v, "dialog_result") == "failure" ? -1 : 0}}}};
      break;
    }
    case TemplateId::kConsolidation: {
      const std::string text = var(v, "strategies_text");
      double sum = 0.0;
      int n = 0;
      static const std::regex marker(R"(\[q=([0-9.]+)\])");
      for (auto it = std::sregex_iterator(text.begin(), text.end(), marker); it != std::sregex_iterator(); ++it) {
        sum += std::stod((*it)[1].str());
        ++n;
      }
      const double q = n > 0 ? sum / n : params_.default_q;
      const std::string content = var(v, "agent_type") + " merged strategy for " + var(v, "domains_str") + ": " +
                                  random_words(rng, 8) + ".";
      out = {{"content", with_quality(content, q)}, {"reason", "Merged the overlapping guidance."}};
      break;
    }
  }
  ChatReply reply;
  reply.text = out.dump();
  reply.prompt_tokens = static_cast<std::int64_t>(request.prompt.size() / 4);
  reply.completion_tokens = static_cast<std::int64_t>(reply.text.size() / 4);
  return reply;
}

}  // namespace evotod
