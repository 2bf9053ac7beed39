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

#include "evotod/structured_memory.hpp"

#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "evotod/action_grammar.hpp"
#include "evotod/errors.hpp"
#include "evotod/rng.hpp"
#include "json.hpp"
#include "json_io.hpp"

namespace evotod {

using nlohmann::json;

std::string_view to_string(Outcome outcome) {
  return outcome == Outcome::kSuccess ? "success" : "failure";
}

std::string_view to_string(TrajectorySource source) {
  return source == TrajectorySource::kCorpusReplay ? "corpus_replay" : "live_chat";
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json turn_to_json(const TurnRecord& t) {
  json critiques = json::array();
  for (const auto& c : t.critiques) {
    critiques.push_back({{"author", std::string(to_string(c.author))},
                         {"target", std::string(to_string(c.target))},
                         {"text", c.text},
                         {"reason", c.rationale}});
  }
  json j = {{"user_utterance", t.user_utterance},
            {"belief_state", t.belief_state},
            {"system_action", t.system_action},
            {"system_response", t.system_response},
            {"critiques", critiques}};
  j["db_result_count"] = t.db_result_count ? json(*t.db_result_count) : json(nullptr);
  j["system_failure"] = t.system_failure ? json(*t.system_failure) : json(nullptr);
  return j;
}

}  // namespace

std::string trajectory_to_json(const Trajectory& t) {
  json used = json::object();
  for (const auto& [type, id] : t.strategies_used) used[std::string(to_string(type))] = id;
  json turns = json::array();
  for (const auto& turn : t.turns) turns.push_back(turn_to_json(turn));
  json j = {{"id", t.record_id},
            {"dialog_id", t.dialog_id},
            {"source", std::string(to_string(t.source))},
            {"outcome", std::string(to_string(t.outcome))},
            {"domains", std::vector<std::string>(t.domains.begin(), t.domains.end())},
            {"goal", goal_to_json(t.goal)},
            {"strategies_used", used},
            {"turns", turns}};
  return j.dump();
}

Trajectory trajectory_from_json(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw ParseError("line", std::string("trajectory is not valid JSON: ") + e.what());
  }
  std::string label = j.is_object() && j.contains("id") ? j["id"].dump() : "?";
  try {
    Trajectory t;
    t.record_id = j.at("id").get<std::uint64_t>();
    t.dialog_id = j.at("dialog_id").get<std::string>();
    const std::string source = j.at("source").get<std::string>();
    if (source == "corpus_replay") {
      t.source = TrajectorySource::kCorpusReplay;
    } else if (source == "live_chat") {
      t.source = TrajectorySource::kLiveChat;
    } else {
      throw ParseError(label, "unknown trajectory source '" + source + "'", "source");
    }
    const std::string outcome = j.at("outcome").get<std::string>();
    if (outcome != "success" && outcome != "failure") {
      throw ParseError(label, "unknown outcome '" + outcome + "'", "outcome");
    }
    t.outcome = outcome == "success" ? Outcome::kSuccess : Outcome::kFailure;
    for (const auto& d : j.at("domains")) t.domains.insert(d.get<std::string>());
    t.goal = goal_from_json(j.at("goal"), label);
    for (auto it = j.at("strategies_used").begin(); it != j.at("strategies_used").end(); ++it) {
      t.strategies_used[agent_type_from_string(it.key())] = it.value().get<std::string>();
    }
    for (const auto& tj : j.at("turns")) {
      TurnRecord r;
      r.user_utterance = tj.at("user_utterance").get<std::string>();
      r.belief_state = tj.at("belief_state").get<BeliefState>();
      r.system_action = tj.at("system_action").get<std::string>();
      r.system_response = tj.at("system_response").get<std::string>();
      for (const auto& cj : tj.at("critiques")) {
        r.critiques.push_back({role_from_string(cj.at("author").get<std::string>()),
                               role_from_string(cj.at("target").get<std::string>()),
                               cj.at("text").get<std::string>(), cj.at("reason").get<std::string>()});
      }
      if (tj.contains("db_result_count") && !tj["db_result_count"].is_null()) {
        r.db_result_count = tj["db_result_count"].get<std::int64_t>();
      }
      if (tj.contains("system_failure") && !tj["system_failure"].is_null()) {
        r.system_failure = tj["system_failure"].get<std::string>();
      }
      t.turns.push_back(std::move(r));
    }
    return t;
  } catch (const json::exception& e) {
    throw ParseError(label, "trajectory " + label + ": " + e.what());
  } catch (const ValidationError& e) {
    throw ParseError(label, "trajectory " + label + ": " + e.what(), e.field());
  }
}

void validate_trajectory(const Trajectory& t, int max_turns) {
  if (t.dialog_id.empty()) throw ValidationError("dialog_id", "dialog_id is empty");
  if (t.domains.empty()) throw ValidationError("domains", "domains is empty");
  if (t.turns.empty()) throw ValidationError("turns", "trajectory has no turns");
  if (static_cast<int>(t.turns.size()) > max_turns) {
    throw ValidationError("turns", "trajectory exceeds " + std::to_string(max_turns) + " turns");
  }
  if (t.strategies_used.size() != kAgentTypes.size()) {
    throw ValidationError("strategies_used", "strategies_used needs one entry per agent type");
  }
  for (const auto& [type, id] : t.strategies_used) {
    if (id.empty()) {
      throw ValidationError("strategies_used", "empty strategy id for " + std::string(to_string(type)));
    }
  }
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const auto& turn = t.turns[i];
    const std::string at = "turns[" + std::to_string(i) + "]";
    for (const auto& [domain, _] : turn.belief_state) {
      if (t.domains.count(domain) == 0) {
        throw ValidationError(at + ".belief_state", "belief state names domain '" + domain +
                                                        "' outside the dialog");
      }
    }
    if (!turn.system_failure && !is_valid_action(turn.system_action)) {
      throw ValidationError(at + ".system_action",
                            "system action '" + turn.system_action + "' does not parse");
    }
  }
}

std::set<std::string> flag_strategies(const Trajectory& t, bool on_failure, bool on_critique) {
  std::set<std::string> out;
  if (on_failure && t.outcome == Outcome::kFailure) {
    for (const auto& [_, id] : t.strategies_used) out.insert(id);
    return out;
  }
  if (!on_critique) return out;
  for (const auto& turn : t.turns) {
    for (const auto& c : turn.critiques) {
      if (c.text.empty()) continue;
      if (c.target == Role::kE2E) {
        for (const auto& [_, id] : t.strategies_used) out.insert(id);
        continue;
      }
      auto type = as_agent_type(c.target);
      if (!type) continue;
      auto it = t.strategies_used.find(*type);
      if (it != t.strategies_used.end()) out.insert(it->second);
    }
  }
  return out;
}

StructuredMemory::StructuredMemory(std::filesystem::path log_path, int max_turns)
    : path_(std::move(log_path)), max_turns_(max_turns) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ifstream in(path_, std::ios::binary);
  if (in) {
    std::string line;
    std::uint64_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      Trajectory t;
      try {
        t = trajectory_from_json(line);
      } catch (const ParseError& e) {
        throw ParseError("line " + std::to_string(line_no),
                         path_.string() + " line " + std::to_string(line_no) + ": " + e.what(),
                         e.field());
      }
      if (!records_.empty() && t.record_id <= records_.back().record_id) {
        throw ParseError("line " + std::to_string(line_no), "record ids are not increasing");
      }
      records_.push_back(std::move(t));
      lines_.push_back(line);
    }
  }
  // the index is derived data; rebuild it from the log
  std::ofstream idx(path_.string() + ".idx", std::ios::binary | std::ios::trunc);
  for (std::size_t i = 0; i < lines_.size(); ++i) {
    idx << records_[i].record_id << ' ' << bytes_ << '\n';
    bytes_ += lines_[i].size() + 1;
  }
  std::ofstream touch(path_, std::ios::binary | std::ios::app);
}

std::uint64_t StructuredMemory::append(Trajectory trajectory) {
  validate_trajectory(trajectory, max_turns_);
  std::unique_lock lock(mu_);
  trajectory.record_id = records_.empty() ? 1 : records_.back().record_id + 1;
  std::string line = trajectory_to_json(trajectory);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    out << line << '\n';
    out.flush();
    if (!out) throw Error("cannot append to " + path_.string());
    std::ofstream idx(path_.string() + ".idx", std::ios::binary | std::ios::app);
    idx << trajectory.record_id << ' ' << bytes_ << '\n';
  }
  bytes_ += line.size() + 1;
  const std::uint64_t id = trajectory.record_id;
  records_.push_back(std::move(trajectory));
  lines_.push_back(std::move(line));
  return id;
}

Trajectory StructuredMemory::get(std::uint64_t record_id) const {
  std::shared_lock lock(mu_);
  for (const auto& t : records_) {
    if (t.record_id == record_id) return t;
  }
  throw NotFoundError("no trajectory with id " + std::to_string(record_id));
}

std::vector<Trajectory> StructuredMemory::read(const MemoryWindow& window) const {
  std::shared_lock lock(mu_);
  std::vector<Trajectory> out;
  for (const auto& t : records_) {
    if (t.record_id <= window.after_id) continue;
    if (window.upto_id && t.record_id > *window.upto_id) break;
    out.push_back(t);
  }
  return out;
}

std::size_t StructuredMemory::size() const {
  std::shared_lock lock(mu_);
  return records_.size();
}

std::uint64_t StructuredMemory::last_id() const {
  std::shared_lock lock(mu_);
  return records_.empty() ? 0 : records_.back().record_id;
}

std::vector<EvolutionCandidate> StructuredMemory::query_for_evolution(const MemoryWindow& window) const {
  std::vector<EvolutionCandidate> out;
  for (auto& t : read(window)) {
    auto flagged = flag_strategies(t);
    out.push_back({std::move(t), std::move(flagged)});
  }
  return out;
}

std::string StructuredMemory::digest() const {
  std::shared_lock lock(mu_);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& line : lines_) {
    h = fnv1a64(line, h);
    h = fnv1a64("\n", h);
  }
  return hex64(h);
}

std::string StructuredMemory::record_digest(std::uint64_t record_id) const {
  std::shared_lock lock(mu_);
  for (std::size_t i = 0; i < records_.size(); ++i) {
    if (records_[i].record_id == record_id) return hex64(fnv1a64(lines_[i]));
  }
  throw NotFoundError("no trajectory with id " + std::to_string(record_id));
}

}  // namespace evotod
