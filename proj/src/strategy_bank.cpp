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

#include "evotod/strategy_bank.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <sstream>

#include "evotod/errors.hpp"
#include "json.hpp"

namespace evotod {

using nlohmann::json;

void FitnessParams::validate() const {
  if (!(epsilon > 0.0)) throw ValidationError("epsilon", "fitness epsilon must be > 0");
  if (!(alpha >= 0.0)) throw ValidationError("alpha", "fitness alpha must be >= 0");
}

Eigen::VectorXd population_fitness(const std::vector<Strategy>& members,
                                   const FitnessParams& params) {
  const auto n = static_cast<Eigen::Index>(members.size());
  Eigen::ArrayXd plus(n), minus(n), used(n);
  Eigen::VectorXd gen(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& m = members[static_cast<std::size_t>(i)].meta;
    plus[i] = static_cast<double>(m.positive_feedback);
    minus[i] = static_cast<double>(m.negative_feedback);
    used[i] = static_cast<double>(m.usage_count);
    gen[i] = static_cast<double>(m.generation_index);
  }
  const Eigen::VectorXd gen_norm = min_max_normalize(gen);
  return ((plus - minus) / (used + params.epsilon) + params.alpha * gen_norm.array()).matrix();
}

namespace {

void check_invariants(const Strategy& s) {
  if (s.domains.empty()) throw ValidationError("domains", "strategy domains must be non-empty");
  for (const auto& d : s.domains) {
    if (d.empty()) throw ValidationError("domains", "strategy domain names must be non-empty");
  }
  if (s.content.empty()) throw ValidationError("content", "strategy content must be non-empty");
  const auto& m = s.meta;
  if (m.positive_feedback < 0 || m.negative_feedback < 0 || m.usage_count < 0 ||
      m.generation_index < 0) {
    throw ValidationError("meta", "strategy metadata counts must be non-negative");
  }
}

// Numeric suffix of ids of the form "s-000123"; 0 otherwise.
std::uint64_t id_number(const std::string& id) {
  if (id.size() < 3 || id.compare(0, 2, "s-") != 0) return 0;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(id.data() + 2, id.data() + id.size(), value);
  if (ec != std::errc() || ptr != id.data() + id.size()) return 0;
  return value;
}

}  // namespace

StrategyBank::StrategyBank(std::vector<Strategy> strategies) {
  for (auto& s : strategies) add(std::move(s));
}

StrategyBank::StrategyBank(const StrategyBank& other) {
  std::shared_lock lock(other.mu_);
  strategies_ = other.strategies_;
  index_ = other.index_;
  next_id_ = other.next_id_;
}

StrategyBank& StrategyBank::operator=(const StrategyBank& other) {
  if (this == &other) return *this;
  StrategyBank copy(other);
  std::unique_lock lock(mu_);
  strategies_ = std::move(copy.strategies_);
  index_ = std::move(copy.index_);
  next_id_ = copy.next_id_;
  return *this;
}

StrategyBank::StrategyBank(StrategyBank&& other) noexcept {
  std::unique_lock lock(other.mu_);
  strategies_ = std::move(other.strategies_);
  index_ = std::move(other.index_);
  next_id_ = other.next_id_;
}

StrategyBank& StrategyBank::operator=(StrategyBank&& other) noexcept {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  strategies_ = std::move(other.strategies_);
  index_ = std::move(other.index_);
  next_id_ = other.next_id_;
  return *this;
}

std::string StrategyBank::add(Strategy strategy) {
  check_invariants(strategy);
  std::unique_lock lock(mu_);
  if (strategy.id.empty()) {
    do {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "s-%06llu", static_cast<unsigned long long>(next_id_++));
      strategy.id = buf;
    } while (index_.count(strategy.id) != 0);
  } else {
    if (index_.count(strategy.id) != 0) {
      throw ValidationError("id", "duplicate strategy id '" + strategy.id + "'");
    }
    next_id_ = std::max(next_id_, id_number(strategy.id) + 1);
  }
  index_.emplace(strategy.id, strategies_.size());
  strategies_.push_back(std::move(strategy));
  return strategies_.back().id;
}

Strategy StrategyBank::get(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("unknown strategy id '" + id + "'");
  return strategies_[it->second];
}

bool StrategyBank::contains(const std::string& id) const {
  std::shared_lock lock(mu_);
  return index_.count(id) != 0;
}

StrategyMetadata StrategyBank::record_feedback(const std::string& id, FeedbackSignal signal) {
  std::unique_lock lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("unknown strategy id '" + id + "'");
  Strategy& s = strategies_[it->second];
  if (!s.alive) throw LifecycleError("strategy '" + id + "' is not alive");
  switch (signal) {
    case FeedbackSignal::kPositive: ++s.meta.positive_feedback; break;
    case FeedbackSignal::kNegative: ++s.meta.negative_feedback; break;
    case FeedbackSignal::kUsed: ++s.meta.usage_count; break;
  }
  return s.meta;
}

std::vector<Strategy> StrategyBank::candidates_for(const DomainSet& domains,
                                                   AgentType agent_type) const {
  std::shared_lock lock(mu_);
  std::vector<Strategy> out;
  for (const auto& s : strategies_) {
    if (s.alive && s.agent_type == agent_type && s.domains == domains) out.push_back(s);
  }
  return out;
}

bool StrategyBank::covered(const DomainSet& domains, AgentType agent_type) const {
  std::shared_lock lock(mu_);
  return std::any_of(strategies_.begin(), strategies_.end(), [&](const Strategy& s) {
    return s.alive && s.agent_type == agent_type && s.domains == domains;
  });
}

void StrategyBank::retire(const std::string& id) {
  std::unique_lock lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("unknown strategy id '" + id + "'");
  Strategy& s = strategies_[it->second];
  if (!s.alive) throw LifecycleError("strategy '" + id + "' is already dead");
  s.alive = false;
}

std::vector<Strategy> StrategyBank::strategies() const {
  std::shared_lock lock(mu_);
  return strategies_;
}

std::vector<Strategy> StrategyBank::alive(std::optional<AgentType> agent_type) const {
  std::shared_lock lock(mu_);
  std::vector<Strategy> out;
  for (const auto& s : strategies_) {
    if (s.alive && (!agent_type || s.agent_type == *agent_type)) out.push_back(s);
  }
  return out;
}

std::size_t StrategyBank::size() const {
  std::shared_lock lock(mu_);
  return strategies_.size();
}

std::size_t StrategyBank::alive_count() const {
  std::shared_lock lock(mu_);
  return static_cast<std::size_t>(
      std::count_if(strategies_.begin(), strategies_.end(), [](const Strategy& s) { return s.alive; }));
}

double StrategyBank::fitness_locked(const Strategy& target, const FitnessParams& params) const {
  std::int64_t lo = 0, hi = 0;
  bool any = false;
  for (const auto& s : strategies_) {
    if (!s.alive || s.agent_type != target.agent_type) continue;
    const auto g = s.meta.generation_index;
    lo = any ? std::min(lo, g) : g;
    hi = any ? std::max(hi, g) : g;
    any = true;
  }
  double gen_norm = 0.0;
  if (any && hi > lo) {
    gen_norm = static_cast<double>(target.meta.generation_index - lo) / static_cast<double>(hi - lo);
    gen_norm = std::clamp(gen_norm, 0.0, 1.0);
  }
  return compute_fitness(target.meta, gen_norm, params);
}

double StrategyBank::fitness(const std::string& id, const FitnessParams& params) const {
  std::shared_lock lock(mu_);
  auto it = index_.find(id);
  if (it == index_.end()) throw NotFoundError("unknown strategy id '" + id + "'");
  return fitness_locked(strategies_[it->second], params);
}

std::map<std::string, double> StrategyBank::fitness_table(const FitnessParams& params) const {
  std::shared_lock lock(mu_);
  std::map<std::string, double> out;
  for (AgentType type : kAgentTypes) {
    std::vector<Strategy> members;
    for (const auto& s : strategies_) {
      if (s.alive && s.agent_type == type) members.push_back(s);
    }
    const Eigen::VectorXd fit = population_fitness(members, params);
    for (std::size_t i = 0; i < members.size(); ++i) {
      out[members[i].id] = fit[static_cast<Eigen::Index>(i)];
    }
  }
  return out;
}

std::map<std::pair<AgentType, std::string>, std::vector<Strategy>> StrategyBank::populations()
    const {
  std::shared_lock lock(mu_);
  std::map<std::pair<AgentType, std::string>, std::vector<Strategy>> out;
  for (const auto& s : strategies_) {
    if (s.alive) out[{s.agent_type, domain_key(s.domains)}].push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Snapshots

namespace {

json strategy_to_json(const Strategy& s) {
  return json{{"id", s.id},
              {"agent_type", std::string(to_string(s.agent_type))},
              {"domains", std::vector<std::string>(s.domains.begin(), s.domains.end())},
              {"content", s.content},
              {"reason", s.rationale},
              {"h_plus", s.meta.positive_feedback},
              {"h_minus", s.meta.negative_feedback},
              {"n_used", s.meta.usage_count},
              {"generation", s.meta.generation_index},
              {"alive", s.alive},
              {"parents", s.parents}};
}

Strategy strategy_from_json(const json& j, std::size_t position) {
  std::string label = "record " + std::to_string(position);
  if (!j.is_object()) throw ParseError(label, label + ": expected an object");
  if (j.contains("id") && j["id"].is_string()) label += " (id " + j["id"].get<std::string>() + ")";

  auto field = [&](const char* name) -> const json& {
    if (!j.contains(name)) throw ParseError(label, label + ": missing field '" + name + "'");
    return j[name];
  };
  auto str = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_string()) throw ParseError(label, label + ": field '" + name + "' must be a string");
    return v.get<std::string>();
  };
  auto count = [&](const char* name) {
    const json& v = field(name);
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
      throw ParseError(label, label + ": field '" + name + "' must be a non-negative integer");
    }
    return v.get<std::int64_t>();
  };

  Strategy s;
  s.id = str("id");
  try {
    s.agent_type = agent_type_from_string(str("agent_type"));
  } catch (const ValidationError& e) {
    throw ParseError(label, label + ": " + e.what());
  }
  const json& domains = field("domains");
  if (!domains.is_array() || domains.empty()) {
    throw ParseError(label, label + ": field 'domains' must be a non-empty array");
  }
  for (const auto& d : domains) {
    if (!d.is_string()) throw ParseError(label, label + ": domain names must be strings");
    s.domains.insert(d.get<std::string>());
  }
  s.content = str("content");
  if (s.content.empty()) throw ParseError(label, label + ": field 'content' must be non-empty");
  s.rationale = str("reason");
  s.meta.positive_feedback = count("h_plus");
  s.meta.negative_feedback = count("h_minus");
  s.meta.usage_count = count("n_used");
  s.meta.generation_index = count("generation");
  const json& alive = field("alive");
  if (!alive.is_boolean()) throw ParseError(label, label + ": field 'alive' must be a boolean");
  s.alive = alive.get<bool>();
  if (j.contains("parents")) {
    const json& parents = j["parents"];
    if (!parents.is_array()) throw ParseError(label, label + ": field 'parents' must be an array");
    for (const auto& p : parents) {
      if (!p.is_string()) throw ParseError(label, label + ": parent ids must be strings");
      s.parents.push_back(p.get<std::string>());
    }
  }
  return s;
}

}  // namespace

std::string bank_to_json(const StrategyBank& bank) {
  json arr = json::array();
  for (const auto& s : bank.strategies()) arr.push_back(strategy_to_json(s));
  return arr.dump(2) + "\n";
}

StrategyBank bank_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("document", std::string("bank snapshot is not valid JSON: ") + e.what());
  }
  if (!doc.is_array()) throw ParseError("document", "bank snapshot must be a JSON array");
  StrategyBank bank;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    Strategy s = strategy_from_json(doc[i], i);
    const std::string id = s.id;
    try {
      bank.add(std::move(s));
    } catch (const ValidationError& e) {
      throw ParseError(id, "record " + std::to_string(i) + " (id " + id + "): " + e.what());
    }
  }
  return bank;
}

void save_bank(const StrategyBank& bank, const std::filesystem::path& destination) {
  if (destination.has_parent_path()) std::filesystem::create_directories(destination.parent_path());
  const auto tmp = destination.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write bank snapshot to " + destination.string());
    out << bank_to_json(bank);
    if (!out) throw Error("failed writing bank snapshot to " + destination.string());
  }
  std::filesystem::rename(tmp, destination);
}

StrategyBank load_bank(const std::filesystem::path& source) {
  std::ifstream in(source, std::ios::binary);
  if (!in) throw Error("cannot read bank snapshot " + source.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return bank_from_json(buf.str());
}

}  // namespace evotod
