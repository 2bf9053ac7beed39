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

#include "evotod/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "evotod/errors.hpp"

namespace evotod {

using nlohmann::json;

ProviderConfig EngineConfig::default_online() {
  ProviderConfig c;
  c.role = ProviderRole::kOnline;
  c.sampling_temperature = 0.7;
  return c;
}

ProviderConfig EngineConfig::default_offline() {
  ProviderConfig c;
  c.role = ProviderRole::kOffline;
  c.sampling_temperature = 0.8;
  return c;
}

void EngineConfig::validate() const {
  fitness.validate();
  selection.validate();
  evolution.validate();
  trigger.validate();
  online.validate();
  offline.validate();
  if (max_turns < 1) throw ValidationError("max_turns", "max_turns must be at least 1");
  if (phase_every < 1 || phase_every > 100) throw ValidationError("phase_every", "phase_every must be in [1, 100]");
  if (embedder.dimension < 1) throw ValidationError("embedder.dimension", "dimension must be positive");
  if (flags.e2e_agent && flags.arbitration) {
    throw ValidationError("pipeline.arbitration", "arbitration needs the modular pipeline");
  }
  if (paths.corpus.empty()) {
    if (synthetic.dialogs < 1) throw ValidationError("synthetic.dialogs", "need at least one dialog");
    if (synthetic.test_dialogs < 0 || synthetic.test_dialogs >= synthetic.dialogs) {
      throw ValidationError("synthetic.test_dialogs", "test dialogs must leave a non-empty train split");
    }
    if (synthetic.domains.empty()) throw ValidationError("synthetic.domains", "domain list is empty");
    if (synthetic.p_improve < 0.0 || synthetic.p_improve > 1.0) {
      throw ValidationError("synthetic.p_improve", "p_improve must be a probability");
    }
  } else if (paths.db.empty()) {
    throw ValidationError("paths.db", "a corpus needs an entity database");
  }
}

bool operator==(const EngineConfig& a, const EngineConfig& b) { return config_to_json(a) == config_to_json(b); }

namespace {

json provider_json(const ProviderConfig& p) {
  return {{"endpoint", p.endpoint},
          {"model_name", p.model_name},
          {"sampling_temperature", p.sampling_temperature},
          {"max_retries", p.max_retries},
          {"api_key_env", p.api_key_env},
          {"timeout_seconds", p.timeout_seconds}};
}

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError(section, "'" + section + "' must be an object");
  std::set<std::string> keys(allowed.begin(), allowed.end());
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (keys.count(it.key()) == 0) {
      throw ValidationError(section.empty() ? it.key() : section + "." + it.key(), "unknown config key '" + it.key() + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& section) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    const std::string field = section.empty() ? key : section + "." + key;
    throw ValidationError(field, "config field '" + field + "' has the wrong type");
  }
}

void read_provider(const json& j, ProviderConfig& p, const std::string& section) {
  check_keys(j, section, {"endpoint", "model_name", "sampling_temperature", "max_retries", "api_key_env", "timeout_seconds"});
  read(j, "endpoint", p.endpoint, section);
  read(j, "model_name", p.model_name, section);
  read(j, "sampling_temperature", p.sampling_temperature, section);
  read(j, "max_retries", p.max_retries, section);
  read(j, "api_key_env", p.api_key_env, section);
  read(j, "timeout_seconds", p.timeout_seconds, section);
}

}  // namespace

json config_to_json(const EngineConfig& c) {
  return {
      {"seed", c.seed},
      {"fitness", {{"alpha", c.fitness.alpha}, {"epsilon", c.fitness.epsilon}}},
      {"selection",
       {{"policy", std::string(to_string(c.selection.kind))},
        {"tau", c.selection.temperature},
        {"epsilon", c.selection.epsilon}}},
      {"evolution",
       {{"K", c.evolution.genesis_k},
        {"M", c.evolution.max_population},
        {"delta", c.evolution.similarity_threshold},
        {"consolidate", c.evolution.consolidate},
        {"prune", c.evolution.prune}}},
      {"trigger", {{"kind", std::string(to_string(c.trigger.kind))}, {"n", c.trigger.n}}},
      {"max_turns", c.max_turns},
      {"pipeline",
       {{"with_reasoning", c.flags.with_reasoning},
        {"with_peer_critique", c.flags.with_peer_critique},
        {"e2e_agent", c.flags.e2e_agent},
        {"arbitration", c.flags.arbitration},
        {"zero_shot", c.flags.zero_shot}}},
      {"providers", {{"online", provider_json(c.online)}, {"offline", provider_json(c.offline)}}},
      {"embedder", {{"kind", c.embedder.kind}, {"dimension", c.embedder.dimension}, {"model", c.embedder.model}}},
      {"paths",
       {{"corpus", c.paths.corpus},
        {"db", c.paths.db},
        {"schema", c.paths.schema},
        {"bank", c.paths.bank},
        {"ssm", c.paths.ssm}}},
      {"synthetic",
       {{"dialogs", c.synthetic.dialogs},
        {"test_dialogs", c.synthetic.test_dialogs},
        {"entities_per_domain", c.synthetic.entities_per_domain},
        {"multi_domain_probability", c.synthetic.multi_domain_probability},
        {"domains", c.synthetic.domains},
        {"p_improve", c.synthetic.p_improve},
        {"step", c.synthetic.step}}},
      {"phase_every", c.phase_every},
  };
}

EngineConfig config_from_json(const json& j) {
  EngineConfig c;
  check_keys(j, "", {"seed", "fitness", "selection", "evolution", "trigger", "max_turns", "pipeline", "providers",
                     "embedder", "paths", "synthetic", "phase_every"});
  read(j, "seed", c.seed, "");
  read(j, "max_turns", c.max_turns, "");
  read(j, "phase_every", c.phase_every, "");
  if (j.contains("fitness")) {
    const json& f = j["fitness"];
    check_keys(f, "fitness", {"alpha", "epsilon"});
    read(f, "alpha", c.fitness.alpha, "fitness");
    read(f, "epsilon", c.fitness.epsilon, "fitness");
  }
  if (j.contains("selection")) {
    const json& s = j["selection"];
    check_keys(s, "selection", {"policy", "tau", "epsilon"});
    std::string policy(to_string(c.selection.kind));
    read(s, "policy", policy, "selection");
    c.selection.kind = selection_kind_from_string(policy);
    read(s, "tau", c.selection.temperature, "selection");
    read(s, "epsilon", c.selection.epsilon, "selection");
  }
  if (j.contains("evolution")) {
    const json& e = j["evolution"];
    check_keys(e, "evolution", {"K", "M", "delta", "consolidate", "prune"});
    read(e, "K", c.evolution.genesis_k, "evolution");
    read(e, "M", c.evolution.max_population, "evolution");
    read(e, "delta", c.evolution.similarity_threshold, "evolution");
    read(e, "consolidate", c.evolution.consolidate, "evolution");
    read(e, "prune", c.evolution.prune, "evolution");
  }
  if (j.contains("trigger")) {
    const json& t = j["trigger"];
    check_keys(t, "trigger", {"kind", "n"});
    std::string kind(to_string(c.trigger.kind));
    read(t, "kind", kind, "trigger");
    c.trigger.kind = trigger_kind_from_string(kind);
    read(t, "n", c.trigger.n, "trigger");
  }
  if (j.contains("pipeline")) {
    const json& p = j["pipeline"];
    check_keys(p, "pipeline", {"with_reasoning", "with_peer_critique", "e2e_agent", "arbitration", "zero_shot"});
    read(p, "with_reasoning", c.flags.with_reasoning, "pipeline");
    read(p, "with_peer_critique", c.flags.with_peer_critique, "pipeline");
    read(p, "e2e_agent", c.flags.e2e_agent, "pipeline");
    read(p, "arbitration", c.flags.arbitration, "pipeline");
    read(p, "zero_shot", c.flags.zero_shot, "pipeline");
  }
  if (j.contains("providers")) {
    const json& p = j["providers"];
    check_keys(p, "providers", {"online", "offline"});
    if (p.contains("online")) read_provider(p["online"], c.online, "providers.online");
    if (p.contains("offline")) read_provider(p["offline"], c.offline, "providers.offline");
  }
  if (j.contains("embedder")) {
    const json& e = j["embedder"];
    check_keys(e, "embedder", {"kind", "dimension", "model"});
    read(e, "kind", c.embedder.kind, "embedder");
    read(e, "dimension", c.embedder.dimension, "embedder");
    read(e, "model", c.embedder.model, "embedder");
  }
  if (j.contains("paths")) {
    const json& p = j["paths"];
    check_keys(p, "paths", {"corpus", "db", "schema", "bank", "ssm"});
    read(p, "corpus", c.paths.corpus, "paths");
    read(p, "db", c.paths.db, "paths");
    read(p, "schema", c.paths.schema, "paths");
    read(p, "bank", c.paths.bank, "paths");
    read(p, "ssm", c.paths.ssm, "paths");
  }
  if (j.contains("synthetic")) {
    const json& s = j["synthetic"];
    check_keys(s, "synthetic", {"dialogs", "test_dialogs", "entities_per_domain", "multi_domain_probability",
                                "domains", "p_improve", "step"});
    read(s, "dialogs", c.synthetic.dialogs, "synthetic");
    read(s, "test_dialogs", c.synthetic.test_dialogs, "synthetic");
    read(s, "entities_per_domain", c.synthetic.entities_per_domain, "synthetic");
    read(s, "multi_domain_probability", c.synthetic.multi_domain_probability, "synthetic");
    read(s, "domains", c.synthetic.domains, "synthetic");
    read(s, "p_improve", c.synthetic.p_improve, "synthetic");
    read(s, "step", c.synthetic.step, "synthetic");
  }
  c.evolution.fitness = c.fitness;
  c.validate();
  return c;
}

EngineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), "config is not valid JSON: " + std::string(e.what()));
  }
  return config_from_json(j);
}

void save_config(const EngineConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw NotFoundError("cannot write config " + path.string());
  out << config_to_json(config).dump(2) << "\n";
}

}  // namespace evotod
