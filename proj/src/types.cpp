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

#include "evotod/types.hpp"

#include "evotod/errors.hpp"
#include "evotod/rng.hpp"

namespace evotod {

std::string_view to_string(AgentType type) {
  switch (type) {
    case AgentType::kDST: return "DST";
    case AgentType::kDP: return "DP";
    case AgentType::kNLG: return "NLG";
  }
  return "?";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::kDST: return "DST";
    case Role::kDP: return "DP";
    case Role::kNLG: return "NLG";
    case Role::kUserSim: return "UserSim";
    case Role::kE2E: return "E2E";
    case Role::kSystem: return "System";
  }
  return "?";
}

AgentType agent_type_from_string(std::string_view text) {
  if (text == "DST") return AgentType::kDST;
  if (text == "DP") return AgentType::kDP;
  if (text == "NLG") return AgentType::kNLG;
  throw ValidationError("agent_type", "unknown agent type '" + std::string(text) + "'");
}

Role role_from_string(std::string_view text) {
  if (text == "DST") return Role::kDST;
  if (text == "DP") return Role::kDP;
  if (text == "NLG") return Role::kNLG;
  if (text == "UserSim") return Role::kUserSim;
  if (text == "E2E") return Role::kE2E;
  if (text == "System") return Role::kSystem;
  throw ValidationError("role", "unknown agent role '" + std::string(text) + "'");
}

Role as_role(AgentType type) {
  switch (type) {
    case AgentType::kDST: return Role::kDST;
    case AgentType::kDP: return Role::kDP;
    case AgentType::kNLG: return Role::kNLG;
  }
  return Role::kSystem;
}

std::optional<AgentType> as_agent_type(Role role) {
  switch (role) {
    case Role::kDST: return AgentType::kDST;
    case Role::kDP: return AgentType::kDP;
    case Role::kNLG: return AgentType::kNLG;
    default: return std::nullopt;
  }
}

std::string_view agent_role_description(AgentType type) {
  switch (type) {
    case AgentType::kDST:
      return "Dialog State Tracker: tracks the user's constraints as a per-domain slot-value "
             "belief state";
    case AgentType::kDP:
      return "Dialog Policy: chooses the next system action and queries the entity database";
    case AgentType::kNLG:
      return "Natural Language Generator: turns the system action into a natural response";
  }
  return "";
}

std::string domain_key(const DomainSet& domains) { return join_domains(domains, "+"); }

std::string join_domains(const DomainSet& domains, std::string_view sep) {
  std::string out;
  for (const auto& d : domains) {
    if (!out.empty()) out += sep;
    out += d;
  }
  return out;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis) {
  std::uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::fork(std::string_view label) const {
  return Rng(mix_seed(seed_ ^ fnv1a64(label)));
}

}  // namespace evotod
