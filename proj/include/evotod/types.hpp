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

#ifndef EVOTOD_TYPES_HPP_
#define EVOTOD_TYPES_HPP_

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace evotod {

// The three agents that own an evolvable strategy population.
enum class AgentType { kDST, kDP, kNLG };

inline constexpr std::array<AgentType, 3> kAgentTypes = {
    AgentType::kDST, AgentType::kDP, AgentType::kNLG};

// Every participant that may author or receive a critique. kE2E is the
// single monolithic agent used by the end-to-end ablation.
enum class Role { kDST, kDP, kNLG, kUserSim, kE2E, kSystem };

std::string_view to_string(AgentType type);
std::string_view to_string(Role role);
AgentType agent_type_from_string(std::string_view text);
Role role_from_string(std::string_view text);
Role as_role(AgentType type);
std::optional<AgentType> as_agent_type(Role role);

// Short description of each agent's job, used by the evolution prompts.
std::string_view agent_role_description(AgentType type);

// Domain sets are kept sorted so that equality is exact-set equality.
using DomainSet = std::set<std::string>;

std::string domain_key(const DomainSet& domains);  // "hotel+taxi"
std::string join_domains(const DomainSet& domains, std::string_view sep = ", ");

// slot -> value
using SlotValues = std::map<std::string, std::string>;
// domain -> slot -> value
using BeliefState = std::map<std::string, SlotValues>;

inline constexpr std::string_view kDontCare = "dontcare";

}  // namespace evotod

#endif  // EVOTOD_TYPES_HPP_
