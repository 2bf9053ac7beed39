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

// System dialog acts exchanged between the policy and generation agents,
// e.g. "recommend(name=acorn inn),inform(phone=01223 333444)".

#ifndef EVOTOD_ACTION_GRAMMAR_HPP_
#define EVOTOD_ACTION_GRAMMAR_HPP_

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "evotod/corpus.hpp"
#include "evotod/types.hpp"

namespace evotod {

inline constexpr std::string_view kActTypes[] = {
    "inform", "request", "recommend", "select", "nooffer",
    "book", "nobook", "offerbook", "offerbooked"};

struct DialogAct {
  std::string type;
  // key=value arguments in source order
  std::vector<std::pair<std::string, std::string>> slots;
  // bare arguments, e.g. the slot names of request(area, pricerange)
  std::vector<std::string> arguments;

  bool operator==(const DialogAct&) const = default;
};

// act      := type "(" [arg ("," arg)*] ")"
// arg      := key "=" value | value
// action   := act ("," act)*
// Whitespace around tokens is ignored. Throws ParseError on malformed input.
std::vector<DialogAct> parse_system_action(std::string_view text);

bool is_valid_action(std::string_view text);

std::string format_action(const std::vector<DialogAct>& acts);

// of one of `domains`. Slot keys may carry a "domain." prefix. "ref",
// of one of . Slot keys may carry a "domain." prefix. "ref",
// "choice" and "name" are accepted everywhere. Throws ValidationError.
void validate_action_slots(const std::vector<DialogAct>& acts, const Schema& schema,
                           const DomainSet& domains);

}  // namespace evotod

#endif  // EVOTOD_ACTION_GRAMMAR_HPP_
