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

// JSON conversions shared between translation units. Not installed.

#ifndef EVOTOD_SRC_JSON_IO_HPP_
#define EVOTOD_SRC_JSON_IO_HPP_

#include <string>

#include "evotod/corpus.hpp"
#include "json.hpp"

namespace evotod {

nlohmann::json goal_to_json(const UserGoal& goal);
// Throws ParseError labelled with `record`.
UserGoal goal_from_json(const nlohmann::json& j, const std::string& record);

}  // namespace evotod

#endif  // EVOTOD_SRC_JSON_IO_HPP_
