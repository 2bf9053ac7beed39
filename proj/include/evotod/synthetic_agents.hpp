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

// Synthetic agent world: a ChatProvider that answers every template from the
// prompt variables and the entity database. Each strategy carries a latent
// quality "[q=0.xx]" in its content that sets how often the agent guided by
// it makes mistakes. Mutation moves the quality up with probability
// `p_improve` and down otherwise.

#ifndef EVOTOD_SYNTHETIC_AGENTS_HPP_
#define EVOTOD_SYNTHETIC_AGENTS_HPP_

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "evotod/corpus.hpp"
#include "evotod/llm_gateway.hpp"

namespace evotod {

struct SyntheticParams {
  std::uint64_t seed = 0;
  double genesis_q_lo = 0.3;
  double genesis_q_hi = 0.6;
  double p_improve = 0.8;
  double step = 0.1;
  // quality assumed for contents without a marker (the static strategies)
  double default_q = 0.5;
};

// First "[q=...]" marker in `content`, if any.
std::optional<double> strategy_quality(std::string_view content);
std::string with_quality(std::string_view content, double q);

class SyntheticAgents : public ChatProvider {
 public:
  SyntheticAgents(DomainDatabase db, Schema schema, SyntheticParams params = {});

  ChatReply complete(const ChatRequest& request) override;

  std::size_t call_count() const { return calls_.load(); }
  const SyntheticParams& params() const { return params_; }

 private:
  DomainDatabase db_;
  Schema schema_;
  SyntheticParams params_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace evotod

#endif  // EVOTOD_SYNTHETIC_AGENTS_HPP_
