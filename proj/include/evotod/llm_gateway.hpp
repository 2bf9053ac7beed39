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

// Model boundary: prompt templates, structured-reply parsing with retry, a
// chat-completions HTTP client and a scripted mock.

#ifndef EVOTOD_LLM_GATEWAY_HPP_
#define EVOTOD_LLM_GATEWAY_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "evotod/types.hpp"
#include "json.hpp"

namespace evotod {

enum class TemplateId {
  kDST,
  kDP,
  kNLG,
  kUserSim,
  kE2EPart1,
  kE2EPart2,
  kArbiter,
  kGenesis,
  kMutation,
  kConsolidation,
};

inline constexpr TemplateId kAllTemplates[] = {
    TemplateId::kDST,      TemplateId::kDP,       TemplateId::kNLG,
    TemplateId::kUserSim,  TemplateId::kE2EPart1, TemplateId::kE2EPart2,
    TemplateId::kArbiter,  TemplateId::kGenesis,  TemplateId::kMutation,
    TemplateId::kConsolidation};

std::string_view to_string(TemplateId id);
TemplateId template_id_from_string(std::string_view text);

using Variables = std::map<std::string, std::string>;

const std::string& template_body(TemplateId id);
// Distinct placeholder names in order of first appearance.
std::vector<std::string> template_placeholders(TemplateId id);
// The JSON example that follows the template's "Output Format" heading,
// verbatim (it contains pseudo-values such as true/false).
std::string output_format_example(TemplateId id);

// Substitutes every {name} placeholder; values are inserted verbatim and not
// rescanned. Extra variables are ignored. Throws TemplateError naming the
// first unbound placeholder.
std::string render_prompt(TemplateId id, const Variables& variables);
std::string render_text(std::string_view body, const Variables& variables);

// Static strategy texts for zero-shot mode.
const std::string& static_strategy_text(AgentType type);

// Response schemas -----------------------------------------------------------

enum class FieldType { kString, kBool, kInteger, kObject, kObjectOrNull, kArray, kAny };

struct FieldSpec {
  std::string name;
  FieldType type = FieldType::kString;
  std::vector<FieldSpec> children;  // required members when type is kObject
};

struct ResponseSchema {
  bool top_level_array = false;  // array of objects each matching `fields`
  std::vector<FieldSpec> fields;
};

const ResponseSchema& response_schema(TemplateId id);

// Returns an error message, or nullopt when `value` satisfies the schema.
// Fields named in `omitted` are not required.
std::optional<std::string> check_schema(TemplateId id, const nlohmann::json& value,
                                        const std::set<std::string>& omitted = {});

// Trims whitespace and strips one optional ``` fence, then parses JSON.
// Throws ParseError on anything else.
nlohmann::json lenient_parse(std::string_view reply);

// Providers ------------------------------------------------------------------

enum class ProviderRole { kOnline, kOffline };
std::string_view to_string(ProviderRole role);

struct ProviderConfig {
  ProviderRole role = ProviderRole::kOnline;
  // "mock:<name>" or an http(s) chat-completions URL
  std::string endpoint = "mock:synthetic";
  std::string model_name = "mock";
  double sampling_temperature = 0.7;
  int max_retries = 2;
  // environment variable holding the bearer token for remote endpoints
  std::string api_key_env = "EVOTOD_LLM_API_KEY";
  double timeout_seconds = 120.0;

  void validate() const;
};

struct ChatRequest {
  TemplateId template_id = TemplateId::kDST;
  ProviderRole role = ProviderRole::kOnline;
  std::string prompt;
  Variables variables;
  std::string model;
  double temperature = 0.0;
  int attempt = 0;
};

struct ChatReply {
  std::string text;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
};

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;
  virtual ChatReply complete(const ChatRequest& request) = 0;
};

// Deterministic scripted provider for tests.
class MockProvider : public ChatProvider {
 public:
  struct Matcher {
    std::optional<TemplateId> template_id;
    std::function<bool(const Variables&)> predicate;  // empty: match all

    bool matches(const ChatRequest& request) const;
  };
  using Handler = std::function<std::string(const ChatRequest&)>;
  enum class UnmatchedMode { kError, kDefaultReply };

  MockProvider() = default;

  // Matching calls get `replies` in order, then the last one repeatedly.
  // Matchers are tried in registration order.
  void register_script(Matcher matcher, std::vector<std::string> replies);
  void register_handler(Matcher matcher, Handler handler);
  void set_unmatched(UnmatchedMode mode, std::string default_reply = {});

  // Fixture format:
  // {"unmatched": "error"|"default", "default_reply": "...",
  //  "scripts": [{"template": "dst", "when": {"var": "substring"},
  //               "replies": ["..." | {...}]}]}
  void load_fixture(const std::filesystem::path& path);
  void load_fixture_json(const std::string& text);

  ChatReply complete(const ChatRequest& request) override;

  std::vector<ChatRequest> calls() const;
  std::size_t call_count() const;
  void clear_calls();

 private:
  struct Entry {
    Matcher matcher;
    std::vector<std::string> replies;
    std::size_t next = 0;
    Handler handler;
  };

  mutable std::mutex mu_;
  std::vector<Entry> entries_;
  std::vector<ChatRequest> calls_;
  UnmatchedMode unmatched_ = UnmatchedMode::kError;
  std::string default_reply_;
};

// OpenAI-style POST {endpoint} with {"model", "messages", "temperature"}.
// A base URL without "/chat/completions" gets it appended.
class HttpChatProvider : public ChatProvider {
 public:
  explicit HttpChatProvider(ProviderConfig config);
  ChatReply complete(const ChatRequest& request) override;

 private:
  ProviderConfig config_;
  std::string scheme_host_;
  std::string path_;
};

// Gateway ----------------------------------------------------------------------

struct CallRecord {
  TemplateId template_id = TemplateId::kDST;
  ProviderRole role = ProviderRole::kOnline;
  int attempts = 0;
  bool ok = false;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double latency_ms = 0.0;
};

struct UsageTotals {
  std::int64_t calls = 0;
  std::int64_t attempts = 0;
  std::int64_t failures = 0;
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;
  double latency_ms = 0.0;
};

struct StructuredReply {
  nlohmann::json value;
  std::string raw;
  int retry_count = 0;
};

struct CallOptions {
  // Output-format fields removed from the prompt and not required.
  std::set<std::string> omit_fields;
  // Extra check after the schema passes; returns an error message.
  std::function<std::optional<std::string>(const nlohmann::json&)> semantic_check;
};

// Removes the lines declaring `fields` from the Output Format block.
std::string omit_output_fields(const std::string& prompt, const std::set<std::string>& fields);

class LlmGateway {
 public:
  LlmGateway(std::shared_ptr<ChatProvider> online, ProviderConfig online_config,
             std::shared_ptr<ChatProvider> offline, ProviderConfig offline_config);

  // Renders, calls and parses; retries the same prompt up to max_retries
  // times. Throws TransportError or StructuredOutputError.
  StructuredReply complete_structured(ProviderRole role, TemplateId id, const Variables& variables,
                                      const CallOptions& options = {});

  const ProviderConfig& config(ProviderRole role) const;
  std::vector<CallRecord> call_records() const;
  UsageTotals usage() const;

 private:
  std::shared_ptr<ChatProvider> online_;
  std::shared_ptr<ChatProvider> offline_;
  ProviderConfig online_config_;
  ProviderConfig offline_config_;
  mutable std::mutex mu_;
  std::vector<CallRecord> records_;
};

// Builds a provider from its config. "mock:<name>" endpoints are resolved by
// `mock_factory`; anything else must be an http(s) URL.
std::shared_ptr<ChatProvider> make_provider(
    const ProviderConfig& config,
    const std::function<std::shared_ptr<ChatProvider>(const std::string&)>& mock_factory);

}  // namespace evotod

#endif  // EVOTOD_LLM_GATEWAY_HPP_
