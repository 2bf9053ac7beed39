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

#include "evotod/llm_gateway.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "evotod/errors.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace evotod {

using nlohmann::json;

std::string_view to_string(TemplateId id) {
  switch (id) {
    case TemplateId::kDST: return "dst";
    case TemplateId::kDP: return "dp";
    case TemplateId::kNLG: return "nlg";
    case TemplateId::kUserSim: return "user_sim";
    case TemplateId::kE2EPart1: return "e2e_part1";
    case TemplateId::kE2EPart2: return "e2e_part2";
    case TemplateId::kArbiter: return "arbiter";
    case TemplateId::kGenesis: return "genesis";
    case TemplateId::kMutation: return "mutation";
    case TemplateId::kConsolidation: return "consolidation";
  }
  return "?";
}

TemplateId template_id_from_string(std::string_view text) {
  for (TemplateId id : kAllTemplates) {
    if (to_string(id) == text) return id;
  }
  throw ValidationError("template", "unknown template '" + std::string(text) + "'");
}

std::string_view to_string(ProviderRole role) {
  return role == ProviderRole::kOnline ? "online" : "offline";
}

// Templating --------------------------------------------------------------------

namespace {

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }

// Calls fn(name, begin, end) for every {identifier} in body.
template <typename Fn>
void scan_placeholders(std::string_view body, Fn fn) {
  for (std::size_t i = 0; i < body.size(); ++i) {
    if (body[i] != '{' || i + 1 >= body.size() || !ident_start(body[i + 1])) continue;
    std::size_t j = i + 1;
    while (j < body.size() && ident_char(body[j])) ++j;
    if (j < body.size() && body[j] == '}') {
      fn(body.substr(i + 1, j - i - 1), i, j + 1);
      i = j;
    }
  }
}

}  // namespace

std::vector<std::string> template_placeholders(TemplateId id) {
  std::vector<std::string> names;
  scan_placeholders(template_body(id), [&](std::string_view name, std::size_t, std::size_t) {
    for (const auto& n : names) {
      if (n == name) return;
    }
    names.emplace_back(name);
  });
  return names;
}

std::string output_format_example(TemplateId id) {
  const std::string& body = template_body(id);
  const auto heading = body.rfind("Output Format");
  if (heading == std::string::npos) throw NotFoundError("template has no Output Format block");
  const auto start = body.find_first_of("{[", body.find('\n', heading));
  return body.substr(start);
}

std::string render_text(std::string_view body, const Variables& variables) {
  std::string out;
  out.reserve(body.size() * 2);
  std::size_t last = 0;
  scan_placeholders(body, [&](std::string_view name, std::size_t begin, std::size_t end) {
    auto it = variables.find(std::string(name));
    if (it == variables.end()) {
      throw TemplateError(std::string(name), "unbound placeholder {" + std::string(name) + "}");
    }
    out.append(body.substr(last, begin - last));
    out += it->second;
    last = end;
  });
  out.append(body.substr(last));
  return out;
}

std::string render_prompt(TemplateId id, const Variables& variables) {
  return render_text(template_body(id), variables);
}

std::string omit_output_fields(const std::string& prompt, const std::set<std::string>& fields) {
  if (fields.empty()) return prompt;
  const auto heading = prompt.rfind("Output Format");
  if (heading == std::string::npos) return prompt;
  std::vector<std::string> lines;
  std::istringstream in(prompt.substr(heading));
  for (std::string line; std::getline(in, line);) {
    std::string_view t = line;
    while (!t.empty() && std::isspace(static_cast<unsigned char>(t.front()))) t.remove_prefix(1);
    bool drop = false;
    for (const auto& f : fields) {
      if (t.rfind("\"" + f + "\":", 0) == 0) drop = true;
    }
    if (drop) continue;
    // a dropped last member leaves a dangling comma behind
    if (!lines.empty() && !t.empty() && t.front() == '}' && !lines.back().empty() &&
        lines.back().back() == ',') {
      lines.back().pop_back();
    }
    lines.push_back(line);
  }
  std::string out = prompt.substr(0, heading);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (i > 0) out += '\n';
    out += lines[i];
  }
  return out;
}

// Schemas -------------------------------------------------------------------------

namespace {

FieldSpec str(std::string n) { return {std::move(n), FieldType::kString, {}}; }
FieldSpec boolean(std::string n) { return {std::move(n), FieldType::kBool, {}}; }
FieldSpec obj(std::string n, std::vector<FieldSpec> c = {}) {
  return {std::move(n), FieldType::kObject, std::move(c)};
}

const std::map<TemplateId, ResponseSchema>& schemas() {
  static const std::map<TemplateId, ResponseSchema> s = {
      {TemplateId::kDST, {false, {str("critique"), obj("belief_state"), str("reason")}}},
      {TemplateId::kDP,
       {false,
        {str("critique"), str("system_action"), str("reason"), boolean("query_db"),
         {"query", FieldType::kObjectOrNull, {}}}}},
      {TemplateId::kNLG, {false, {str("critique"), str("system_utterance"), str("reason")}}},
      {TemplateId::kUserSim, {false, {str("critique")}}},
      {TemplateId::kE2EPart1,
       {false,
        {str("critique"), obj("belief_state"), str("system_action"), str("reason"),
         boolean("db_query_needed"), {"query", FieldType::kObjectOrNull, {}},
         str("system_utterance")}}},
      {TemplateId::kE2EPart2, {false, {str("system_utterance"), str("reason")}}},
      {TemplateId::kArbiter,
       {false, {{"final_output", FieldType::kAny, {}}, str("reason"), boolean("critique_accepted")}}},
      {TemplateId::kGenesis, {true, {str("reason"), str("content")}}},
      {TemplateId::kMutation,
       {false,
        {obj("strategy",
             {str("agent_type"), str("content"), str("reason"), {"score", FieldType::kInteger, {}}})}}},
      {TemplateId::kConsolidation, {false, {str("content"), str("reason")}}},
  };
  return s;
}

std::optional<std::string> check_fields(const std::vector<FieldSpec>& fields, const json& value,
                                        const std::string& path, const std::set<std::string>& omitted) {
  if (!value.is_object()) return path.empty() ? "reply is not a JSON object" : path + " is not an object";
  for (const auto& f : fields) {
    const std::string at = path.empty() ? f.name : path + "." + f.name;
    if (!value.contains(f.name)) {
      if (omitted.count(f.name) != 0) continue;
      return "missing field '" + at + "'";
    }
    const json& v = value[f.name];
    bool ok = true;
    switch (f.type) {
      case FieldType::kString: ok = v.is_string(); break;
      case FieldType::kBool: ok = v.is_boolean(); break;
      case FieldType::kInteger: ok = v.is_number_integer(); break;
      case FieldType::kObject: ok = v.is_object(); break;
      case FieldType::kObjectOrNull: ok = v.is_object() || v.is_null(); break;
      case FieldType::kArray: ok = v.is_array(); break;
      case FieldType::kAny: ok = !v.is_null(); break;
    }
    if (!ok) return "field '" + at + "' has the wrong type";
    if (f.type == FieldType::kObject && !f.children.empty()) {
      if (auto err = check_fields(f.children, v, at, omitted)) return err;
    }
  }
  return std::nullopt;
}

}  // namespace

const ResponseSchema& response_schema(TemplateId id) { return schemas().at(id); }

std::optional<std::string> check_schema(TemplateId id, const json& value,
                                        const std::set<std::string>& omitted) {
  const ResponseSchema& schema = response_schema(id);
  if (!schema.top_level_array) return check_fields(schema.fields, value, "", omitted);
  if (!value.is_array()) return "reply is not a JSON array";
  for (std::size_t i = 0; i < value.size(); ++i) {
    if (auto err = check_fields(schema.fields, value[i], "[" + std::to_string(i) + "]", omitted)) {
      return err;
    }
  }
  return std::nullopt;
}

json lenient_parse(std::string_view reply) {
  auto trim = [](std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
  };
  std::string_view body = trim(reply);
  if (body.rfind("```", 0) == 0) {
    const auto eol = body.find('\n');
    if (eol == std::string_view::npos || body.size() < 6 || body.substr(body.size() - 3) != "```") {
      throw ParseError("reply", "unterminated code fence");
    }
    const std::string_view tag = trim(body.substr(3, eol - 3));
    for (char c : tag) {
      if (!std::isalnum(static_cast<unsigned char>(c))) throw ParseError("reply", "bad fence tag");
    }
    body = trim(body.substr(eol + 1, body.size() - 3 - (eol + 1)));
  }
  try {
    return json::parse(body);
  } catch (const json::parse_error& e) {
    throw ParseError("reply", std::string("reply is not JSON: ") + e.what());
  }
}

void ProviderConfig::validate() const {
  if (!(sampling_temperature >= 0.0)) {
    throw ValidationError("sampling_temperature", "sampling temperature must be >= 0");
  }
  if (max_retries < 0) throw ValidationError("max_retries", "max_retries must be >= 0");
  if (endpoint.empty()) throw ValidationError("endpoint", "provider endpoint is empty");
}

// Mock ----------------------------------------------------------------------------

bool MockProvider::Matcher::matches(const ChatRequest& request) const {
  if (template_id && *template_id != request.template_id) return false;
  return !predicate || predicate(request.variables);
}

void MockProvider::register_script(Matcher matcher, std::vector<std::string> replies) {
  std::lock_guard lock(mu_);
  entries_.push_back({std::move(matcher), std::move(replies), 0, nullptr});
}

void MockProvider::register_handler(Matcher matcher, Handler handler) {
  std::lock_guard lock(mu_);
  entries_.push_back({std::move(matcher), {}, 0, std::move(handler)});
}

void MockProvider::set_unmatched(UnmatchedMode mode, std::string default_reply) {
  std::lock_guard lock(mu_);
  unmatched_ = mode;
  default_reply_ = std::move(default_reply);
}

void MockProvider::load_fixture(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  load_fixture_json(buf.str());
}

void MockProvider::load_fixture_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("fixture", std::string("mock fixture is not JSON: ") + e.what());
  }
  if (doc.contains("unmatched")) {
    const std::string mode = doc["unmatched"].get<std::string>();
    set_unmatched(mode == "default" ? UnmatchedMode::kDefaultReply : UnmatchedMode::kError,
                  doc.value("default_reply", ""));
  }
  for (const auto& s : doc.value("scripts", json::array())) {
    Matcher m;
    if (s.contains("template")) m.template_id = template_id_from_string(s["template"].get<std::string>());
    if (s.contains("when")) {
      std::map<std::string, std::string> when = s["when"].get<std::map<std::string, std::string>>();
      m.predicate = [when](const Variables& vars) {
        for (const auto& [k, sub] : when) {
          auto it = vars.find(k);
          if (it == vars.end() || it->second.find(sub) == std::string::npos) return false;
        }
        return true;
      };
    }
    std::vector<std::string> replies;
    for (const auto& r : s.at("replies")) replies.push_back(r.is_string() ? r.get<std::string>() : r.dump());
    register_script(std::move(m), std::move(replies));
  }
}

ChatReply MockProvider::complete(const ChatRequest& request) {
  Handler handler;
  std::string text;
  {
    std::lock_guard lock(mu_);
    calls_.push_back(request);
    Entry* hit = nullptr;
    for (auto& e : entries_) {
      if (e.matcher.matches(request)) {
        hit = &e;
        break;
      }
    }
    if (hit == nullptr) {
      if (unmatched_ == UnmatchedMode::kError) {
        throw TransportError("mock has no script for template '" +
                             std::string(to_string(request.template_id)) + "'");
      }
      text = default_reply_;
    } else if (hit->handler) {
      handler = hit->handler;
    } else if (hit->replies.empty()) {
      text = default_reply_;
    } else {
      text = hit->replies[std::min(hit->next, hit->replies.size() - 1)];
      if (hit->next < hit->replies.size()) ++hit->next;
    }
  }
  // handlers run unlocked so they may be slow or reentrant
  if (handler) text = handler(request);
  ChatReply reply;
  reply.text = std::move(text);
  reply.prompt_tokens = static_cast<std::int64_t>(request.prompt.size() / 4);
  reply.completion_tokens = static_cast<std::int64_t>(reply.text.size() / 4);
  return reply;
}

std::vector<ChatRequest> MockProvider::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

std::size_t MockProvider::call_count() const {
  std::lock_guard lock(mu_);
  return calls_.size();
}

void MockProvider::clear_calls() {
  std::lock_guard lock(mu_);
  calls_.clear();
}

// HTTP ----------------------------------------------------------------------------

namespace {

// Splits "https://host:port/base/path" into ("https://host:port", "/base/path").
std::pair<std::string, std::string> split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ValidationError("endpoint", "not a URL: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

}  // namespace

HttpChatProvider::HttpChatProvider(ProviderConfig config) : config_(std::move(config)) {
  auto [host, path] = split_url(config_.endpoint);
  scheme_host_ = host;
  const std::string suffix = "/chat/completions";
  if (path.size() < suffix.size() || path.compare(path.size() - suffix.size(), suffix.size(), suffix) != 0) {
    if (!path.empty() && path.back() == '/') path.pop_back();
    path += suffix;
  }
  path_ = path;
}

ChatReply HttpChatProvider::complete(const ChatRequest& request) {
  httplib::Client client(scheme_host_);
  const auto timeout = std::chrono::milliseconds(static_cast<std::int64_t>(config_.timeout_seconds * 1000));
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout));
  httplib::Headers headers;
  if (const char* key = std::getenv(config_.api_key_env.c_str()); key != nullptr && *key != '\0') {
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }
  const json body = {{"model", request.model},
                     {"temperature", request.temperature},
                     {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})}};
  auto res = client.Post(path_, headers, body.dump(), "application/json");
  if (!res) {
    throw TransportError("chat request to " + scheme_host_ + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    throw TransportError("chat endpoint returned HTTP " + std::to_string(res->status) + ": " +
                         res->body.substr(0, 200));
  }
  try {
    const json j = json::parse(res->body);
    ChatReply reply;
    reply.text = j.at("choices").at(0).at("message").at("content").get<std::string>();
    if (j.contains("usage")) {
      reply.prompt_tokens = j["usage"].value("prompt_tokens", 0);
      reply.completion_tokens = j["usage"].value("completion_tokens", 0);
    }
    return reply;
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat completion envelope: ") + e.what());
  }
}

// Gateway ---------------------------------------------------------------------------

LlmGateway::LlmGateway(std::shared_ptr<ChatProvider> online, ProviderConfig online_config,
                       std::shared_ptr<ChatProvider> offline, ProviderConfig offline_config)
    : online_(std::move(online)),
      offline_(std::move(offline)),
      online_config_(std::move(online_config)),
      offline_config_(std::move(offline_config)) {
  online_config_.validate();
  offline_config_.validate();
  if (!online_ || !offline_) throw ValidationError("provider", "gateway needs two providers");
}

const ProviderConfig& LlmGateway::config(ProviderRole role) const {
  return role == ProviderRole::kOnline ? online_config_ : offline_config_;
}

StructuredReply LlmGateway::complete_structured(ProviderRole role, TemplateId id,
                                                const Variables& variables, const CallOptions& options) {
  const ProviderConfig& cfg = config(role);
  ChatProvider& provider = role == ProviderRole::kOnline ? *online_ : *offline_;
  ChatRequest request;
  request.template_id = id;
  request.role = role;
  request.prompt = omit_output_fields(render_prompt(id, variables), options.omit_fields);
  request.variables = variables;
  request.model = cfg.model_name;
  request.temperature = cfg.sampling_temperature;

  CallRecord record;
  record.template_id = id;
  record.role = role;
  const auto started = std::chrono::steady_clock::now();
  auto finish = [&](bool ok) {
    record.ok = ok;
    record.latency_ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    std::lock_guard lock(mu_);
    records_.push_back(record);
  };

  std::string raw;
  std::string error;
  bool schema_ok = false;
  for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
    request.attempt = attempt;
    ++record.attempts;
    ChatReply reply;
    try {
      reply = provider.complete(request);
    } catch (const TransportError&) {
      finish(false);
      throw;
    }
    record.prompt_tokens += reply.prompt_tokens;
    record.completion_tokens += reply.completion_tokens;
    raw = reply.text;
    json value;
    try {
      value = lenient_parse(raw);
    } catch (const ParseError& e) {
      error = e.what();
      schema_ok = false;
      continue;
    }
    if (auto err = check_schema(id, value, options.omit_fields)) {
      error = *err;
      schema_ok = false;
      continue;
    }
    schema_ok = true;
    if (options.semantic_check) {
      if (auto err = options.semantic_check(value)) {
        error = *err;
        continue;
      }
    }
    finish(true);
    return {std::move(value), std::move(raw), attempt};
  }
  finish(false);
  throw StructuredOutputError(std::string(to_string(id)) + " reply rejected after " +
                                  std::to_string(record.attempts) + " attempts: " + error,
                              raw, record.attempts, schema_ok);
}

std::vector<CallRecord> LlmGateway::call_records() const {
  std::lock_guard lock(mu_);
  return records_;
}

UsageTotals LlmGateway::usage() const {
  std::lock_guard lock(mu_);
  UsageTotals t;
  for (const auto& r : records_) {
    ++t.calls;
    t.attempts += r.attempts;
    if (!r.ok) ++t.failures;
    t.prompt_tokens += r.prompt_tokens;
    t.completion_tokens += r.completion_tokens;
    t.latency_ms += r.latency_ms;
  }
  return t;
}

std::shared_ptr<ChatProvider> make_provider(
    const ProviderConfig& config,
    const std::function<std::shared_ptr<ChatProvider>(const std::string&)>& mock_factory) {
  config.validate();
  if (config.endpoint.rfind("mock:", 0) == 0) {
    if (!mock_factory) throw ValidationError("endpoint", "no mock factory for " + config.endpoint);
    return mock_factory(config.endpoint.substr(5));
  }
  if (config.endpoint.rfind("http://", 0) == 0 || config.endpoint.rfind("https://", 0) == 0) {
    return std::make_shared<HttpChatProvider>(config);
  }
  throw ValidationError("endpoint", "unsupported provider endpoint '" + config.endpoint + "'");
}

}  // namespace evotod
