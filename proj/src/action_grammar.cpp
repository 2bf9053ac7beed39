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

#include "evotod/action_grammar.hpp"

#include <algorithm>
#include <cctype>

#include "evotod/errors.hpp"

namespace evotod {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool known_type(std::string_view t) {
  return std::find(std::begin(kActTypes), std::end(kActTypes), t) != std::end(kActTypes);
}

[[noreturn]] void bad(std::string_view text, const std::string& why) {
  throw ParseError(std::string(text), "malformed system action '" + std::string(text) + "': " + why,
                   "system_action");
}

// Splits on commas at parenthesis depth zero.
std::vector<std::string_view> split_top(std::string_view s, std::string_view whole) {
  std::vector<std::string_view> parts;
  int depth = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '(') {
      ++depth;
    } else if (s[i] == ')') {
      if (--depth < 0) bad(whole, "unbalanced ')'");
    } else if (s[i] == ',' && depth == 0) {
      parts.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  if (depth != 0) bad(whole, "unbalanced '('");
  parts.push_back(s.substr(start));
  return parts;
}

}  // namespace

std::vector<DialogAct> parse_system_action(std::string_view text) {
  const std::string_view body = trim(text);
  if (body.empty()) bad(text, "empty action");
  std::vector<DialogAct> acts;
  for (std::string_view raw : split_top(body, text)) {
    raw = trim(raw);
    const auto open = raw.find('(');
    if (open == std::string_view::npos || raw.back() != ')') bad(text, "expected type(args)");
    DialogAct act;
    act.type = std::string(trim(raw.substr(0, open)));
    std::transform(act.type.begin(), act.type.end(), act.type.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (!known_type(act.type)) bad(text, "unknown act type '" + act.type + "'");
    const std::string_view inner = trim(raw.substr(open + 1, raw.size() - open - 2));
    if (inner.find_first_of("()") != std::string_view::npos) bad(text, "nested parentheses");
    if (!inner.empty()) {
      std::size_t start = 0;
      while (start <= inner.size()) {
        std::size_t comma = inner.find(',', start);
        if (comma == std::string_view::npos) comma = inner.size();
        const std::string_view arg = trim(inner.substr(start, comma - start));
        if (arg.empty()) bad(text, "empty argument in " + act.type);
        const auto eq = arg.find('=');
        if (eq == std::string_view::npos) {
          act.arguments.emplace_back(arg);
        } else {
          const std::string_view key = trim(arg.substr(0, eq));
          if (key.empty()) bad(text, "missing slot name in " + act.type);
          act.slots.emplace_back(std::string(key), std::string(trim(arg.substr(eq + 1))));
        }
        start = comma + 1;
      }
    }
    acts.push_back(std::move(act));
  }
  return acts;
}

bool is_valid_action(std::string_view text) {
  try {
    parse_system_action(text);
    return true;
  } catch (const ParseError&) {
    return false;
  }
}

std::string format_action(const std::vector<DialogAct>& acts) {
  std::string out;
  for (std::size_t i = 0; i < acts.size(); ++i) {
    if (i > 0) out += ",";
    out += acts[i].type + "(";
    bool first = true;
    for (const auto& [k, v] : acts[i].slots) {
      if (!first) out += ",";
      out += k + "=" + v;
      first = false;
    }
    for (const auto& a : acts[i].arguments) {
      if (!first) out += ",";
      out += a;
      first = false;
    }
    out += ")";
  }
  return out;
}

void validate_action_slots(const std::vector<DialogAct>& acts, const Schema& schema,
                           const DomainSet& domains) {
  auto check = [&](std::string slot, const std::string& act) {
    std::string domain;
    if (const auto dot = slot.find('.'); dot != std::string::npos) {
      domain = slot.substr(0, dot);
      slot = slot.substr(dot + 1);
    }
    slot = to_lower(slot);
    if (slot == "ref" || slot == "choice" || slot == "name") return;
    if (!domain.empty()) {
      if (domains.count(domain) == 0 || !schema.has_domain(domain) ||
          !schema.domain(domain).has_slot(slot)) {
        throw ValidationError("system_action", act + " names unknown slot '" + domain + "." + slot + "'");
      }
      return;
    }
    for (const auto& d : domains) {
      if (schema.has_domain(d) && schema.domain(d).has_slot(slot)) return;
    }
    throw ValidationError("system_action", act + " names unknown slot '" + slot + "'");
  };
  for (const auto& act : acts) {
    if (act.type == "recommend" || act.type == "select" || act.type == "offerbooked" ||
        act.type == "nooffer" || act.type == "nobook") {
      continue;
    }
    for (const auto& [k, _] : act.slots) check(k, act.type);
    if (act.type == "request") {
      for (const auto& a : act.arguments) check(a, act.type);
    }
  }
}

}  // namespace evotod
