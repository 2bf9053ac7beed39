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

#include "evotod/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "evotod/errors.hpp"
#include "evotod/rng.hpp"
#include "json.hpp"
#include "json_io.hpp"

namespace evotod {

using nlohmann::json;

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("document", what + " is not valid JSON: " + e.what());
  }
}

// Scalars are stored as strings; arrays and objects are not entity slots.
std::optional<std::string> scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<std::int64_t>());
  if (v.is_number()) {
    std::ostringstream os;
    os << v.get<double>();
    return os.str();
  }
  if (v.is_boolean()) return v.get<bool>() ? std::string("yes") : std::string("no");
  return std::nullopt;
}

}  // namespace

std::string to_lower(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool DomainSchema::has_slot(const std::string& slot) const {
  auto in = [&](const std::vector<std::string>& v) {
    return std::find(v.begin(), v.end(), slot) != v.end();
  };
  return slot == key_slot || in(informable) || in(requestable) || in(booking);
}

const DomainSchema& Schema::domain(const std::string& name) const {
  auto it = domains.find(name);
  if (it == domains.end()) throw NotFoundError("unknown domain '" + name + "'");
  return it->second;
}

DomainSet UserGoal::domain_set() const {
  DomainSet out;
  for (const auto& [d, _] : domains) out.insert(d);
  return out;
}

std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kDev: return "dev";
    case Split::kTest: return "test";
  }
  return "?";
}

Split split_from_string(std::string_view text) {
  if (text == "train") return Split::kTrain;
  if (text == "dev" || text == "val") return Split::kDev;
  if (text == "test") return Split::kTest;
  throw ValidationError("split", "unknown split '" + std::string(text) + "'");
}

std::vector<std::string> CorpusDialog::user_utterances() const {
  std::vector<std::string> out;
  for (const auto& u : turns) {
    if (u.speaker == Speaker::kUser) out.push_back(u.text);
  }
  return out;
}

std::vector<std::string> CorpusDialog::system_references() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < turns.size(); ++i) {
    if (turns[i].speaker != Speaker::kUser) continue;
    if (i + 1 < turns.size() && turns[i + 1].speaker == Speaker::kSystem) {
      out.push_back(turns[i + 1].text);
    } else {
      out.push_back("");
    }
  }
  return out;
}

std::vector<CorpusDialog> Corpus::split(Split which) const {
  std::vector<CorpusDialog> out;
  for (const auto& d : dialogs) {
    if (d.split == which) out.push_back(d);
  }
  return out;
}

bool entity_matches(const Entity& entity, const SlotValues& constraints) {
  for (const auto& [slot, value] : constraints) {
    const std::string want = to_lower(value);
    if (want.empty() || want == kDontCare) continue;
    auto it = entity.find(slot);
    if (it == entity.end() || to_lower(it->second) != want) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Goal / corpus JSON

json goal_to_json(const UserGoal& goal) {
  json j = json::object();
  for (const auto& [domain, g] : goal.domains) {
    j[domain] = json{{"informable", g.informables},
                     {"requestable", g.requestables},
                     {"booking", g.booking}};
  }
  return j;
}

namespace {

class DialogReader {
 public:
  explicit DialogReader(std::string id) : id_(std::move(id)) {}

  [[noreturn]] void fail(const std::string& field, const std::string& why) const {
    throw ParseError(id_, "dialog " + id_ + ": field '" + field + "' " + why, field);
  }

  SlotValues slot_map(const json& j, const std::string& field) const {
    SlotValues out;
    if (j.is_null()) return out;
    if (!j.is_object()) fail(field, "must be an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      auto v = scalar_text(it.value());
      if (!v) fail(field + "." + it.key(), "must be a scalar");
      out[it.key()] = *v;
    }
    return out;
  }

  UserGoal goal(const json& j) const {
    if (!j.is_object() || j.empty()) fail("goal", "must be a non-empty object");
    UserGoal g;
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string field = "goal." + it.key();
      if (!it.value().is_object()) fail(field, "must be an object");
      DomainGoal dg;
      const json& v = it.value();
      if (v.contains("informable")) dg.informables = slot_map(v["informable"], field + ".informable");
      if (v.contains("booking")) dg.booking = slot_map(v["booking"], field + ".booking");
      if (v.contains("requestable")) {
        if (!v["requestable"].is_array()) fail(field + ".requestable", "must be an array");
        for (const auto& r : v["requestable"]) {
          if (!r.is_string()) fail(field + ".requestable", "must hold strings");
          dg.requestables.push_back(r.get<std::string>());
        }
      }
      g.domains[it.key()] = std::move(dg);
    }
    return g;
  }

 private:
  std::string id_;
};

CorpusDialog dialog_from_json(const json& j, std::size_t position, const Schema* schema,
                              int max_turns) {
  if (!j.is_object()) {
    throw ParseError("#" + std::to_string(position), "dialog #" + std::to_string(position) +
                                                         " must be an object");
  }
  std::string id = "#" + std::to_string(position);
  if (j.contains("dialog_id") && j["dialog_id"].is_string()) id = j["dialog_id"].get<std::string>();
  DialogReader r(id);
  if (!j.contains("dialog_id") || !j["dialog_id"].is_string() || id.empty()) {
    r.fail("dialog_id", "is missing or not a string");
  }

  CorpusDialog d;
  d.dialog_id = id;
  if (!j.contains("goal")) r.fail("goal", "is missing");
  d.goal = r.goal(j["goal"]);

  if (j.contains("domains")) {
    if (!j["domains"].is_array()) r.fail("domains", "must be an array");
    for (const auto& x : j["domains"]) {
      if (!x.is_string()) r.fail("domains", "must hold strings");
      d.domains.insert(x.get<std::string>());
    }
  } else {
    d.domains = d.goal.domain_set();
  }
  if (d.domains.empty()) r.fail("domains", "must be non-empty");
  for (const auto& gd : d.goal.domain_set()) {
    if (d.domains.count(gd) == 0) r.fail("goal." + gd, "names a domain outside the dialog domains");
  }

  d.split = Split::kTrain;
  if (j.contains("split")) {
    if (!j["split"].is_string()) r.fail("split", "must be a string");
    try {
      d.split = split_from_string(j["split"].get<std::string>());
    } catch (const ValidationError&) {
      r.fail("split", "must be one of train/dev/test");
    }
  }

  if (!j.contains("turns") || !j["turns"].is_array() || j["turns"].empty()) {
    r.fail("turns", "must be a non-empty array");
  }
  const json& turns = j["turns"];
  if (static_cast<int>(turns.size()) > 2 * max_turns) {
    r.fail("turns", "exceeds " + std::to_string(2 * max_turns) + " utterances");
  }
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const std::string field = "turns[" + std::to_string(i) + "]";
    const json& t = turns[i];
    if (!t.is_object() || !t.contains("speaker") || !t.contains("text") ||
        !t["speaker"].is_string() || !t["text"].is_string()) {
      r.fail(field, "must be {speaker, text}");
    }
    const std::string speaker = t["speaker"].get<std::string>();
    Utterance u;
    if (speaker == "user") {
      u.speaker = Speaker::kUser;
    } else if (speaker == "system") {
      u.speaker = Speaker::kSystem;
    } else {
      r.fail(field + ".speaker", "must be 'user' or 'system'");
    }
    const Speaker expected = (i % 2 == 0) ? Speaker::kUser : Speaker::kSystem;
    if (u.speaker != expected) r.fail(field + ".speaker", "breaks user/system alternation");
    u.text = t["text"].get<std::string>();
    if (u.speaker == Speaker::kUser && u.text.empty()) r.fail(field + ".text", "is empty");
    d.turns.push_back(std::move(u));
  }

  if (schema != nullptr) {
    for (const auto& dom : d.domains) {
      if (!schema->has_domain(dom)) r.fail("domains", "names unknown domain '" + dom + "'");
    }
    for (const auto& [dom, g] : d.goal.domains) {
      const auto& ds = schema->domain(dom);
      for (const auto& [slot, _] : g.informables) {
        if (!ds.has_slot(slot)) r.fail("goal." + dom + ".informable." + slot, "is not in the schema");
      }
      for (const auto& [slot, _] : g.booking) {
        if (!ds.has_slot(slot)) r.fail("goal." + dom + ".booking." + slot, "is not in the schema");
      }
      for (const auto& slot : g.requestables) {
        if (!ds.has_slot(slot)) r.fail("goal." + dom + ".requestable." + slot, "is not in the schema");
      }
    }
  }
  return d;
}

}  // namespace

UserGoal goal_from_json(const json& j, const std::string& record) {
  return DialogReader(record).goal(j);
}

Corpus corpus_from_json(const std::string& text, const Schema* schema, int max_turns) {
  const json doc = parse_json(text, "corpus");
  const json* arr = &doc;
  if (doc.is_object()) {
    if (!doc.contains("dialogs")) throw ParseError("document", "corpus object lacks 'dialogs'");
    arr = &doc["dialogs"];
  }
  if (!arr->is_array()) throw ParseError("document", "corpus dialogs must be an array");
  Corpus c;
  for (std::size_t i = 0; i < arr->size(); ++i) {
    c.dialogs.push_back(dialog_from_json((*arr)[i], i, schema, max_turns));
  }
  return c;
}

Corpus load_corpus(const std::filesystem::path& path, const Schema* schema, int max_turns) {
  return corpus_from_json(read_file(path), schema, max_turns);
}

std::string corpus_to_json(const Corpus& corpus) {
  json arr = json::array();
  for (const auto& d : corpus.dialogs) {
    json turns = json::array();
    for (const auto& u : d.turns) {
      turns.push_back({{"speaker", u.speaker == Speaker::kUser ? "user" : "system"},
                       {"text", u.text}});
    }
    arr.push_back({{"dialog_id", d.dialog_id},
                   {"split", std::string(to_string(d.split))},
                   {"domains", std::vector<std::string>(d.domains.begin(), d.domains.end())},
                   {"goal", goal_to_json(d.goal)},
                   {"turns", turns}});
  }
  return json{{"dialogs", arr}}.dump(2) + "\n";
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
  write_file(path, corpus_to_json(corpus));
}

// ---------------------------------------------------------------------------
// Schema / database

Schema schema_from_json(const std::string& text) {
  const json doc = parse_json(text, "schema");
  if (!doc.is_object()) throw ParseError("document", "schema must be an object keyed by domain");
  Schema s;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const json& v = it.value();
    if (!v.is_object()) throw ParseError(it.key(), "schema for '" + it.key() + "' must be an object");
    DomainSchema ds;
    auto list = [&](const char* name) {
      std::vector<std::string> out;
      if (!v.contains(name)) return out;
      if (!v[name].is_array()) {
        throw ParseError(it.key(), "schema field '" + std::string(name) + "' must be an array", name);
      }
      for (const auto& x : v[name]) out.push_back(x.get<std::string>());
      return out;
    };
    if (v.contains("key_slot")) ds.key_slot = v["key_slot"].get<std::string>();
    ds.informable = list("informable");
    ds.requestable = list("requestable");
    ds.booking = list("booking");
    s.domains[it.key()] = std::move(ds);
  }
  return s;
}

Schema load_schema(const std::filesystem::path& path) { return schema_from_json(read_file(path)); }

std::string schema_to_json(const Schema& schema) {
  json j = json::object();
  for (const auto& [d, ds] : schema.domains) {
    j[d] = {{"key_slot", ds.key_slot},
            {"informable", ds.informable},
            {"requestable", ds.requestable},
            {"booking", ds.booking}};
  }
  return j.dump(2) + "\n";
}

namespace {

std::vector<Entity> entities_from_json(const json& arr, const std::string& domain) {
  if (!arr.is_array()) throw ParseError(domain, "database for '" + domain + "' must be an array");
  std::vector<Entity> out;
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_object()) {
      throw ParseError(domain + "[" + std::to_string(i) + "]", "entity must be an object");
    }
    Entity e;
    for (auto it = arr[i].begin(); it != arr[i].end(); ++it) {
      if (auto v = scalar_text(it.value())) e[it.key()] = *v;
    }
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace

DomainDatabase database_from_json(const std::string& text, const Schema* schema) {
  const json doc = parse_json(text, "database");
  if (!doc.is_object()) throw ParseError("document", "database must be an object keyed by domain");
  DomainDatabase db;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    db.entities[it.key()] = entities_from_json(it.value(), it.key());
  }
  if (schema != nullptr) validate_against_schema(db, *schema);
  return db;
}

DomainDatabase load_database(const std::filesystem::path& path, const Schema* schema) {
  if (std::filesystem::is_directory(path)) {
    DomainDatabase db;
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(path)) {
      if (entry.path().extension() == ".json") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      std::string domain = f.stem().string();
      const std::string suffix = "_db";
      if (domain.size() > suffix.size() &&
          domain.compare(domain.size() - suffix.size(), suffix.size(), suffix) == 0) {
        domain.resize(domain.size() - suffix.size());
      }
      db.entities[domain] = entities_from_json(parse_json(read_file(f), f.string()), domain);
    }
    if (schema != nullptr) validate_against_schema(db, *schema);
    return db;
  }
  return database_from_json(read_file(path), schema);
}

std::string database_to_json(const DomainDatabase& db) {
  json j = json::object();
  for (const auto& [d, list] : db.entities) j[d] = list;
  return j.dump(2) + "\n";
}

void validate_against_schema(const Corpus& corpus, const Schema& schema) {
  const std::string text = corpus_to_json(corpus);
  (void)corpus_from_json(text, &schema, 1 << 20);
}

void validate_against_schema(const DomainDatabase& db, const Schema& schema) {
  for (const auto& [domain, list] : db.entities) {
    if (!schema.has_domain(domain)) {
      throw ParseError(domain, "database domain '" + domain + "' is not in the schema");
    }
    const auto& ds = schema.domain(domain);
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string rec = domain + "[" + std::to_string(i) + "]";
      if (list[i].count(ds.key_slot) == 0) {
        throw ParseError(rec, "entity " + rec + " lacks key slot '" + ds.key_slot + "'", ds.key_slot);
      }
      for (const auto& [slot, _] : list[i]) {
        if (!ds.has_slot(slot)) {
          throw ParseError(rec, "entity " + rec + " has slot '" + slot + "' outside the schema", slot);
        }
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Delexicalisation

namespace {

bool is_word_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

}  // namespace

Delexicalizer::Delexicalizer(const DomainDatabase& db, const Schema& schema) {
  for (const auto& [domain, list] : db.entities) {
    const DomainSchema* ds = schema.has_domain(domain) ? &schema.domain(domain) : nullptr;
    for (const auto& e : list) {
      for (const auto& [slot, value] : e) {
        const bool identifying = ds == nullptr || slot == ds->key_slot ||
                                 std::find(ds->requestable.begin(), ds->requestable.end(), slot) !=
                                     ds->requestable.end();
        // short values ("4", "yes") would clobber ordinary words
        if (!identifying || value.size() < 3) continue;
        add(value, "[" + domain + "_" + slot + "]");
      }
    }
  }
}

void Delexicalizer::add(std::string value, std::string placeholder) {
  value = to_lower(value);
  if (value.empty()) return;
  for (const auto& [v, _] : entries_) {
    if (v == value) return;
  }
  entries_.emplace_back(std::move(value), std::move(placeholder));
  std::stable_sort(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
    return a.first.size() > b.first.size();
  });
}

std::string Delexicalizer::apply(std::string_view text) const {
  std::string out(text);
  for (const auto& [value, placeholder] : entries_) {
    std::string lower = to_lower(out);
    std::size_t pos = 0;
    std::string rebuilt;
    std::size_t last = 0;
    while ((pos = lower.find(value, pos)) != std::string::npos) {
      const bool left_ok = pos == 0 || !is_word_char(lower[pos - 1]);
      const std::size_t end = pos + value.size();
      const bool right_ok = end >= lower.size() || !is_word_char(lower[end]);
      if (left_ok && right_ok) {
        rebuilt.append(out, last, pos - last);
        rebuilt += placeholder;
        last = end;
      }
      pos = end;
    }
    if (last != 0) {
      rebuilt.append(out, last, std::string::npos);
      out = std::move(rebuilt);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// MultiWOZ adapter

Schema multiwoz_schema() {
  Schema s;
  s.domains["attraction"] = {"name", {"area", "name", "type"},
                             {"address", "entrance fee", "phone", "postcode", "openhours",
                              "pricerange", "id"},
                             {}};
  s.domains["hotel"] = {"name",
                        {"area", "internet", "name", "parking", "pricerange", "stars", "type"},
                        {"address", "phone", "postcode", "ref", "id", "takesbookings", "n"},
                        {"day", "people", "stay"}};
  s.domains["restaurant"] = {"name", {"area", "food", "name", "pricerange"},
                             {"address", "phone", "postcode", "ref", "id", "introduction",
                              "signature", "type"},
                             {"day", "people", "time"}};
  s.domains["train"] = {"trainid", {"arriveby", "day", "departure", "destination", "leaveat"},
                        {"duration", "price", "ref", "id"},
                        {"people"}};
  s.domains["taxi"] = {"name", {"arriveby", "departure", "destination", "leaveat"},
                       {"phone", "type", "taxi_colors", "taxi_types"},
                       {}};
  s.domains["hospital"] = {"department", {"department"}, {"address", "phone", "postcode", "id"}, {}};
  s.domains["police"] = {"name", {}, {"address", "phone", "postcode", "id"}, {}};
  return s;
}

Corpus convert_multiwoz_json(const std::string& data, const std::vector<std::string>& val_ids,
                             const std::vector<std::string>& test_ids) {
  const json doc = parse_json(data, "MultiWOZ data");
  if (!doc.is_object()) throw ParseError("document", "MultiWOZ data must be an object keyed by dialog id");
  const Schema schema = multiwoz_schema();
  auto in = [](const std::vector<std::string>& ids, const std::string& id) {
    return std::find(ids.begin(), ids.end(), id) != ids.end();
  };

  Corpus c;
  for (auto it = doc.begin(); it != doc.end(); ++it) {
    const std::string id = it.key();
    const json& raw = it.value();
    CorpusDialog d;
    d.dialog_id = id;
    d.split = in(test_ids, id) ? Split::kTest : in(val_ids, id) ? Split::kDev : Split::kTrain;
    if (!raw.contains("goal") || !raw["goal"].is_object()) {
      throw ParseError(id, "dialog " + id + ": field 'goal' is missing", "goal");
    }
    for (const auto& [domain, ds] : schema.domains) {
      if (!raw["goal"].contains(domain)) continue;
      const json& g = raw["goal"][domain];
      if (!g.is_object() || g.empty()) continue;
      DomainGoal dg;
      auto slots = [&](const char* key, SlotValues& out) {
        if (!g.contains(key) || !g[key].is_object()) return;
        for (auto s = g[key].begin(); s != g[key].end(); ++s) {
          auto v = scalar_text(s.value());
          if (v && s.value().is_string()) out[to_lower(s.key())] = *v;
        }
      };
      slots("info", dg.informables);
      slots("book", dg.booking);
      if (g.contains("reqt") && g["reqt"].is_array()) {
        for (const auto& r : g["reqt"]) dg.requestables.push_back(to_lower(r.get<std::string>()));
      }
      if (dg.informables.empty() && dg.requestables.empty() && dg.booking.empty()) continue;
      d.goal.domains[domain] = std::move(dg);
      d.domains.insert(domain);
    }
    if (d.domains.empty()) continue;
    if (!raw.contains("log") || !raw["log"].is_array()) {
      throw ParseError(id, "dialog " + id + ": field 'log' is missing", "log");
    }
    const json& log = raw["log"];
    for (std::size_t i = 0; i < log.size(); ++i) {
      Utterance u;
      u.speaker = (i % 2 == 0) ? Speaker::kUser : Speaker::kSystem;
      u.text = log[i].value("text", "");
      d.turns.push_back(std::move(u));
    }
    if (d.turns.empty()) continue;
    c.dialogs.push_back(std::move(d));
  }
  return c;
}

Corpus convert_multiwoz(const std::filesystem::path& data_json, const std::filesystem::path& val_list,
                        const std::filesystem::path& test_list) {
  auto read_ids = [](const std::filesystem::path& p) {
    std::vector<std::string> ids;
    if (p.empty()) return ids;
    std::istringstream in(read_file(p));
    std::string line;
    while (std::getline(in, line)) {
      while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.pop_back();
      if (!line.empty()) ids.push_back(line);
    }
    return ids;
  };
  return convert_multiwoz_json(read_file(data_json), read_ids(val_list), read_ids(test_list));
}

// ---------------------------------------------------------------------------
// Synthetic corpus

std::string synth_phrase(const std::string& slot, const std::string& value) {
  if (slot == "area") return "in the " + value;
  if (slot == "pricerange") return "in the " + value + " price range";
  if (slot == "stars") return "with " + value + " stars";
  if (slot == "type") return "of type " + value;
  if (slot == "food") return "serving " + value + " food";
  if (slot == "departure") return "leaving from " + value;
  if (slot == "destination") return "going to " + value;
  if (slot == "day") return "on " + value;
  return "with " + slot + " " + value;
}


Schema synthetic_schema() {
  Schema s;
  s.domains["hotel"] = {"name", {"area", "pricerange", "stars", "type"},
                        {"phone", "address", "postcode"}, {"day", "people", "stay"}};
  s.domains["restaurant"] = {"name", {"area", "food", "pricerange"},
                             {"phone", "address", "postcode"}, {"day", "people", "time"}};
  s.domains["attraction"] = {"name", {"area", "type"}, {"phone", "address", "postcode"}, {}};
  s.domains["train"] = {"trainid", {"departure", "destination", "day"},
                        {"price", "duration", "leaveat"}, {"people"}};
  return s;
}

namespace {

struct SlotVocab {
  std::map<std::string, std::vector<std::string>> values;
};

const std::map<std::string, SlotVocab>& synth_vocab() {
  static const std::map<std::string, SlotVocab> vocab = {
      {"hotel",
       {{{"area", {"north", "south", "east", "west", "centre"}},
         {"pricerange", {"cheap", "moderate", "expensive"}},
         {"stars", {"2", "3", "4", "5"}},
         {"type", {"hotel", "guesthouse"}}}}},
      {"restaurant",
       {{{"area", {"north", "south", "east", "west", "centre"}},
         {"food", {"italian", "chinese", "indian", "british", "french", "thai"}},
         {"pricerange", {"cheap", "moderate", "expensive"}}}}},
      {"attraction",
       {{{"area", {"north", "south", "east", "west", "centre"}},
         {"type", {"museum", "park", "theatre", "college", "gallery"}}}}},
      {"train",
       {{{"departure", {"cambridge", "london", "ely", "norwich", "stevenage"}},
         {"destination", {"cambridge", "london", "ely", "norwich", "stevenage"}},
         {"day", {"monday", "tuesday", "wednesday", "thursday", "friday"}}}}},
  };
  return vocab;
}

const std::vector<std::string> kNameHeads = {"acorn", "alder", "ashgrove", "beacon", "birch",
                                             "bramble", "cedar", "clover", "copper", "elm",
                                             "falcon", "fern", "granite", "harbour", "hazel",
                                             "heron", "ivy", "juniper", "kestrel", "linden",
                                             "maple", "meadow", "oak", "orchard", "pebble",
                                             "quarry", "raven", "rowan", "saffron", "willow"};

const std::map<std::string, std::vector<std::string>> kNameTails = {
    {"hotel", {"lodge", "inn", "house", "court"}},
    {"restaurant", {"kitchen", "bistro", "table", "grill"}},
    {"attraction", {"gallery", "gardens", "hall", "museum"}},
};

const std::vector<std::string> kStreets = {"mill road", "king street", "regent street",
                                           "hills road", "station road", "bridge street"};

std::string pick(const std::vector<std::string>& v, Rng& rng) { return v[rng.index(v.size())]; }

std::string digits(Rng& rng, int n) {
  std::string out;
  for (int i = 0; i < n; ++i) out += static_cast<char>('0' + rng.index(10));
  return out;
}

Entity make_entity(const std::string& domain, Rng& rng, std::set<std::string>& used_names) {
  Entity e;
  for (const auto& [slot, values] : synth_vocab().at(domain).values) e[slot] = pick(values, rng);
  if (domain == "train") {
    while (e["destination"] == e["departure"]) {
      e["destination"] = pick(synth_vocab().at(domain).values.at("destination"), rng);
    }
    std::string id;
    do {
      id = "tr" + digits(rng, 4);
    } while (!used_names.insert(id).second);
    e["trainid"] = id;
    e["price"] = std::to_string(5 + rng.index(40)) + ".10 pounds";
    e["duration"] = std::to_string(20 + rng.index(90)) + " minutes";
    e["leaveat"] = (rng.index(2) == 0 ? "0" : "1") + std::to_string(rng.index(10)) + ":" +
                   std::to_string(rng.index(6)) + "0";
    return e;
  }
  std::string name;
  do {
    name = "the " + pick(kNameHeads, rng) + " " + pick(kNameTails.at(domain), rng);
  } while (!used_names.insert(name).second);
  e["name"] = name;
  e["phone"] = "01223" + digits(rng, 6);
  e["address"] = std::to_string(1 + rng.index(98)) + " " + pick(kStreets, rng);
  e["postcode"] = "cb" + std::to_string(1 + rng.index(4)) + digits(rng, 1) + "ab";
  return e;
}

std::string join_and(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += (i + 1 == parts.size()) ? " and " : ", ";
    out += parts[i];
  }
  return out;
}

}  // namespace

SynthCorpus synth_corpus(std::uint64_t seed, int n_dialogs, const SynthOptions& options) {
  if (n_dialogs < 1) throw ValidationError("n_dialogs", "synthetic corpus needs at least one dialog");
  if (options.domain_pool.empty()) throw ValidationError("domain_pool", "domain pool is empty");
  SynthCorpus out;
  const Schema full = synthetic_schema();
  for (const auto& d : options.domain_pool) {
    if (!full.has_domain(d)) throw ValidationError("domain_pool", "no synthetic schema for '" + d + "'");
    out.schema.domains[d] = full.domain(d);
  }

  Rng db_rng = Rng(seed).fork("synth-db");
  for (const auto& d : options.domain_pool) {
    std::set<std::string> used;
    auto& list = out.db.entities[d];
    for (int i = 0; i < options.entities_per_domain; ++i) list.push_back(make_entity(d, db_rng, used));
  }

  Rng rng = Rng(seed).fork("synth-dialogs");
  for (int n = 0; n < n_dialogs; ++n) {
    CorpusDialog dialog;
    char id[32];
    std::snprintf(id, sizeof(id), "synth-%05d", n);
    dialog.dialog_id = id;
    dialog.split = (n >= n_dialogs - options.test_dialogs) ? Split::kTest : Split::kTrain;

    std::vector<std::string> order;
    order.push_back(pick(options.domain_pool, rng));
    if (options.domain_pool.size() > 1 && rng.uniform("synth-multi") < options.multi_domain_probability) {
      std::string second;
      do {
        second = pick(options.domain_pool, rng);
      } while (second == order.front());
      order.push_back(second);
    }

    for (const auto& domain : order) {
      const auto& ds = out.schema.domain(domain);
      const auto& entities = out.db.entities.at(domain);
      const Entity& target = entities[rng.index(entities.size())];

      std::vector<std::string> informable = ds.informable;
      // partial Fisher-Yates to pick two constraint slots
      for (std::size_t i = 0; i + 1 < informable.size(); ++i) {
        std::swap(informable[i], informable[i + rng.index(informable.size() - i)]);
      }
      informable.resize(std::min<std::size_t>(2, informable.size()));
      std::sort(informable.begin(), informable.end());

      std::vector<std::string> requestable = ds.requestable;
      for (std::size_t i = 0; i + 1 < requestable.size(); ++i) {
        std::swap(requestable[i], requestable[i + rng.index(requestable.size() - i)]);
      }
      requestable.resize(1 + rng.index(2));

      DomainGoal goal;
      std::vector<std::string> phrases;
      for (const auto& slot : informable) {
        goal.informables[slot] = target.at(slot);
        phrases.push_back(synth_phrase(slot, target.at(slot)));
      }
      goal.requestables = requestable;
      dialog.goal.domains[domain] = goal;
      dialog.domains.insert(domain);

      const std::string key = target.at(ds.key_slot);
      std::vector<std::string> answers;
      for (const auto& slot : requestable) answers.push_back("the " + slot + " is " + target.at(slot));

      dialog.turns.push_back({Speaker::kUser, "I am looking for a " + domain + " " + join_and(phrases) + "."});
      dialog.turns.push_back({Speaker::kSystem, key + " is a " + domain + " " + join_and(phrases) +
                                                    ". Would you like more details?"});
      dialog.turns.push_back({Speaker::kUser, "Yes, can you tell me the " + join_and(requestable) + "?"});
      std::string reply = "Sure, " + join_and(answers) + ".";
      reply[6] = static_cast<char>(std::tolower(static_cast<unsigned char>(reply[6])));
      dialog.turns.push_back({Speaker::kSystem, reply});
    }
    dialog.turns.push_back({Speaker::kUser, "Thank you, that is all I need."});
    dialog.turns.push_back({Speaker::kSystem, "You are welcome. Goodbye!"});
    out.corpus.dialogs.push_back(std::move(dialog));
  }
  return out;
}

}  // namespace evotod
