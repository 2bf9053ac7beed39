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

// Domain schema, user goals, entity databases and dialog corpora, plus a
// deterministic synthetic corpus generator. File formats are described in
// docs/formats.md.

#ifndef EVOTOD_CORPUS_HPP_
#define EVOTOD_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "evotod/types.hpp"

namespace evotod {

struct DomainSchema {
  std::string key_slot = "name";
  std::vector<std::string> informable;
  std::vector<std::string> requestable;
  std::vector<std::string> booking;

  bool has_slot(const std::string& slot) const;
  bool operator==(const DomainSchema&) const = default;
};

struct Schema {
  std::map<std::string, DomainSchema> domains;

  bool has_domain(const std::string& domain) const { return domains.count(domain) != 0; }
  const DomainSchema& domain(const std::string& name) const;
  bool operator==(const Schema&) const = default;
};

struct DomainGoal {
  SlotValues informables;
  std::vector<std::string> requestables;
  SlotValues booking;

  bool operator==(const DomainGoal&) const = default;
};

struct UserGoal {
  std::map<std::string, DomainGoal> domains;

  DomainSet domain_set() const;
  bool operator==(const UserGoal&) const = default;
};

using Entity = SlotValues;

struct DomainDatabase {
  std::map<std::string, std::vector<Entity>> entities;

  bool has_domain(const std::string& d) const { return entities.count(d) != 0; }
  bool operator==(const DomainDatabase&) const = default;
};

enum class Speaker { kUser, kSystem };
enum class Split { kTrain, kDev, kTest };

std::string_view to_string(Split split);
Split split_from_string(std::string_view text);

struct Utterance {
  Speaker speaker = Speaker::kUser;
  std::string text;

  bool operator==(const Utterance&) const = default;
};

struct CorpusDialog {
  std::string dialog_id;
  UserGoal goal;
  DomainSet domains;
  std::vector<Utterance> turns;  // alternating, user first
  Split split = Split::kTrain;

  std::vector<std::string> user_utterances() const;
  // Reference system reply following each user utterance ("" when absent).
  std::vector<std::string> system_references() const;
  bool operator==(const CorpusDialog&) const = default;
};

struct Corpus {
  std::vector<CorpusDialog> dialogs;

  std::vector<CorpusDialog> split(Split which) const;
  bool operator==(const Corpus&) const = default;
};

// Validation against the schema is skipped when `schema` is null.
Corpus load_corpus(const std::filesystem::path& path, const Schema* schema = nullptr,
                   int max_turns = 30);
Corpus corpus_from_json(const std::string& text, const Schema* schema = nullptr,
                        int max_turns = 30);
std::string corpus_to_json(const Corpus& corpus);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);

Schema load_schema(const std::filesystem::path& path);
Schema schema_from_json(const std::string& text);
std::string schema_to_json(const Schema& schema);

// Accepts a single JSON file keyed by domain, or a directory of <domain>.json
// files each holding an array of entities.
DomainDatabase load_database(const std::filesystem::path& path, const Schema* schema = nullptr);
DomainDatabase database_from_json(const std::string& text, const Schema* schema = nullptr);
std::string database_to_json(const DomainDatabase& db);

// Every goal slot and entity slot must belong to the declared schema.
void validate_against_schema(const Corpus& corpus, const Schema& schema);
void validate_against_schema(const DomainDatabase& db, const Schema& schema);

// Replaces entity values with "[domain_slot]" placeholders, longest first,
// matched case-insensitively on token boundaries.
class Delexicalizer {
 public:
  Delexicalizer() = default;
  Delexicalizer(const DomainDatabase& db, const Schema& schema);

  void add(std::string value, std::string placeholder);
  std::string apply(std::string_view text) const;
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;  // lower-cased value, placeholder
};

// MultiWOZ 2.x raw data.json plus optional list files naming the dev and
// test dialogs. Unknown domains are dropped.
Corpus convert_multiwoz(const std::filesystem::path& data_json,
                        const std::filesystem::path& val_list = {},
                        const std::filesystem::path& test_list = {});
Corpus convert_multiwoz_json(const std::string& data, const std::vector<std::string>& val_ids,
                             const std::vector<std::string>& test_ids);

// Canonical seven-domain MultiWOZ schema.
Schema multiwoz_schema();

struct SynthOptions {
  std::vector<std::string> domain_pool = {"hotel", "restaurant", "attraction", "train"};
  double multi_domain_probability = 0.3;
  int entities_per_domain = 12;
  // The last `test_dialogs` dialogs are tagged as the test split.
  int test_dialogs = 0;
};

struct SynthCorpus {
  Corpus corpus;
  DomainDatabase db;
  Schema schema;
};

// Deterministic for a given (seed, n_dialogs, options). Each goal's
// constraints are copied from one entity, so at least one entity satisfies it.
SynthCorpus synth_corpus(std::uint64_t seed, int n_dialogs, const SynthOptions& options = {});

// Surface phrase used by synthetic user turns for one constraint, e.g.
// ("area", "east") -> "in the east".
std::string synth_phrase(const std::string& slot, const std::string& value);

// Built-in schema used by synth_corpus.
Schema synthetic_schema();

// Case-insensitive entity match: "dontcare" and absent slots match anything.
bool entity_matches(const Entity& entity, const SlotValues& constraints);

std::string to_lower(std::string_view text);

}  // namespace evotod

#endif  // EVOTOD_CORPUS_HPP_
