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

// evotod command-line entry point.

#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "evotod/config.hpp"
#include "evotod/engine.hpp"
#include "evotod/errors.hpp"
#include "evotod/service.hpp"

namespace {

using evotod::EngineConfig;
using nlohmann::json;

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string corpus;
  std::string db;
  std::string bank;
  std::string ssm;
  std::string policy;
  std::optional<double> tau;
  std::string trigger;
  bool zero_shot = false;
  std::optional<int> phase_every;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("--config", o.config, "JSON engine config");
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--corpus", o.corpus, "corpus JSON (synthetic world when absent)");
  cmd->add_option("--db", o.db, "entity database JSON file or directory");
  cmd->add_option("--bank", o.bank, "strategy bank snapshot");
  cmd->add_option("--ssm", o.ssm, "structured memory log (JSON Lines)");
  cmd->add_option("--policy", o.policy, "boltzmann | roulette_wheel | uniform_random | epsilon_greedy");
  cmd->add_option("--tau", o.tau, "Boltzmann temperature");
  cmd->add_option("--trigger", o.trigger, "per_episode | per_turn | per_n_dialogs:N");
  cmd->add_flag("--zero-shot", o.zero_shot, "static strategies, no selection or evolution");
  cmd->add_option("--phase-every", o.phase_every, "evaluation interval in percent of the train split");
}

EngineConfig build_config(const Overrides& o) {
  EngineConfig c = o.config.empty() ? EngineConfig{} : evotod::load_config(o.config);
  if (o.seed) c.seed = *o.seed;
  if (!o.corpus.empty()) c.paths.corpus = o.corpus;
  if (!o.db.empty()) c.paths.db = o.db;
  if (!o.bank.empty()) c.paths.bank = o.bank;
  if (!o.ssm.empty()) c.paths.ssm = o.ssm;
  if (!o.policy.empty()) c.selection.kind = evotod::selection_kind_from_string(o.policy);
  if (o.tau) c.selection.temperature = *o.tau;
  if (!o.trigger.empty()) {
    const auto colon = o.trigger.find(':');
    c.trigger.kind = evotod::trigger_kind_from_string(o.trigger.substr(0, colon));
    if (colon != std::string::npos) c.trigger.n = std::stoi(o.trigger.substr(colon + 1));
  }
  if (o.zero_shot) c.flags.zero_shot = true;
  if (o.phase_every) c.phase_every = *o.phase_every;
  c.evolution.fitness = c.fitness;
  c.validate();
  return c;
}

json metrics_json(const evotod::MetricReport& m) {
  return {{"inform", m.inform}, {"success", m.success}, {"bleu", m.bleu}, {"combine", m.combine}};
}

json analytics_json(const evotod::BankAnalytics& a) {
  json gen = json::object();
  for (const auto& [t, g] : a.avg_generation) gen[std::string(evotod::to_string(t))] = g;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"entropy_bits", opt(a.entropy_bits)},
          {"mean_pairwise_similarity", opt(a.mean_pairwise_similarity)},
          {"mean_alive_fitness", opt(a.mean_alive_fitness)},
          {"avg_generation", gen},
          {"alive", a.alive},
          {"total", a.total}};
}

void save_bank_if(const EngineConfig& c, const evotod::Engine& e) {
  if (!c.paths.bank.empty() && !c.flags.zero_shot) evotod::save_bank(e.bank(), c.paths.bank);
}

int cmd_init(const Overrides& o, const std::string& out) {
  EngineConfig c = build_config(o);
  c.paths.bank.clear();
  evotod::Engine engine(c);
  std::set<evotod::DomainSet> combos;
  for (const auto& d : engine.world().corpus.split(evotod::Split::kTrain)) combos.insert(d.domains);
  for (const auto& combo : combos) engine.prepare(combo);
  const std::string path = out.empty() ? (o.bank.empty() ? "bank.json" : o.bank) : out;
  evotod::save_bank(engine.bank(), path);
  std::printf("initialised %zu strategies over %zu domain combinations -> %s\n", engine.bank().size(),
              combos.size(), path.c_str());
  return 0;
}

int cmd_run(const Overrides& o, std::string out) {
  EngineConfig c = build_config(o);
  if (out.empty()) out = "runs/seed-" + std::to_string(c.seed);
  c.paths.ssm.clear();
  evotod::Engine engine(c);
  const auto rows = engine.run_experiment(out);
  std::printf("%-6s %-8s %8s %8s %8s %8s\n", "phase", "dialogs", "inform", "success", "bleu", "combine");
  for (const auto& r : rows) {
    std::printf("%5d%% %-8zu %8.2f %8.2f %8.2f %8.2f\n", r.phase_pct, r.dialogs_processed, r.metrics.inform,
                r.metrics.success, r.metrics.bleu, r.metrics.combine);
  }
  std::printf("run directory: %s\n", out.c_str());
  return 0;
}

int cmd_eval(const Overrides& o, const std::string& split) {
  EngineConfig c = build_config(o);
  evotod::Engine engine(c);
  auto dialogs = engine.world().corpus.split(evotod::split_from_string(split));
  const auto report = engine.evaluate(dialogs, {"eval-" + split});
  json out = metrics_json(report);
  out["dialogs"] = dialogs.size();
  std::cout << out.dump(2) << "\n";
  return 0;
}

int cmd_analyze(const Overrides& o, const std::string& embeddings_csv, bool include_dead) {
  EngineConfig c = build_config(o);
  if (c.paths.bank.empty()) throw evotod::ValidationError("bank", "analyze needs --bank");
  evotod::Engine engine(c);
  std::cout << analytics_json(engine.analytics()).dump(2) << "\n";
  if (!embeddings_csv.empty()) {
    std::ofstream(embeddings_csv) << evotod::export_embeddings_csv(engine.bank(), engine.embedder(), include_dead);
    std::printf("embeddings -> %s\n", embeddings_csv.c_str());
  }
  return 0;
}

evotod::HttpService* g_server = nullptr;

int cmd_serve(const Overrides& o) {
  EngineConfig c = build_config(o);
  evotod::Engine engine(c);
  evotod::ServiceCore core(engine);
  const char* token = std::getenv("EVOTOD_API_TOKEN");
  evotod::HttpService http(core, token != nullptr ? token : "");
  const auto [host, port] = evotod::bind_address_from_env();
  g_server = &http;
  std::signal(SIGINT, [](int) {
    if (g_server != nullptr) g_server->stop();
  });
  std::printf("serving on %s:%d\n", host.c_str(), port);
  std::fflush(stdout);
  http.listen(host, port);
  g_server = nullptr;
  save_bank_if(c, engine);
  return 0;
}

int cmd_chat(const Overrides& o, const std::vector<std::string>& domain_list) {
  EngineConfig c = build_config(o);
  evotod::Engine engine(c);
  evotod::ServiceCore core(engine);
  json body = {{"domains", domain_list}};
  const json session = core.create_session(body);
  const std::string id = session["session_id"];
  std::printf("session %s; type /end to finish\n", id.c_str());
  for (std::string line; std::printf("you> "), std::fflush(stdout), std::getline(std::cin, line);) {
    if (line.empty()) continue;
    const json reply = core.handle_turn(id, line);
    if (line == "/end") {
      std::printf("outcome: %s\n", reply["outcome"].is_null() ? "none" : reply["outcome"].get<std::string>().c_str());
      break;
    }
    std::printf("system> %s\n", reply["system_response"].get<std::string>().c_str());
    if (!reply["can_continue"].get<bool>()) std::printf("(dialog cannot continue; type /end)\n");
  }
  save_bank_if(c, engine);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"evotod: self-evolving multi-agent task-oriented dialog engine"};
  app.require_subcommand(1);

  Overrides o_init, o_run, o_eval, o_analyze, o_serve, o_chat;
  std::string init_out, run_out, eval_split = "test", embeddings_csv;
  bool include_dead = false;
  std::vector<std::string> chat_domains = {"restaurant"};

  auto* init = app.add_subcommand("init", "run Genesis for every domain combination of the train split");
  add_common(init, o_init);
  init->add_option("--out", init_out, "bank snapshot to write (default: --bank or bank.json)");

  auto* run = app.add_subcommand("run", "phased train-and-evolve protocol into a run directory");
  add_common(run, o_run);
  run->add_option("--out", run_out, "run directory (default runs/seed-<seed>)");

  auto* eval = app.add_subcommand("eval", "evaluate a bank on a split without feedback");
  add_common(eval, o_eval);
  eval->add_option("--split", eval_split, "train | dev | test");

  auto* analyze = app.add_subcommand("analyze", "bank analytics and embedding export");
  add_common(analyze, o_analyze);
  analyze->add_option("--embeddings", embeddings_csv, "write embedding coordinates as CSV");
  analyze->add_flag("--include-dead", include_dead, "include retired strategies in the export");

  auto* serve = app.add_subcommand("serve", "HTTP service (EVOTOD_BIND, EVOTOD_API_TOKEN)");
  add_common(serve, o_serve);

  auto* chat = app.add_subcommand("chat", "terminal chat session");
  add_common(chat, o_chat);
  chat->add_option("--domains", chat_domains, "session domains")->delimiter(',');

  CLI11_PARSE(app, argc, argv);
  try {
    if (*init) return cmd_init(o_init, init_out);
    if (*run) return cmd_run(o_run, run_out);
    if (*eval) return cmd_eval(o_eval, eval_split);
    if (*analyze) return cmd_analyze(o_analyze, embeddings_csv, include_dead);
    if (*serve) return cmd_serve(o_serve);
    if (*chat) return cmd_chat(o_chat, chat_domains);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
