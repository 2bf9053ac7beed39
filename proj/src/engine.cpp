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

#include "evotod/engine.hpp"

#include <cstdio>
#include <fstream>

#include "evotod/errors.hpp"
#include "evotod/synthetic_agents.hpp"

namespace evotod {

using nlohmann::json;

World load_world(const EngineConfig& config) {
  World w;
  if (config.paths.corpus.empty()) {
    SynthOptions opt;
    opt.domain_pool = config.synthetic.domains;
    opt.multi_domain_probability = config.synthetic.multi_domain_probability;
    opt.entities_per_domain = config.synthetic.entities_per_domain;
    opt.test_dialogs = config.synthetic.test_dialogs;
    auto synth = synth_corpus(config.seed, config.synthetic.dialogs, opt);
    w.corpus = std::move(synth.corpus);
    w.db = std::move(synth.db);
    w.schema = std::move(synth.schema);
    return w;
  }
  w.schema = config.paths.schema.empty() ? multiwoz_schema() : load_schema(config.paths.schema);
  w.db = load_database(config.paths.db, &w.schema);
  w.corpus = load_corpus(config.paths.corpus, &w.schema);
  return w;
}

std::shared_ptr<ChatProvider> provider_for(const ProviderConfig& provider, const EngineConfig& config,
                                           const World& world) {
  return make_provider(provider, [&](const std::string& name) -> std::shared_ptr<ChatProvider> {
    if (name == "synthetic") {
      SyntheticParams p;
      p.seed = config.seed;
      p.p_improve = config.synthetic.p_improve;
      p.step = config.synthetic.step;
      return std::make_shared<SyntheticAgents>(world.db, world.schema, p);
    }
    if (name.rfind("fixture:", 0) == 0) {
      auto mock = std::make_shared<MockProvider>();
      mock->load_fixture(name.substr(8));
      return mock;
    }
    throw ValidationError("endpoint", "unknown mock provider 'mock:" + name + "'");
  });
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  config_.validate();
  World world = load_world(config_);
  auto online = provider_for(config_.online, config_, world);
  auto offline = config_.offline.endpoint == config_.online.endpoint ? online
                                                                     : provider_for(config_.offline, config_, world);
  init(std::move(world), std::move(online), std::move(offline));
}

Engine::Engine(EngineConfig config, World world, std::shared_ptr<ChatProvider> online,
               std::shared_ptr<ChatProvider> offline)
    : config_(std::move(config)) {
  config_.validate();
  init(std::move(world), std::move(online), std::move(offline));
}

void Engine::init(World world, std::shared_ptr<ChatProvider> online, std::shared_ptr<ChatProvider> offline) {
  world_ = std::move(world);
  online_ = std::move(online);
  offline_ = std::move(offline);
  gateway_ = std::make_unique<LlmGateway>(online_, config_.online, offline_, config_.offline);
  embedder_ = make_embedder(config_.embedder.kind, config_.embedder.dimension, config_.embedder.model);
  EvolutionParams ep = config_.evolution;
  ep.fitness = config_.fitness;
  evolution_ = std::make_unique<EvolutionEngine>(*gateway_, *embedder_, ep);
  pipeline_ = std::make_unique<DialogPipeline>(*gateway_, world_.db, world_.schema);
  delexicalizer_ = Delexicalizer(world_.db, world_.schema);
  memory_ = config_.paths.ssm.empty() ? std::make_unique<StructuredMemory>()
                                      : std::make_unique<StructuredMemory>(config_.paths.ssm, config_.max_turns);
  evolved_upto_ = memory_->last_id();
  if (!config_.paths.bank.empty() && std::filesystem::exists(config_.paths.bank)) {
    bank_ = load_bank(config_.paths.bank);
  }
}

EpisodeConfig Engine::episode_config(TrajectorySource source, bool record_feedback) const {
  EpisodeConfig ec;
  ec.policy = config_.selection;
  ec.fitness = config_.fitness;
  ec.flags = config_.flags;
  ec.max_turns = config_.max_turns;
  ec.source = source;
  ec.record_feedback = record_feedback;
  return ec;
}

void Engine::prepare(const DomainSet& domains) {
  if (config_.flags.zero_shot) return;
  std::lock_guard epoch(epoch_mu_);
  std::unique_lock gate(bank_gate_);
  bool covered = true;
  for (AgentType t : kAgentTypes) covered = covered && bank_.covered(domains, t);
  if (covered) return;
  std::vector<OperationRecord> log;
  Rng rng = Rng(config_.seed).fork("coverage:" + domain_key(domains) + ":" + std::to_string(coverage_calls_++));
  evolution_->ensure_coverage(bank_, domains, rng, &log);
  std::lock_guard lock(state_mu_);
  coverage_log_.insert(coverage_log_.end(), log.begin(), log.end());
}

Trajectory Engine::run_dialog(const CorpusDialog& dialog) {
  const DomainSet domains = dialog.domains.empty() ? dialog.goal.domain_set() : dialog.domains;
  prepare(domains);
  std::size_t index;
  {
    std::lock_guard lock(state_mu_);
    index = dialogs_done_;
  }
  Rng rng = Rng(config_.seed).fork("dialog:" + std::to_string(index) + ":" + dialog.dialog_id);
  TurnHook hook;
  if (config_.trigger.kind == TriggerKind::kPerTurn && !config_.flags.zero_shot) {
    hook = [this](DialogSession& session, const TurnRecord&) { after_turn(session); };
  }
  Trajectory t = run_episode(dialog, bank_, memory_.get(), *pipeline_,
                             episode_config(TrajectorySource::kCorpusReplay, true), rng, hook);
  after_dialog_locked();
  return t;
}

void Engine::after_turn(DialogSession& session) {
  if (config_.trigger.kind != TriggerKind::kPerTurn || config_.flags.zero_shot) return;
  const auto& history = session.context().history;
  if (history.empty()) return;
  Trajectory last = session.trajectory(Outcome::kSuccess);
  last.turns = {history.back()};
  const auto flagged = flag_strategies(last, false, true);
  if (flagged.empty()) return;
  EvolutionCandidate candidate{session.trajectory(Outcome::kSuccess), flagged};
  std::lock_guard epoch(epoch_mu_);
  std::unique_lock gate(bank_gate_);
  const EvolutionReport report = run_epoch({candidate});
  swap_replaced(session, report);
}

void Engine::swap_replaced(DialogSession& session, const EvolutionReport& report) {
  std::map<std::string, std::string> replaced;
  for (const auto& op : report.operations) {
    if ((op.op == "mutation" || op.op == "consolidation") && !op.outputs.empty()) {
      for (const auto& in : op.inputs) replaced[in] = op.outputs.front();
    }
  }
  for (AgentType t : kAgentTypes) {
    std::string id = session.context().strategies.at(t).id;
    bool changed = false;
    for (auto it = replaced.find(id); it != replaced.end(); it = replaced.find(id)) {
      id = it->second;
      changed = true;
    }
    if (changed) session.replace_strategy(t, bank_.get(id));
  }
}

void Engine::after_dialog_locked() {
  std::size_t done;
  {
    std::lock_guard lock(state_mu_);
    done = ++dialogs_done_;
  }
  if (config_.flags.zero_shot) return;
  if (config_.trigger.kind == TriggerKind::kPerTurn) {
    // critiques were handled turn by turn; only the outcome remains
    std::lock_guard epoch(epoch_mu_);
    std::unique_lock gate(bank_gate_);
    const std::uint64_t last = memory_->last_id();
    std::vector<EvolutionCandidate> candidates;
    for (auto& t : memory_->read({evolved_upto_, last})) {
      auto flagged = flag_strategies(t, true, false);
      candidates.push_back({std::move(t), std::move(flagged)});
    }
    evolved_upto_ = last;
    run_epoch(candidates);
    return;
  }
  if (!config_.trigger.fires_after_dialog(done)) return;
  std::lock_guard epoch(epoch_mu_);
  std::unique_lock gate(bank_gate_);
  const std::uint64_t last = memory_->last_id();
  auto candidates = memory_->query_for_evolution({evolved_upto_, last});
  evolved_upto_ = last;
  run_epoch(candidates);
}

EvolutionReport Engine::run_epoch(const std::vector<EvolutionCandidate>& candidates) {
  Rng rng = Rng(config_.seed).fork("epoch:" + std::to_string(evolution_->epochs_run() + 1));
  EvolutionReport report = evolution_->evolve_epoch(bank_, candidates, rng);
  if (epoch_listener_) epoch_listener_(report, bank_);
  std::lock_guard lock(state_mu_);
  epochs_.push_back(report);
  if (!epoch_log_.empty()) {
    std::ofstream out(epoch_log_, std::ios::app);
    out << report_to_json(report).dump() << "\n";
  }
  return report;
}

EvolutionReport Engine::evolve_now() {
  std::unique_lock epoch(epoch_mu_, std::try_to_lock);
  if (!epoch.owns_lock()) throw ConflictError("an evolution epoch is already running");
  std::unique_lock gate(bank_gate_);
  const std::uint64_t last = memory_->last_id();
  auto candidates = memory_->query_for_evolution({evolved_upto_, last});
  evolved_upto_ = last;
  return run_epoch(candidates);
}

MetricReport Engine::evaluate(const std::vector<CorpusDialog>& dialogs, const EvalOptions& options) {
  if (dialogs.empty()) throw ValidationError("dialogs", "nothing to evaluate");
  StrategyBank copy;
  {
    std::shared_lock gate(bank_gate_);
    copy = bank_;
  }
  std::vector<Trajectory> trajectories;
  std::vector<UserGoal> goals;
  std::vector<std::string> candidates;
  std::vector<std::string> references;
  for (const auto& dialog : dialogs) {
    const DomainSet domains = dialog.domains.empty() ? dialog.goal.domain_set() : dialog.domains;
    Rng rng = Rng(config_.seed).fork(options.label + ":" + dialog.dialog_id);
    if (!config_.flags.zero_shot) {
      Rng cov = rng.fork("coverage");
      evolution_->ensure_coverage(copy, domains, cov);
    }
    Trajectory t = run_episode(dialog, copy, nullptr, *pipeline_,
                               episode_config(TrajectorySource::kCorpusReplay, false), rng);
    const auto refs = dialog.system_references();
    for (std::size_t i = 0; i < refs.size(); ++i) {
      references.push_back(refs[i]);
      candidates.push_back(i < t.turns.size() ? t.turns[i].system_response : std::string());
    }
    goals.push_back(dialog.goal);
    trajectories.push_back(std::move(t));
  }
  const InformSuccess is = score_dialogs(trajectories, goals, world_.db, world_.schema);
  MetricReport report;
  report.inform = is.inform;
  report.success = is.success;
  report.bleu = bleu(candidates, references, &delexicalizer_);
  report.combine = combine(report.inform, report.success, report.bleu);
  report.per_dialog = is.per_dialog;
  return report;
}

BankAnalytics Engine::analytics() const {
  std::shared_lock gate(const_cast<std::shared_mutex&>(bank_gate_));
  return bank_stats(bank_, *embedder_, config_.fitness);
}

std::map<AgentType, Strategy> Engine::strategies_for(const DomainSet& domains, const std::string& label) {
  if (config_.flags.zero_shot) return zero_shot_strategies(domains);
  prepare(domains);
  std::shared_lock gate(bank_gate_);
  Rng rng = Rng(config_.seed).fork("live:" + label);
  return select_strategies(bank_, domains, config_.selection, config_.fitness, rng);
}

Trajectory Engine::finish_session(const DialogSession& session) {
  Trajectory t = session.trajectory(session.assess());
  if (t.turns.empty()) throw LifecycleError("session " + session.dialog_id() + " has no turns to record");
  if (!config_.flags.zero_shot) {
    std::shared_lock gate(bank_gate_);
    apply_episode_feedback(bank_, t);
  }
  t.record_id = memory_->append(t);
  after_dialog_locked();
  return t;
}

std::vector<EvolutionReport> Engine::epochs() const {
  std::lock_guard lock(state_mu_);
  return epochs_;
}

std::vector<OperationRecord> Engine::coverage_log() const {
  std::lock_guard lock(state_mu_);
  return coverage_log_;
}

std::size_t Engine::dialogs_done() const {
  std::lock_guard lock(state_mu_);
  return dialogs_done_;
}

void Engine::attach_memory(std::unique_ptr<StructuredMemory> memory) {
  memory_ = std::move(memory);
  evolved_upto_ = memory_->last_id();
}

void Engine::set_epoch_log(std::filesystem::path path) { epoch_log_ = std::move(path); }

void Engine::set_epoch_listener(std::function<void(const EvolutionReport&, const StrategyBank&)> listener) {
  std::lock_guard epoch(epoch_mu_);
  epoch_listener_ = std::move(listener);
}

std::vector<PhaseRow> Engine::run_experiment(const std::filesystem::path& run_dir) {
  if (memory_->size() != 0 || dialogs_done() != 0) {
    throw PreconditionError("run_experiment needs a fresh engine");
  }
  std::filesystem::create_directories(run_dir);
  for (const char* name : {"ssm.jsonl", "ssm.jsonl.idx", "epochs.jsonl", "metrics.csv"}) {
    std::filesystem::remove(run_dir / name);
  }
  save_config(config_, run_dir / "config.json");
  attach_memory(std::make_unique<StructuredMemory>(run_dir / "ssm.jsonl", config_.max_turns));
  set_epoch_log(run_dir / "epochs.jsonl");

  const auto train = world_.corpus.split(Split::kTrain);
  auto test = world_.corpus.split(Split::kTest);
  if (test.empty()) test = world_.corpus.split(Split::kDev);
  if (train.empty()) throw ValidationError("corpus", "the train split is empty");
  if (test.empty()) throw ValidationError("corpus", "no test or dev dialogs to evaluate on");

  std::vector<int> phases;
  for (int pct = 0; pct < 100; pct += config_.phase_every) phases.push_back(pct);
  phases.push_back(100);

  std::ofstream csv(run_dir / "metrics.csv");
  csv << metrics_csv_header();
  std::vector<PhaseRow> rows;
  std::size_t processed = 0;
  for (int pct : phases) {
    const std::size_t target = static_cast<std::size_t>(pct) * train.size() / 100;
    for (; processed < target; ++processed) {
      try {
        run_dialog(train[processed]);
      } catch (const Error& e) {
        throw Error("phase " + std::to_string(pct) + "%, dialog " + train[processed].dialog_id + ": " + e.what());
      }
    }
    PhaseRow row;
    row.phase_pct = pct;
    row.dialogs_processed = processed;
    char label[32];
    std::snprintf(label, sizeof(label), "phase-%03d", pct);
    try {
      row.metrics = evaluate(test, {label});
    } catch (const Error& e) {
      throw Error("phase " + std::to_string(pct) + "% evaluation: " + e.what());
    }
    row.analytics = analytics();
    csv << metrics_csv_row(row);
    csv.flush();
    char name[64];
    std::snprintf(name, sizeof(name), "bank_phase_%03d.json", pct);
    save_bank(bank_, run_dir / name);
    rows.push_back(std::move(row));
  }

  const UsageTotals u = gateway_->usage();
  json usage = {{"calls", u.calls},
                {"attempts", u.attempts},
                {"failures", u.failures},
                {"prompt_tokens", u.prompt_tokens},
                {"completion_tokens", u.completion_tokens},
                {"latency_ms", u.latency_ms}};
  std::ofstream(run_dir / "usage.json") << usage.dump(2) << "\n";
  return rows;
}

}  // namespace evotod
