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

#include "evotod/service.hpp"

#include <cstdio>
#include <cstdlib>

#include "evotod/errors.hpp"
#include "json_io.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"

namespace evotod {

using nlohmann::json;

struct ServiceCore::Session {
  std::string id;
  std::unique_ptr<DialogSession> dialog;
  std::mutex turn_mu;
  bool ended = false;
  json verdict = nullptr;
};

namespace {

json critique_json(const CritiqueEntry& c) {
  return {{"author", std::string(to_string(c.author))},
          {"target", std::string(to_string(c.target))},
          {"text", c.text},
          {"reason", c.rationale}};
}

json strategy_ids(const DialogSession& s) {
  json out = json::object();
  for (const auto& [type, strategy] : s.context().strategies) out[std::string(to_string(type))] = strategy.id;
  return out;
}

json analytics_json(const BankAnalytics& a) {
  json gen = json::object();
  for (const auto& [type, g] : a.avg_generation) gen[std::string(to_string(type))] = g;
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  return {{"entropy_bits", opt(a.entropy_bits)},
          {"mean_pairwise_similarity", opt(a.mean_pairwise_similarity)},
          {"mean_alive_fitness", opt(a.mean_alive_fitness)},
          {"avg_generation", gen},
          {"alive", a.alive},
          {"total", a.total}};
}

}  // namespace

ServiceCore::ServiceCore(Engine& engine) : engine_(engine) {
  engine_.set_epoch_listener([this](const EvolutionReport& report, const StrategyBank& bank) {
    json row = analytics_json(bank_stats(bank, engine_.embedder(), engine_.config().fitness));
    row["epoch"] = report.epoch_index;
    std::lock_guard lock(mu_);
    history_.push_back(std::move(row));
  });
}

ServiceCore::~ServiceCore() { engine_.set_epoch_listener({}); }

std::shared_ptr<ServiceCore::Session> ServiceCore::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return it->second;
}

json ServiceCore::create_session(const json& body) {
  if (!body.is_object()) throw ValidationError("body", "expected a JSON object");
  std::optional<UserGoal> goal;
  DomainSet domains;
  if (body.contains("goal") && !body["goal"].is_null()) {
    try {
      goal = goal_from_json(body["goal"], "session");
    } catch (const ParseError& e) {
      throw ValidationError("goal", e.what());
    }
    domains = goal->domain_set();
  }
  if (body.contains("domains")) {
    if (!body["domains"].is_array()) throw ValidationError("domains", "'domains' must be an array of names");
    for (const auto& d : body["domains"]) {
      if (!d.is_string()) throw ValidationError("domains", "'domains' must be an array of names");
      domains.insert(d.get<std::string>());
    }
  }
  if (domains.empty()) throw ValidationError("domains", "a session needs domains or a goal");
  for (const auto& d : domains) {
    if (!engine_.world().schema.has_domain(d)) throw ValidationError("domains", "unknown domain '" + d + "'");
  }
  std::string id;
  {
    std::lock_guard lock(mu_);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sess-%06llu", static_cast<unsigned long long>(next_id_++));
    id = buf;
  }
  auto strategies = engine_.strategies_for(domains, id);
  auto session = std::make_shared<Session>();
  session->id = id;
  session->dialog = std::make_unique<DialogSession>(engine_.pipeline(), id, domains, goal, std::move(strategies),
                                                    engine_.config().flags, engine_.config().max_turns,
                                                    TrajectorySource::kLiveChat);
  json out = {{"session_id", id},
              {"status", "open"},
              {"domains", std::vector<std::string>(domains.begin(), domains.end())},
              {"strategies", strategy_ids(*session->dialog)}};
  std::lock_guard lock(mu_);
  sessions_[id] = std::move(session);
  return out;
}

json ServiceCore::handle_turn(const std::string& session_id, const std::string& utterance) {
  auto session = find(session_id);
  std::unique_lock turn(session->turn_mu, std::try_to_lock);
  if (!turn.owns_lock()) throw ConflictError("session " + session_id + " already has a turn in flight");
  if (session->ended) throw LifecycleError("session " + session_id + " has ended");
  DialogSession& dialog = *session->dialog;

  if (utterance == "/end") {
    session->ended = true;
    if (dialog.context().history.empty()) {
      session->verdict = {{"session_id", session_id}, {"status", "ended"}, {"outcome", nullptr},
                          {"success", false}, {"record_id", nullptr}};
      return session->verdict;
    }
    const Trajectory t = engine_.finish_session(dialog);
    session->verdict = {{"session_id", session_id},
                        {"status", "ended"},
                        {"outcome", std::string(to_string(t.outcome))},
                        {"success", t.outcome == Outcome::kSuccess},
                        {"record_id", t.record_id},
                        {"turns", t.turns.size()},
                        {"epochs", engine_.epochs().size()}};
    return session->verdict;
  }
  if (utterance.empty()) throw ValidationError("utterance", "utterance is empty");
  if (!dialog.can_continue()) {
    throw LifecycleError("session " + session_id + " cannot take more turns; send /end");
  }
  TurnRecord rec;
  {
    std::shared_lock gate(engine_.bank_gate());
    rec = dialog.step(utterance);
  }
  engine_.after_turn(dialog);
  json critiques = json::array();
  for (const auto& c : rec.critiques) critiques.push_back(critique_json(c));
  return {{"session_id", session_id},
          {"status", "open"},
          {"turn_index", dialog.context().turn_index},
          {"system_response", rec.system_response},
          {"belief_state", rec.belief_state},
          {"system_action", rec.system_action},
          {"critiques", critiques},
          {"db_result_count", rec.db_result_count ? json(*rec.db_result_count) : json(nullptr)},
          {"system_failure", rec.system_failure ? json(*rec.system_failure) : json(nullptr)},
          {"strategies", strategy_ids(dialog)},
          {"can_continue", dialog.can_continue()}};
}

json ServiceCore::get_session(const std::string& session_id) const {
  auto session = find(session_id);
  std::lock_guard turn(session->turn_mu);
  json turns = json::array();
  for (const auto& t : session->dialog->context().history) {
    json critiques = json::array();
    for (const auto& c : t.critiques) critiques.push_back(critique_json(c));
    turns.push_back({{"user_utterance", t.user_utterance},
                     {"system_response", t.system_response},
                     {"system_action", t.system_action},
                     {"belief_state", t.belief_state},
                     {"critiques", critiques}});
  }
  return {{"session_id", session_id},
          {"status", session->ended ? "ended" : "open"},
          {"turns", turns},
          {"strategies", strategy_ids(*session->dialog)},
          {"verdict", session->verdict}};
}

json ServiceCore::delete_session(const std::string& session_id) {
  auto session = find(session_id);
  std::unique_lock turn(session->turn_mu, std::try_to_lock);
  if (!turn.owns_lock()) throw ConflictError("session " + session_id + " already has a turn in flight");
  std::lock_guard lock(mu_);
  sessions_.erase(session_id);
  return {{"session_id", session_id}, {"status", "deleted"}};
}

json ServiceCore::bank_view(const BankFilter& filter) const {
  std::shared_lock gate(engine_.bank_gate());
  const StrategyBank& bank = engine_.bank();
  json rows = json::array();
  for (const auto& s : bank.strategies()) {
    if (!s.alive && !filter.include_dead) continue;
    if (filter.agent_type && s.agent_type != *filter.agent_type) continue;
    if (filter.domain && s.domains.count(*filter.domain) == 0) continue;
    rows.push_back({{"id", s.id},
                    {"agent_type", std::string(to_string(s.agent_type))},
                    {"domains", std::vector<std::string>(s.domains.begin(), s.domains.end())},
                    {"content", s.content},
                    {"reason", s.rationale},
                    {"fitness", bank.fitness(s.id, engine_.config().fitness)},
                    {"h_plus", s.meta.positive_feedback},
                    {"h_minus", s.meta.negative_feedback},
                    {"n_used", s.meta.usage_count},
                    {"generation", s.meta.generation_index},
                    {"alive", s.alive},
                    {"parents", s.parents}});
  }
  return {{"strategies", rows}, {"count", rows.size()}};
}

json ServiceCore::analytics() const {
  json out = analytics_json(engine_.analytics());
  out["dialogs"] = engine_.dialogs_done();
  out["ssm_size"] = engine_.memory().size();
  out["epochs"] = engine_.epochs().size();
  std::lock_guard lock(mu_);
  out["history"] = history_;
  return out;
}

json ServiceCore::trigger_evolution() { return report_to_json(engine_.evolve_now()); }

json ServiceCore::epochs() const {
  json out = json::array();
  for (const auto& r : engine_.epochs()) out.push_back(report_to_json(r));
  return {{"epochs", out}};
}

// HTTP ---------------------------------------------------------------------------

HttpService::HttpService(ServiceCore& core, std::string token)
    : core_(core), token_(std::move(token)), server_(std::make_unique<httplib::Server>()) {
  routes();
}

HttpService::~HttpService() { stop(); }

void HttpService::routes() {
  auto& srv = *server_;
  auto send = [](httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  };
  // Wraps a handler with auth and error mapping.
  auto wrap = [this, send](std::function<json(const httplib::Request&)> fn, int ok_status = 200) {
    return [this, send, fn, ok_status](const httplib::Request& req, httplib::Response& res) {
      if (!token_.empty() && req.get_header_value("Authorization") != "Bearer " + token_) {
        send(res, 401, {{"error", "missing or invalid bearer token"}, {"type", "unauthorized"}});
        return;
      }
      try {
        send(res, ok_status, fn(req));
      } catch (const NotFoundError& e) {
        send(res, 404, {{"error", e.what()}, {"type", "not_found"}});
      } catch (const ConflictError& e) {
        send(res, 409, {{"error", e.what()}, {"type", "conflict"}});
      } catch (const LifecycleError& e) {
        send(res, 410, {{"error", e.what()}, {"type", "ended"}});
      } catch (const ValidationError& e) {
        send(res, 400, {{"error", e.what()}, {"type", "validation"}, {"field", e.field()}});
      } catch (const ParseError& e) {
        send(res, 400, {{"error", e.what()}, {"type", "parse"}});
      } catch (const json::exception& e) {
        send(res, 400, {{"error", e.what()}, {"type", "parse"}});
      } catch (const std::exception& e) {
        send(res, 500, {{"error", e.what()}, {"type", "internal"}});
      }
    };
  };
  auto body_of = [](const httplib::Request& req) { return req.body.empty() ? json::object() : json::parse(req.body); };

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Authorization, Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Post("/sessions", wrap([this, body_of](const httplib::Request& req) {
             return core_.create_session(body_of(req));
           }, 201));
  srv.Post(R"(/sessions/([^/]+)/turns)", wrap([this, body_of](const httplib::Request& req) {
             const json body = body_of(req);
             std::string utterance;
             if (body.contains("utterance") && body["utterance"].is_string()) {
               utterance = body["utterance"].get<std::string>();
             } else {
               throw ValidationError("utterance", "body needs a string 'utterance'");
             }
             return core_.handle_turn(req.matches[1], utterance);
           }));
  srv.Get(R"(/sessions/([^/]+))", wrap([this](const httplib::Request& req) { return core_.get_session(req.matches[1]); }));
  srv.Delete(R"(/sessions/([^/]+))",
             wrap([this](const httplib::Request& req) { return core_.delete_session(req.matches[1]); }));
  srv.Get("/bank", wrap([this](const httplib::Request& req) {
            BankFilter f;
            if (req.has_param("agent_type")) {
              try {
                f.agent_type = agent_type_from_string(req.get_param_value("agent_type"));
              } catch (const Error& e) {
                throw ValidationError("agent_type", e.what());
              }
            }
            if (req.has_param("domain")) f.domain = req.get_param_value("domain");
            if (req.has_param("include_dead")) f.include_dead = req.get_param_value("include_dead") == "true";
            return core_.bank_view(f);
          }));
  srv.Get("/analytics", wrap([this](const httplib::Request&) { return core_.analytics(); }));
  srv.Post("/evolve", wrap([this](const httplib::Request&) { return core_.trigger_evolution(); }));
  srv.Get("/epochs", wrap([this](const httplib::Request&) { return core_.epochs(); }));
}

int HttpService::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) throw TransportError("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void HttpService::listen(const std::string& host, int port) {
  if (!server_->listen(host, port)) throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpService::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::pair<std::string, int> bind_address_from_env() {
  const char* env = std::getenv("EVOTOD_BIND");
  std::string bind = env != nullptr && *env != '\0' ? env : "127.0.0.1:8080";
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw ValidationError("EVOTOD_BIND", "expected host:port, got '" + bind + "'");
  int port = 0;
  try {
    port = std::stoi(bind.substr(colon + 1));
  } catch (const std::exception&) {
    throw ValidationError("EVOTOD_BIND", "bad port in '" + bind + "'");
  }
  if (port < 0 || port > 65535) throw ValidationError("EVOTOD_BIND", "port out of range in '" + bind + "'");
  return {bind.substr(0, colon), port};
}

}  // namespace evotod
