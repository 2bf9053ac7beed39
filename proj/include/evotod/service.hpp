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

// Live-operation facade: chat sessions, bank view, analytics and evolution
// triggering. ServiceCore holds the logic; HttpService maps it onto routes.

#ifndef EVOTOD_SERVICE_HPP_
#define EVOTOD_SERVICE_HPP_

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "evotod/engine.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace evotod {

struct BankFilter {
  std::optional<AgentType> agent_type;
  std::optional<std::string> domain;  // strategies whose domain set contains it
  bool include_dead = false;
};

class ServiceCore {
 public:
  explicit ServiceCore(Engine& engine);
  ~ServiceCore();

  // Body: {"domains": [...]} and/or {"goal": {...}}.
  nlohmann::json create_session(const nlohmann::json& body);
  // "/end" closes, scores and records the session. Throws NotFoundError,
  // ConflictError (turn in flight) or LifecycleError (session ended).
  nlohmann::json handle_turn(const std::string& session_id, const std::string& utterance);
  nlohmann::json get_session(const std::string& session_id) const;
  // Discards an open session without recording it.
  nlohmann::json delete_session(const std::string& session_id);

  nlohmann::json bank_view(const BankFilter& filter = {}) const;
  nlohmann::json analytics() const;
  // Throws ConflictError while another epoch runs.
  nlohmann::json trigger_evolution();
  nlohmann::json epochs() const;

  Engine& engine() { return engine_; }

 private:
  struct Session;
  std::shared_ptr<Session> find(const std::string& id) const;

  Engine& engine_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  std::vector<nlohmann::json> history_;  // analytics after each epoch
};

// HTTP transport. Requests need "Authorization: Bearer <token>" when
// `token` is non-empty.
class HttpService {
 public:
  HttpService(ServiceCore& core, std::string token = {});
  ~HttpService();

  // Binds and serves on a background thread; returns the bound port
  // (`port` 0 picks a free one). Throws TransportError when binding fails.
  int start(const std::string& host, int port);
  // Serves on the calling thread until stop().
  void listen(const std::string& host, int port);
  void stop();

 private:
  void routes();

  ServiceCore& core_;
  std::string token_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

// "host:port" from EVOTOD_BIND, defaulting to 127.0.0.1:8080.
std::pair<std::string, int> bind_address_from_env();

}  // namespace evotod

#endif  // EVOTOD_SERVICE_HPP_
