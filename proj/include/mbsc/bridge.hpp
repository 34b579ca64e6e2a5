// Copyright 2026 The MbSC Authors
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

// Live session endpoint. A session runs the simulator and shared-control
// loop at a fixed tick, streams one state frame per tick and applies the
// latest human input (zero-order hold). The wire protocol is documented in
// docs/protocol.md.

#ifndef MBSC_BRIDGE_HPP
#define MBSC_BRIDGE_HPP

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mbsc/harness.hpp"

namespace mbsc {

inline constexpr int kProtocolVersion = 1;

enum class SessionPhase { kIdle, kRunning, kTerminal };
std::string_view to_string(SessionPhase phase);

// Shared, read-only resources for every session of one server.
struct BridgeResources {
  StudyConfig config;
  ModelSet models;
  std::string log_dir;  // empty: trials are kept in memory only
};

// Protocol state machine for one connection, independent of any socket.
// handle() consumes one inbound text frame; tick() advances the loop. Both
// return the outbound frames in send order.
class BridgeSession {
 public:
  BridgeSession(std::shared_ptr<const BridgeResources> resources, int session_number);

  std::vector<std::string> handle(std::string_view message);
  std::vector<std::string> tick();
  // Connection lost: aborts and logs a running trial.
  void disconnect();

  const std::string& id() const { return id_; }
  SessionPhase phase() const { return phase_; }
  bool greeted() const { return version_ > 0; }
  Condition condition() const { return condition_; }
  const std::vector<TrialRecord>& completed() const { return completed_; }
  const ControlInput& held_input() const { return input_; }

 private:
  std::string error_frame(std::string_view code, std::string_view message) const;
  std::string state_frame(const StepRecord* step) const;
  std::string terminal_frame(const TrialRecord& record) const;
  void finish_trial();
  void start_trial(Condition condition);

  std::shared_ptr<const BridgeResources> res_;
  int number_;
  std::string id_;
  int version_ = 0;
  SessionPhase phase_ = SessionPhase::kIdle;
  Condition condition_ = Condition::kUserOnly;
  ControlInput input_;
  bool input_clamped_ = false;
  int trial_index_ = 0;
  std::uint64_t seq_ = 0;
  std::optional<AutonomyController> controller_;
  std::optional<OnlineLearner> learner_;
  std::optional<TrialRunner> runner_;
  std::string model_id_ = "none";
  LanderState last_state_;
  std::vector<TrialRecord> completed_;
};

struct BridgeOptions {
  std::string host = "127.0.0.1";
  int port = 8765;  // 0 picks a free port
  int tick_ms = 100;
};

// TCP endpoint. Each connection is either newline-delimited JSON or, when it
// opens with an HTTP upgrade request, WebSocket text frames carrying the same
// JSON messages.
class BridgeServer {
 public:
  BridgeServer(std::shared_ptr<const BridgeResources> resources, BridgeOptions options);
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  // Binds and starts accepting; returns the bound port. Error(kIo) on failure.
  int start();
  // Closes the listener and every connection, then joins all threads.
  void stop();
  bool running() const { return running_; }

 private:
  void accept_loop();
  void serve_connection(int fd, int session_number);

  std::shared_ptr<const BridgeResources> res_;
  BridgeOptions options_;
  int listen_fd_ = -1;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mutex_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
  int sessions_ = 0;
};

// Sec-WebSocket-Accept value for a client key.
std::string websocket_accept_key(std::string_view client_key);

}  // namespace mbsc

#endif  // MBSC_BRIDGE_HPP
