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

#include "mbsc/bridge.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <chrono>
#include <cmath>
#include <condition_variable>
#include <deque>
#include <fstream>
#include <filesystem>

#include <json.hpp>

namespace mbsc {

using ojson = nlohmann::ordered_json;

std::string_view to_string(SessionPhase phase) {
  switch (phase) {
    case SessionPhase::kIdle: return "Idle";
    case SessionPhase::kRunning: return "Running";
    case SessionPhase::kTerminal: return "Terminal";
  }
  return "Idle";
}

namespace {

ojson state_json(const LanderState& s) {
  return {{"x", s.x}, {"y", s.y}, {"theta", s.theta}, {"vx", s.vx}, {"vy", s.vy}, {"omega", s.omega}};
}

ojson control_json(const ControlInput& u) { return ojson::array({u.u1, u.u2}); }

std::string dump(const ojson& j) { return j.dump(); }

}  // namespace

BridgeSession::BridgeSession(std::shared_ptr<const BridgeResources> resources, int session_number)
    : res_(std::move(resources)), number_(session_number), id_("s" + std::to_string(session_number)) {
  if (!res_) throw Error(ErrorCode::kInvalidArgument, "bridge session needs resources");
  last_state_ = LanderState{res_->config.sim.start_x, res_->config.sim.start_y, 0, 0, 0, 0};
}

std::string BridgeSession::error_frame(std::string_view code, std::string_view message) const {
  return dump({{"type", "error"}, {"v", kProtocolVersion}, {"code", code}, {"message", message}});
}

std::string BridgeSession::state_frame(const StepRecord* step) const {
  ojson j;
  j["type"] = "frame";
  j["v"] = kProtocolVersion;
  j["session"] = id_;
  j["seq"] = seq_;
  j["phase"] = std::string(to_string(phase_));
  j["condition"] = std::string(to_string(condition_));
  j["model_id"] = model_id_;
  j["trial"] = trial_index_;
  if (step) {
    j["t"] = step->time;
    j["state"] = state_json(step->state);
    j["u_h"] = control_json(step->u_h);
    j["clamped"] = input_clamped_;
    j["u_a"] = control_json(step->u_a);
    j["u_out"] = control_json(step->u_out);
    j["admitted"] = step->admitted;
    j["agree"] = ojson::array({step->agree_main, step->agree_side});
  } else {
    j["t"] = runner_ ? runner_->time() : 0.0;
    j["state"] = state_json(last_state_);
    j["u_h"] = control_json(input_);
    j["clamped"] = input_clamped_;
    j["u_a"] = control_json({});
    j["u_out"] = control_json({});
    j["admitted"] = false;
    j["agree"] = ojson::array({true, true});
  }
  j["status"] = std::string(to_string(
      step && step->terminal ? runner_->record().outcome : TrialStatus::kRunning));
  return dump(j);
}

std::string BridgeSession::terminal_frame(const TrialRecord& record) const {
  return dump({{"type", "terminal"},
               {"v", kProtocolVersion},
               {"session", id_},
               {"trial", record.trial},
               {"condition", std::string(to_string(record.condition))},
               {"outcome", std::string(to_string(record.outcome))},
               {"duration", record.duration},
               {"steps", record.steps.size()},
               {"fault", record.fault}});
}

void BridgeSession::start_trial(Condition condition) {
  const StudyConfig& cfg = res_->config;
  const ModelSet& m = res_->models;
  std::shared_ptr<const KoopmanModel> model;
  switch (condition) {
    case Condition::kUserOnly:
      model_id_ = "none";
      break;
    case Condition::kIndividual:
      if (!m.individual.empty()) model = m.individual.front();
      model_id_ = "individual-0";
      break;
    case Condition::kGeneral:
      model = m.general;
      model_id_ = "general";
      break;
    case Condition::kExpert:
      model = m.expert;
      model_id_ = "expert";
      break;
    case Condition::kOnline:
      if (!learner_)
        learner_.emplace(KoopmanModel::random_init(
            cfg.basis, cfg.epsilon,
            derive_seed(cfg.seed, SeedStream::kOnlineInit, 10000 + static_cast<std::uint64_t>(number_))));
      model = learner_->snapshot();
      model_id_ = "online-" + id_;
      break;
  }
  if (is_shared(condition) && !model)
    throw Error(ErrorCode::kModel, "no model available for " + std::string(to_string(condition)));
  controller_.reset();
  if (model) controller_.emplace(make_controller(model, cfg));

  TrialSetup setup;
  setup.condition = condition;
  setup.subject = 10000 + number_;
  setup.trial = trial_index_;
  setup.seed = derive_seed(cfg.seed, SeedStream::kEvaluation, static_cast<std::uint64_t>(setup.subject),
                           static_cast<std::uint64_t>(trial_index_));
  setup.model_id = model_id_;
  setup.pilot_label = "human";
  runner_.emplace(setup, cfg.sim, controller_ ? &*controller_ : nullptr, cfg.filter,
                  condition == Condition::kOnline ? &*learner_ : nullptr);
  condition_ = condition;
  last_state_ = runner_->state();
  phase_ = SessionPhase::kRunning;
}

void BridgeSession::finish_trial() {
  const TrialRecord& rec = runner_->record();
  completed_.push_back(rec);
  if (!res_->log_dir.empty()) {
    std::filesystem::create_directories(res_->log_dir);
    std::ofstream out(std::filesystem::path(res_->log_dir) / ("session-" + id_ + ".ndjson"),
                      std::ios::app | std::ios::binary);
    write_trial(out, rec);
  }
  last_state_ = runner_->state();
  phase_ = SessionPhase::kTerminal;
  ++trial_index_;
}

std::vector<std::string> BridgeSession::handle(std::string_view message) {
  ojson msg;
  try {
    msg = ojson::parse(message);
  } catch (const nlohmann::json::exception&) {
    return {error_frame("malformed", "message is not valid JSON")};
  }
  if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
    return {error_frame("malformed", "message needs a string \"type\"")};
  const std::string type = msg["type"].get<std::string>();

  if (type == "hello") {
    std::vector<int> offered;
    if (msg.contains("versions") && msg["versions"].is_array()) {
      for (const auto& v : msg["versions"])
        if (v.is_number_integer()) offered.push_back(v.get<int>());
    } else if (msg.contains("version") && msg["version"].is_number_integer()) {
      offered.push_back(msg["version"].get<int>());
    } else {
      return {error_frame("malformed", "hello needs \"versions\" or \"version\"")};
    }
    int chosen = 0;
    for (int v : offered)
      if (v <= kProtocolVersion && v > chosen) chosen = v;
    if (chosen == 0)
      return {error_frame("unsupported_version",
                          "server speaks version " + std::to_string(kProtocolVersion))};
    version_ = chosen;
    ojson conds = ojson::array();
    for (Condition c : {Condition::kUserOnly, Condition::kIndividual, Condition::kGeneral,
                        Condition::kExpert, Condition::kOnline})
      conds.push_back(std::string(to_string(c)));
    return {dump({{"type", "welcome"},
                  {"v", kProtocolVersion},
                  {"version", version_},
                  {"session", id_},
                  {"tick_ms", static_cast<int>(std::lround(res_->config.sim.dt_log * 1000))},
                  {"conditions", conds},
                  {"condition", std::string(to_string(condition_))},
                  {"filter", std::string(to_string(res_->config.filter))}})};
  }
  if (!greeted()) return {error_frame("hello_required", "send hello first")};

  auto condition_arg = [&](Condition fallback) -> std::optional<Condition> {
    if (!msg.contains("condition")) return fallback;
    if (!msg["condition"].is_string()) return std::nullopt;
    try {
      return condition_from_string(msg["condition"].get<std::string>());
    } catch (const Error&) {
      return std::nullopt;
    }
  };
  auto ack = [&](const std::string& what) {
    return dump({{"type", "ack"}, {"v", kProtocolVersion}, {"for", what},
                 {"condition", std::string(to_string(condition_))}, {"trial", trial_index_}});
  };

  if (type == "input") {
    if (!msg.contains("u1") || !msg.contains("u2") || !msg["u1"].is_number() ||
        !msg["u2"].is_number())
      return {error_frame("malformed", "input needs numeric u1 and u2")};
    const ControlInput raw{msg["u1"].get<double>(), msg["u2"].get<double>()};
    if (!raw.finite()) return {error_frame("malformed", "input must be finite")};
    bool clamped = false;
    input_ = saturate(raw, &clamped);
    input_clamped_ = clamped;
    return {};
  }
  if (type == "start_trial") {
    if (phase_ == SessionPhase::kRunning) return {error_frame("trial_running", "a trial is already running")};
    const auto cond = condition_arg(condition_);
    if (!cond) return {error_frame("malformed", "unknown condition")};
    phase_ = SessionPhase::kIdle;
    try {
      start_trial(*cond);
    } catch (const Error& e) {
      return {error_frame("model_unavailable", e.what())};
    }
    return {ack(type)};
  }
  if (type == "abort") {
    if (phase_ != SessionPhase::kRunning) return {error_frame("no_trial", "no trial is running")};
    runner_->abort("aborted by operator");
    finish_trial();
    return {ack(type), terminal_frame(completed_.back())};
  }
  if (type == "switch_condition") {
    if (phase_ == SessionPhase::kRunning)
      return {error_frame("trial_running", "conditions switch between trials only")};
    if (!msg.contains("condition")) return {error_frame("malformed", "switch_condition needs a condition")};
    const auto cond = condition_arg(condition_);
    if (!cond) return {error_frame("malformed", "unknown condition")};
    condition_ = *cond;
    return {ack(type)};
  }
  return {error_frame("unknown_type", "unknown message type '" + type + "'")};
}

std::vector<std::string> BridgeSession::tick() {
  if (!greeted()) return {};
  std::vector<std::string> out;
  if (phase_ == SessionPhase::kTerminal) phase_ = SessionPhase::kIdle;
  if (phase_ == SessionPhase::kRunning) {
    if (runner_->finish_if_terminal()) {
      const StepRecord last = runner_->record().steps.back();
      out.push_back(state_frame(&last));
      finish_trial();
      out.push_back(terminal_frame(completed_.back()));
    } else {
      const StepRecord st = runner_->advance(input_);
      last_state_ = runner_->state();
      out.push_back(state_frame(&st));
      if (runner_->done()) {
        finish_trial();
        out.push_back(terminal_frame(completed_.back()));
      }
    }
  } else {
    out.push_back(state_frame(nullptr));
  }
  ++seq_;
  return out;
}

void BridgeSession::disconnect() {
  if (phase_ != SessionPhase::kRunning) return;
  runner_->abort("connection lost");
  finish_trial();
}

std::string websocket_accept_key(std::string_view client_key) {
  static constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
  const std::string input = std::string(client_key) + std::string(kGuid);
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(input.data()), input.size(), digest);
  unsigned char encoded[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(encoded, digest, SHA_DIGEST_LENGTH);
  return std::string(reinterpret_cast<const char*>(encoded), static_cast<std::size_t>(n));
}

// ---------------------------------------------------------------------------
// Transport

namespace {

constexpr std::size_t kMaxMessage = 1 << 20;

bool send_all(int fd, const std::string& data) {
  std::size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n <= 0) return false;
    off += static_cast<std::size_t>(n);
  }
  return true;
}

class Transport {
 public:
  virtual ~Transport() = default;
  // Blocks for the next inbound text message; false on close or error.
  virtual bool read(std::string& message) = 0;
  virtual bool write(const std::string& message) = 0;
  // Control replies the reader asked for (WebSocket pong/close).
  virtual bool flush_control() { return true; }
};

class LineTransport : public Transport {
 public:
  LineTransport(int fd, std::string initial) : fd_(fd), buffer_(std::move(initial)) {}

  bool read(std::string& message) override {
    while (true) {
      const auto nl = buffer_.find('\n');
      if (nl != std::string::npos) {
        message = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        if (!message.empty() && message.back() == '\r') message.pop_back();
        if (message.empty()) continue;
        return true;
      }
      if (buffer_.size() > kMaxMessage) return false;
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

  bool write(const std::string& message) override { return send_all(fd_, message + "\n"); }

 private:
  int fd_;
  std::string buffer_;
};

class WebSocketTransport : public Transport {
 public:
  WebSocketTransport(int fd, std::string leftover) : fd_(fd), buffer_(std::move(leftover)) {}

  bool read(std::string& message) override {
    std::string assembled;
    while (true) {
      std::uint8_t opcode = 0;
      bool fin = false;
      std::string payload;
      if (!read_frame(opcode, fin, payload)) return false;
      if (opcode == 0x8) {
        queue_control(0x8, payload.substr(0, 2));
        return false;
      }
      if (opcode == 0x9) {
        queue_control(0xA, payload);
        continue;
      }
      if (opcode == 0xA) continue;
      assembled += payload;
      if (assembled.size() > kMaxMessage) return false;
      if (fin) {
        message = std::move(assembled);
        return true;
      }
    }
  }

  bool write(const std::string& message) override {
    return flush_control() && send_all(fd_, encode(0x1, message));
  }

  bool flush_control() override {
    std::deque<std::string> pending;
    {
      std::lock_guard<std::mutex> lock(control_mutex_);
      pending.swap(control_);
    }
    for (const auto& frame : pending)
      if (!send_all(fd_, frame)) return false;
    return true;
  }

 private:
  static std::string encode(std::uint8_t opcode, const std::string& payload) {
    std::string out;
    out.push_back(static_cast<char>(0x80 | opcode));
    const std::size_t n = payload.size();
    if (n < 126) {
      out.push_back(static_cast<char>(n));
    } else if (n < 65536) {
      out.push_back(126);
      out.push_back(static_cast<char>((n >> 8) & 0xff));
      out.push_back(static_cast<char>(n & 0xff));
    } else {
      out.push_back(127);
      for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xff));
    }
    return out + payload;
  }

  void queue_control(std::uint8_t opcode, const std::string& payload) {
    std::lock_guard<std::mutex> lock(control_mutex_);
    control_.push_back(encode(opcode, payload));
  }

  bool fill(std::size_t n) {
    while (buffer_.size() < n) {
      char chunk[4096];
      const ssize_t got = ::recv(fd_, chunk, sizeof chunk, 0);
      if (got <= 0) return false;
      buffer_.append(chunk, static_cast<std::size_t>(got));
    }
    return true;
  }

  bool read_frame(std::uint8_t& opcode, bool& fin, std::string& payload) {
    if (!fill(2)) return false;
    const auto b0 = static_cast<std::uint8_t>(buffer_[0]);
    const auto b1 = static_cast<std::uint8_t>(buffer_[1]);
    fin = b0 & 0x80;
    opcode = b0 & 0x0f;
    const bool masked = b1 & 0x80;
    std::uint64_t len = b1 & 0x7f;
    std::size_t header = 2;
    if (len == 126) {
      if (!fill(4)) return false;
      len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buffer_[2])) << 8) |
            static_cast<std::uint8_t>(buffer_[3]);
      header = 4;
    } else if (len == 127) {
      if (!fill(10)) return false;
      len = 0;
      for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<std::uint8_t>(buffer_[2 + i]);
      header = 10;
    }
    if (len > kMaxMessage) return false;
    const std::size_t mask_at = header;
    if (masked) header += 4;
    if (!fill(header + len)) return false;
    payload = buffer_.substr(header, len);
    if (masked)
      for (std::size_t i = 0; i < payload.size(); ++i) payload[i] ^= buffer_[mask_at + (i % 4)];
    buffer_.erase(0, header + len);
    return true;
  }

  int fd_;
  std::string buffer_;
  std::mutex control_mutex_;
  std::deque<std::string> control_;
};

std::string header_value(const std::string& request, std::string_view name) {
  std::size_t pos = 0;
  while (pos < request.size()) {
    const auto end = request.find("\r\n", pos);
    const std::string line = request.substr(pos, end == std::string::npos ? std::string::npos : end - pos);
    const auto colon = line.find(':');
    if (colon != std::string::npos && colon == name.size()) {
      bool same = true;
      for (std::size_t i = 0; i < name.size(); ++i)
        same &= std::tolower(static_cast<unsigned char>(line[i])) ==
                std::tolower(static_cast<unsigned char>(name[i]));
      if (same) {
        auto v = line.substr(colon + 1);
        const auto b = v.find_first_not_of(' ');
        return b == std::string::npos ? std::string{} : v.substr(b);
      }
    }
    if (end == std::string::npos) break;
    pos = end + 2;
  }
  return {};
}

// Decides the framing from the first bytes and completes a WebSocket
// handshake when asked for one.
std::unique_ptr<Transport> open_transport(int fd) {
  std::string buffer;
  while (buffer.size() < 4) {
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return nullptr;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
  if (buffer.compare(0, 4, "GET ") != 0) {
    return std::make_unique<LineTransport>(fd, std::move(buffer));
  }
  while (buffer.find("\r\n\r\n") == std::string::npos) {
    if (buffer.size() > 16384) return nullptr;
    char chunk[4096];
    const ssize_t n = ::recv(fd, chunk, sizeof chunk, 0);
    if (n <= 0) return nullptr;
    buffer.append(chunk, static_cast<std::size_t>(n));
  }
  const auto end = buffer.find("\r\n\r\n") + 4;
  const std::string request = buffer.substr(0, end);
  const std::string key = header_value(request, "Sec-WebSocket-Key");
  if (key.empty()) {
    send_all(fd, "HTTP/1.1 400 Bad Request\r\nContent-Length: 0\r\nConnection: close\r\n\r\n");
    return nullptr;
  }
  const std::string response =
      "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
      "Sec-WebSocket-Accept: " + websocket_accept_key(key) + "\r\n\r\n";
  if (!send_all(fd, response)) return nullptr;
  return std::make_unique<WebSocketTransport>(fd, buffer.substr(end));
}

}  // namespace

// ---------------------------------------------------------------------------
// Server

BridgeServer::BridgeServer(std::shared_ptr<const BridgeResources> resources, BridgeOptions options)
    : res_(std::move(resources)), options_(std::move(options)) {
  if (!res_) throw Error(ErrorCode::kInvalidArgument, "bridge server needs resources");
  if (options_.tick_ms < 1) throw Error(ErrorCode::kConfig, "tick_ms must be >= 1");
}

BridgeServer::~BridgeServer() { stop(); }

int BridgeServer::start() {
  if (running_) throw Error(ErrorCode::kRuntime, "bridge server already running");
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::kIo, "socket() failed");
  int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(options_.port));
  if (::inet_pton(AF_INET, options_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::kConfig, "invalid listen address " + options_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 ||
      ::listen(listen_fd_, 8) != 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::kIo, "cannot listen on " + options_.host + ":" +
                                    std::to_string(options_.port));
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return ntohs(addr.sin_port);
}

void BridgeServer::stop() {
  if (!running_.exchange(false)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  ::close(listen_fd_);
  if (acceptor_.joinable()) acceptor_.join();
  std::vector<std::thread> workers;
  {
    std::lock_guard<std::mutex> lock(mutex_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers)
    if (w.joinable()) w.join();
  listen_fd_ = -1;
}

void BridgeServer::accept_loop() {
  while (running_) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (!running_) break;
      continue;
    }
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard<std::mutex> lock(mutex_);
    if (!running_) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    const int number = ++sessions_;
    workers_.emplace_back([this, fd, number] { serve_connection(fd, number); });
  }
}

void BridgeServer::serve_connection(int fd, int session_number) {
  auto transport = open_transport(fd);
  if (transport) {
    BridgeSession session(res_, session_number);

    // The reader only enqueues; the loop below owns the session.
    std::mutex qmutex;
    std::deque<std::string> inbox;
    bool closed = false;
    std::thread reader([&] {
      std::string message;
      while (transport->read(message)) {
        std::lock_guard<std::mutex> lock(qmutex);
        inbox.push_back(std::move(message));
      }
      std::lock_guard<std::mutex> lock(qmutex);
      closed = true;
    });

    const auto period = std::chrono::milliseconds(options_.tick_ms);
    auto next = std::chrono::steady_clock::now();
    bool alive = true;
    while (alive && running_) {
      next += period;
      std::this_thread::sleep_until(next);
      std::deque<std::string> batch;
      bool gone = false;
      {
        std::lock_guard<std::mutex> lock(qmutex);
        batch.swap(inbox);
        gone = closed;
      }
      for (const auto& message : batch) {
        for (const auto& frame : session.handle(message))
          if (!transport->write(frame)) alive = false;
      }
      if (gone) {
        transport->flush_control();  // echoes a WebSocket close
        break;
      }
      if (!transport->flush_control()) alive = false;
      for (const auto& frame : session.tick())
        if (!transport->write(frame)) alive = false;
    }
    session.disconnect();
    ::shutdown(fd, SHUT_RDWR);
    reader.join();
  }
  ::shutdown(fd, SHUT_RDWR);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    std::erase(client_fds_, fd);
  }
  ::close(fd);
}

}  // namespace mbsc
