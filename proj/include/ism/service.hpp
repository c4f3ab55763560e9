// Copyright 2026 The ISM Authors
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

#pragma once

// HTTP + WebSocket front end for simulations. One thread per connection;
// every session serializes its mutations behind a mutex and publishes an
// immutable snapshot after each one, so readers never block on a solve and
// never see a half-applied change.
//
// Routes (all bodies JSON):
//   GET    /version
//   GET    /sessions
//   POST   /sessions                      {"id"?, "scenario"}
//   GET    /sessions/{id}
//   GET    /sessions/{id}/state
//   POST   /sessions/{id}/advance         {"ticks"}
//   POST   /sessions/{id}/suggestion      {"actions", "solver"?}
//   POST   /sessions/{id}/solve-dry-run   {"actions", "solver"?}
//   DELETE /sessions/{id}
//   GET    /sessions/{id}/events?after=N  (polling fallback)
//   GET    /sessions/{id}/stream?after=N  (WebSocket upgrade)

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ism/bbism.hpp"
#include "ism/error.hpp"
#include "ism/json_util.hpp"
#include "ism/simulation.hpp"

namespace ism {

inline constexpr const char* kApiSchema = "ism.api/1";

struct ServiceConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8080;  // 0 picks a free port
  std::size_t max_sessions = 64;
  std::size_t max_suggestion_size = kBruteForceCap;
  int max_advance_ticks = 10000;
  std::chrono::milliseconds heartbeat{1000};
};

// ---------------------------------------------------------------------------
// Sessions

class Session {
 public:
  Session(std::string id, Scenario scenario)
      : id_(std::move(id)), canonical_(to_json(scenario)),
        sim_(std::make_unique<Simulation>(std::move(scenario))) {
    publish();
    push_event({{"type", "created"}, {"state", json::parse(*snapshot())}});
  }

  const std::string& id() const noexcept { return id_; }
  const json& canonical_scenario() const noexcept { return canonical_; }
  // The scenario is never mutated after construction.
  const Scenario& scenario() const noexcept { return sim_->scenario(); }

  std::shared_ptr<const std::string> snapshot() const {
    std::lock_guard lock(snapshot_mu_);
    return snapshot_;
  }

  json descriptor() const {
    std::lock_guard lock(snapshot_mu_);
    return descriptor_;
  }

  json advance(int ticks) {
    std::lock_guard lock(mutation_mu_);
    begin();
    SimObserver obs = observer(false);
    try {
      sim_->advance(ticks, obs);
    } catch (...) {
      end();
      throw;
    }
    end();
    return {{"tick", sim_->tick()}};
  }

  json suggest(const SuggestionEvent& ev, bool dry_run) {
    std::lock_guard lock(mutation_mu_);
    begin();
    try {
      SuggestionEvent e = ev;
      e.tick = sim_->tick();
      json out;
      if (dry_run) {
        BbOptions options;
        options.progress = observer(true).on_progress;
        SolveReport r = sim_->dry_run(e, options);
        out = summary(r, sim_->theta(), false);
      } else {
        const auto& rec = sim_->apply_suggestion(e, observer(false));
        out = summary(rec.report, theta_before_, rec.accepted);
      }
      out["dry_run"] = dry_run;
      out["tick"] = sim_->tick();
      if (!dry_run) {
        last_report_ = out;
        pending_.push_back({{"type", "report"}, {"report", out}});
      }
      end();
      return out;
    } catch (...) {
      end();
      throw;
    }
  }

  // Events with seq > after; blocks up to `wait` for at least one.
  std::vector<json> events_after(std::uint64_t after, std::chrono::milliseconds wait,
                                 std::uint64_t* last_seq) {
    std::unique_lock lock(events_mu_);
    events_cv_.wait_for(lock, wait, [&] { return closed_ || events_.size() > after; });
    std::vector<json> out;
    for (std::size_t i = static_cast<std::size_t>(after); i < events_.size(); ++i) {
      out.push_back(events_[i]);
    }
    if (last_seq) *last_seq = events_.size();
    return out;
  }

  void close() {
    std::lock_guard lock(events_mu_);
    closed_ = true;
    events_cv_.notify_all();
  }

  bool closed() const {
    std::lock_guard lock(events_mu_);
    return closed_;
  }

 private:
  std::string id_;
  json canonical_;
  std::unique_ptr<Simulation> sim_;
  std::mutex mutation_mu_;
  mutable std::mutex snapshot_mu_;
  std::shared_ptr<const std::string> snapshot_;
  json descriptor_;
  json last_report_;
  Vector theta_before_;
  bool busy_ = false;
  std::vector<json> pending_;

  mutable std::mutex events_mu_;
  std::condition_variable events_cv_;
  std::vector<json> events_;
  bool closed_ = false;

  void push_event(json e) {
    std::lock_guard lock(events_mu_);
    e["seq"] = events_.size() + 1;
    events_.push_back(std::move(e));
    events_cv_.notify_all();
  }

  void begin() {
    theta_before_ = sim_->theta();
    busy_ = true;
    refresh_descriptor();
  }

  // State events go out only after the snapshot that reflects them, so a
  // client that saw an event never reads an older state.
  void end() {
    busy_ = false;
    publish();
    for (auto& e : pending_) push_event(std::move(e));
    pending_.clear();
  }

  SimObserver observer(bool dry_run) {
    SimObserver obs;
    obs.on_tick = [this](const TickUpdate& u) {
      json pos = json::array();
      for (const auto& p : u.positions) pos.push_back(detail::point_to_json(p));
      pending_.push_back({{"type", "tick"},
                          {"tick", u.tick},
                          {"positions", pos},
                          {"actions", u.actions},
                          {"candidates", candidates_json()}});
    };
    obs.on_theta = [this](const ThetaChange& c) {
      pending_.push_back({{"type", "theta"},
                          {"tick", c.tick},
                          {"old_theta", js::from_vector(c.old_theta)},
                          {"new_theta", js::from_vector(c.new_theta)},
                          {"cause", c.cause}});
    };
    obs.on_progress = [this, dry_run](const ProgressEvent& p) {
      json e = {{"type", "progress"},
                {"nodes_expanded", p.nodes_expanded},
                {"oism_solves", p.oism_solves},
                {"dry_run", dry_run}};
      e["incumbent"] = std::isfinite(p.incumbent) ? json(p.incumbent) : json(nullptr);
      push_event(std::move(e));
    };
    return obs;
  }

  static json summary(const SolveReport& r, const Vector& theta0, bool accepted) {
    json j = to_json(r, &theta0);
    j["accepted"] = accepted;
    return j;
  }

  json candidates_json() const {
    auto plan = sim_->current_plan();
    json out = json::array();
    for (std::size_t r = 0; r < plan->offsets.size(); ++r) {
      json acts = json::array();
      for (int a = 0; a < plan->counts[r]; ++a) {
        const auto& act = plan->basis->actions()[static_cast<std::size_t>(
            plan->element(static_cast<int>(r), a))];
        json wp = json::array();
        for (const auto& p : act.waypoints) wp.push_back(detail::point_to_json(p));
        acts.push_back({{"id", a}, {"waypoints", wp}});
      }
      out.push_back(acts);
    }
    return out;
  }

  void refresh_descriptor() {
    json d = {{"id", id_},
              {"scenario", sim_->scenario().name},
              {"tick", sim_->tick()},
              {"running", busy_}};
    d["last_report"] = last_report_.is_null() ? json(nullptr) : last_report_;
    std::lock_guard lock(snapshot_mu_);
    descriptor_ = std::move(d);
  }

  void publish() {
    const Simulation& s = *sim_;
    const EnvironmentGrid& g = s.grid();
    json densities = json::array();
    for (const auto& d : s.densities()) densities.push_back(js::from_vector(d.field()));
    json robots = json::array();
    for (std::size_t r = 0; r < s.scenario().robots.size(); ++r) {
      const auto& rs = s.scenario().robots[r];
      robots.push_back({{"id", rs.id},
                        {"position", detail::point_to_json(s.positions()[r])},
                        {"sensor", {{"radius", rs.sensor.radius}, {"decay", rs.sensor.decay}}}});
    }
    json traj = json::array();
    for (std::size_t r = 0; r < s.scenario().robots.size(); ++r) {
      json path = json::array();
      for (const auto& step : s.trajectory()) path.push_back(detail::point_to_json(step[r]));
      traj.push_back(path);
    }
    json hist = json::array();
    for (const auto& h : s.theta_history()) {
      hist.push_back({{"tick", h.tick}, {"theta", js::from_vector(h.theta)}, {"cause", h.cause}});
    }
    json state = {
        {"schema", kApiSchema},
        {"id", id_},
        {"scenario", s.scenario().name},
        {"scenario_document", canonical_},
        {"tick", s.tick()},
        {"grid",
         {{"bounds", {g.x_min(), g.y_min(), g.x_max(), g.y_max()}},
          {"resolution", {g.nx(), g.ny()}},
          {"cell_area", g.cell_area()}}},
        {"densities", densities},
        {"theta", js::from_vector(s.theta())},
        {"robots", robots},
        {"candidates", candidates_json()},
        {"selections", s.selections()},
        {"trajectories", traj},
        {"theta_history", hist}};
    state["last_report"] = last_report_.is_null() ? json(nullptr) : last_report_;
    auto snap = std::make_shared<const std::string>(state.dump());
    {
      std::lock_guard lock(snapshot_mu_);
      snapshot_ = std::move(snap);
    }
    refresh_descriptor();
  }
};

// ---------------------------------------------------------------------------
// HTTP plumbing

struct HttpError : std::runtime_error {
  HttpError(unsigned status_, std::string message, std::string path_ = {})
      : std::runtime_error(std::move(message)), status(status_), path(std::move(path_)) {}
  unsigned status;
  std::string path;
};

struct ParsedTarget {
  std::vector<std::string> segments;
  std::map<std::string, std::string> query;
};

inline ParsedTarget parse_target(const std::string& target) {
  ParsedTarget out;
  const auto q = target.find('?');
  const std::string path = target.substr(0, q);
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    std::size_t j = path.find('/', i);
    if (j == std::string::npos) j = path.size();
    if (j > i) out.segments.push_back(path.substr(i, j - i));
    i = j;
  }
  if (q != std::string::npos) {
    std::string rest = target.substr(q + 1);
    std::size_t p = 0;
    while (p <= rest.size()) {
      std::size_t amp = rest.find('&', p);
      if (amp == std::string::npos) amp = rest.size();
      std::string kv = rest.substr(p, amp - p);
      if (!kv.empty()) {
        const auto eq = kv.find('=');
        out.query[kv.substr(0, eq)] = eq == std::string::npos ? "" : kv.substr(eq + 1);
      }
      p = amp + 1;
    }
  }
  return out;
}

class Service {
 public:
  explicit Service(ServiceConfig config = {}) : config_(std::move(config)) {}

  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Binds and starts accepting; returns the bound port.
  unsigned short start() {
    namespace net = boost::asio;
    auto addr = net::ip::make_address(config_.address);
    acceptor_.open(addr.is_v6() ? net::ip::tcp::v6() : net::ip::tcp::v4());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind({addr, config_.port});
    acceptor_.listen();
    port_ = acceptor_.local_endpoint().port();
    running_ = true;
    accept_thread_ = std::thread([this] { accept_loop(); });
    return port_;
  }

  unsigned short port() const noexcept { return port_; }

  void wait() {
    if (accept_thread_.joinable()) accept_thread_.join();
  }

  void stop() {
    if (!running_.exchange(false)) return;
    boost::system::error_code ec;
    {
      // A blocking accept does not return when the acceptor is closed from
      // another thread, so wake it with a throwaway connection.
      auto ep = acceptor_.local_endpoint(ec);
      if (!ec) {
        if (ep.address().is_unspecified()) {
          ep.address(ep.address().is_v6()
                         ? boost::asio::ip::address(boost::asio::ip::address_v6::loopback())
                         : boost::asio::ip::address(boost::asio::ip::address_v4::loopback()));
        }
        boost::asio::ip::tcp::socket poke(io_);
        poke.connect(ep, ec);
        poke.close(ec);
      }
    }
    if (accept_thread_.joinable()) accept_thread_.join();
    acceptor_.close(ec);
    {
      std::lock_guard lock(sessions_mu_);
      for (auto& [id, s] : sessions_) s->close();
    }
    std::list<Connection> threads;
    {
      std::lock_guard lock(conn_mu_);
      for (auto& sock : sockets_) {
        sock->shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
        sock->close(ec);
      }
      threads.swap(threads_);
    }
    for (auto& c : threads) {
      if (c.thread.joinable()) c.thread.join();
    }
  }

  // Request handling without the network, used by the socket loop and by
  // tests. Returns (status, JSON body).
  std::pair<unsigned, json> handle(const std::string& method, const std::string& target,
                                   const std::string& body) {
    try {
      return route(method, parse_target(target), body);
    } catch (const HttpError& e) {
      json j = {{"error", e.what()}};
      if (!e.path.empty()) j["path"] = e.path;
      return {e.status, j};
    } catch (const SchemaError& e) {
      return {400, {{"error", e.what()}, {"path", e.path()}}};
    } catch (const ContractViolation& e) {
      return {400, {{"error", e.what()}}};
    } catch (const CapExceeded& e) {
      return {400, {{"error", e.what()}}};
    } catch (const DegenerateActions& e) {
      return {409, {{"error", e.what()}}};
    } catch (const std::exception& e) {
      return {500, {{"error", e.what()}}};
    }
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

 private:
  ServiceConfig config_;
  boost::asio::io_context io_;
  boost::asio::ip::tcp::acceptor acceptor_{io_};
  unsigned short port_ = 0;
  std::atomic<bool> running_{false};
  std::thread accept_thread_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;

  struct Connection {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };
  std::mutex conn_mu_;
  std::list<Connection> threads_;
  std::set<std::shared_ptr<boost::asio::ip::tcp::socket>> sockets_;

  static json parse_body(const std::string& body) {
    if (body.empty()) return json::object();
    try {
      return json::parse(body);
    } catch (const json::parse_error& e) {
      throw HttpError(400, std::string("malformed JSON: ") + e.what(), "");
    }
  }

  std::shared_ptr<Session> require(const std::string& id) const {
    auto s = find(id);
    if (!s) throw HttpError(404, "unknown session " + id);
    return s;
  }

  static std::uint64_t query_u64(const ParsedTarget& t, const char* key) {
    auto it = t.query.find(key);
    if (it == t.query.end() || it->second.empty()) return 0;
    try {
      std::size_t used = 0;
      auto v = std::stoull(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument(key);
      return v;
    } catch (const std::exception&) {
      throw HttpError(400, std::string("query parameter ") + key + " must be an integer",
                      std::string("?") + key);
    }
  }

  SuggestionEvent suggestion_body(const Session& s, const json& body) {
    const std::size_t robots = s.scenario().robots.size();
    const SolverSettings& defaults = s.scenario().solver;
    if (robots > config_.max_suggestion_size) {
      throw HttpError(400, "suggestion exceeds the configured size cap", "/actions");
    }
    return suggestion_from_json(body, "", robots, defaults);
  }

  std::pair<unsigned, json> route(const std::string& method, const ParsedTarget& t,
                                  const std::string& body) {
    const auto& seg = t.segments;
    if (seg.size() == 1 && seg[0] == "version" && method == "GET") {
      return {200, {{"schema", kApiSchema}}};
    }
    if (seg.empty() || seg[0] != "sessions") throw HttpError(404, "no such route");

    if (seg.size() == 1) {
      if (method == "GET") {
        json list = json::array();
        std::lock_guard lock(sessions_mu_);
        for (const auto& [id, s] : sessions_) list.push_back(s->descriptor());
        return {200, {{"sessions", list}}};
      }
      if (method == "POST") return create(parse_body(body));
      throw HttpError(405, "method not allowed");
    }

    const std::string& id = seg[1];
    if (seg.size() == 2) {
      if (method == "GET") return {200, require(id)->descriptor()};
      if (method == "DELETE") {
        std::shared_ptr<Session> s;
        {
          std::lock_guard lock(sessions_mu_);
          auto it = sessions_.find(id);
          if (it == sessions_.end()) throw HttpError(404, "unknown session " + id);
          s = it->second;
          sessions_.erase(it);
        }
        s->close();
        return {200, {{"deleted", id}}};
      }
      throw HttpError(405, "method not allowed");
    }

    if (seg.size() == 3) {
      const std::string& verb = seg[2];
      if (verb == "state" && method == "GET") {
        return {200, json::parse(*require(id)->snapshot())};
      }
      if (verb == "events" && method == "GET") {
        auto s = require(id);
        const auto after = query_u64(t, "after");
        const auto wait = std::chrono::milliseconds(query_u64(t, "wait_ms"));
        std::uint64_t last = 0;
        auto events = s->events_after(after, std::min(wait, std::chrono::milliseconds(30000)), &last);
        return {200, {{"events", events}, {"last_seq", last}}};
      }
      if (verb == "advance" && method == "POST") {
        auto s = require(id);
        json b = parse_body(body);
        const auto ticks = js::integer_or(b, "", "ticks", 1);
        if (ticks < 0 || ticks > config_.max_advance_ticks) {
          throw HttpError(400, "ticks out of range", "/ticks");
        }
        return {200, s->advance(static_cast<int>(ticks))};
      }
      if ((verb == "suggestion" || verb == "solve-dry-run") && method == "POST") {
        auto s = require(id);
        SuggestionEvent ev = suggestion_body(*s, parse_body(body));
        return {200, s->suggest(ev, verb == "solve-dry-run")};
      }
      if (verb == "stream") throw HttpError(426, "stream requires a WebSocket upgrade");
    }
    throw HttpError(404, "no such route");
  }

  std::pair<unsigned, json> create(const json& body) {
    if (!body.is_object()) throw SchemaError("", "expected an object");
    std::optional<std::string> id;
    if (js::has(body, "id")) {
      id = js::string(body.at("id"), "/id");
      if (id->empty() || id->find('/') != std::string::npos || id->find('?') != std::string::npos) {
        throw SchemaError("/id", "must be a nonempty path segment");
      }
    }
    Scenario scenario = scenario_from_json(js::at(body, "", "scenario"), "/scenario");
    const json canonical = to_json(scenario);
    std::lock_guard lock(sessions_mu_);
    if (id) {
      auto it = sessions_.find(*id);
      if (it != sessions_.end()) {
        if (it->second->canonical_scenario() == canonical) {
          return {200, it->second->descriptor()};
        }
        throw HttpError(409, "session id already in use with a different scenario", "/id");
      }
    } else {
      do {
        id = "s" + std::to_string(next_id_++);
      } while (sessions_.count(*id));
    }
    if (sessions_.size() >= config_.max_sessions) throw HttpError(429, "session limit reached");
    auto s = std::make_shared<Session>(*id, std::move(scenario));
    sessions_[*id] = s;
    return {201, s->descriptor()};
  }

  // -------------------------------------------------------------------------
  // Sockets

  void accept_loop() {
    while (running_) {
      auto sock = std::make_shared<boost::asio::ip::tcp::socket>(io_);
      boost::system::error_code ec;
      acceptor_.accept(*sock, ec);
      if (!running_) break;
      if (ec) continue;
      std::lock_guard lock(conn_mu_);
      for (auto it = threads_.begin(); it != threads_.end();) {
        if (*it->done) {
          it->thread.join();
          it = threads_.erase(it);
        } else {
          ++it;
        }
      }
      sockets_.insert(sock);
      auto done = std::make_shared<std::atomic<bool>>(false);
      threads_.push_back({std::thread([this, sock, done] {
                            serve_connection(sock);
                            std::lock_guard l(conn_mu_);
                            sockets_.erase(sock);
                            *done = true;
                          }),
                          done});
    }
  }

  void serve_connection(std::shared_ptr<boost::asio::ip::tcp::socket> sock) {
    namespace beast = boost::beast;
    namespace http = beast::http;
    beast::flat_buffer buffer;
    boost::system::error_code ec;
    while (running_) {
      http::request<http::string_body> req;
      http::read(*sock, buffer, req, ec);
      if (ec) break;
      if (beast::websocket::is_upgrade(req)) {
        serve_stream(*sock, std::move(req));
        break;
      }
      const std::string target(req.target());
      auto [status, body] = handle(std::string(req.method_string()), target, req.body());
      http::response<http::string_body> res{static_cast<http::status>(status), req.version()};
      res.set(http::field::server, "ism");
      res.set(http::field::content_type, "application/json");
      res.set(http::field::access_control_allow_origin, "*");
      res.keep_alive(req.keep_alive());
      res.body() = body.dump();
      res.prepare_payload();
      http::write(*sock, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    sock->shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
  }

  void serve_stream(boost::asio::ip::tcp::socket& sock,
                    boost::beast::http::request<boost::beast::http::string_body> req) {
    namespace beast = boost::beast;
    namespace websocket = beast::websocket;
    const ParsedTarget t = parse_target(std::string(req.target()));
    websocket::stream<boost::asio::ip::tcp::socket&> ws(sock);
    boost::system::error_code ec;
    std::shared_ptr<Session> session;
    std::uint64_t after = 0;
    if (t.segments.size() == 3 && t.segments[0] == "sessions" && t.segments[2] == "stream") {
      session = find(t.segments[1]);
      try {
        after = query_u64(t, "after");
      } catch (const HttpError&) {
        session.reset();
      }
    }
    if (!session) {
      beast::http::response<beast::http::string_body> res{beast::http::status::not_found,
                                                          req.version()};
      res.set(beast::http::field::content_type, "application/json");
      res.body() = json{{"error", "unknown stream"}}.dump();
      res.prepare_payload();
      beast::http::write(sock, res, ec);
      return;
    }
    ws.accept(req, ec);
    if (ec) return;
    ws.text(true);
    while (running_ && !session->closed()) {
      std::uint64_t last = after;
      auto events = session->events_after(after, config_.heartbeat, &last);
      if (events.empty()) {
        ws.write(boost::asio::buffer(json{{"type", "heartbeat"}, {"last_seq", last}}.dump()), ec);
      }
      for (const auto& e : events) {
        ws.write(boost::asio::buffer(e.dump()), ec);
        if (ec) break;
      }
      if (ec) return;
      after = last;
    }
    ws.close(websocket::close_code::going_away, ec);
  }
};

}  // namespace ism
