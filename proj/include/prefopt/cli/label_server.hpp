// Copyright 2026 The prefopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Labeling session for a human teacher plus the HTTP server exposing it.
//
//   GET  /api/pair      next pending pair, or 204 when none remain
//   POST /api/label     {"pair_id", "y"} -> 200 {"done","target"} | 400 | 409
//   GET  /api/progress  {"done","target"}
//   GET  /              static UI bundle (or a placeholder page)

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>

#include "prefopt/data/io.hpp"
#include "prefopt/data/sampling.hpp"

namespace prefopt::cli {

enum class SubmitStatus { kOk, kBadRequest, kConflict };

struct SubmitResult {
  SubmitStatus status;
  std::string message;
};

class LabelSession {
 public:
  // Pre-samples `n_pairs` pairs from `d` with `seed`. Labels already in
  // `out_path` for these pair ids count as done, so a restarted session
  // resumes where it stopped.
  LabelSession(const data::Dataset& d, int k, int n_pairs, std::uint64_t seed,
               std::filesystem::path out_path)
      : dataset_(d), k_(k), out_path_(std::move(out_path)) {
    if (n_pairs < 1) throw InvalidArgument("n_pairs must be >= 1");
    Rng rng(seed);
    for (int i = 0; i < n_pairs; ++i) {
      auto [a, b] = data::SampleSegmentPair(d, k, rng);
      pairs_.push_back({"h" + std::to_string(seed) + "-" + std::to_string(i),
                        std::move(a), std::move(b)});
    }
    if (std::filesystem::exists(out_path_)) {
      for (const auto& p : data::ReadPreferences(out_path_)) {
        if (Find(p.pair_id) != nullptr) done_.insert(p.pair_id);
      }
    }
  }

  int target() const { return static_cast<int>(pairs_.size()); }

  int done() const {
    std::lock_guard lock(mu_);
    return static_cast<int>(done_.size());
  }

  Json Progress() const {
    std::lock_guard lock(mu_);
    return {{"done", done_.size()}, {"target", pairs_.size()}};
  }

  // Payload of the first unlabeled pair in queue order.
  std::optional<Json> NextPair() const {
    std::lock_guard lock(mu_);
    for (const auto& p : pairs_) {
      if (done_.count(p.id) == 0) return PairPayload(p);
    }
    return std::nullopt;
  }

  SubmitResult Submit(const std::string& body) {
    Json j;
    try {
      j = Json::parse(body);
    } catch (const Json::exception&) {
      return {SubmitStatus::kBadRequest, "body is not JSON"};
    }
    if (!j.is_object() || !j.contains("pair_id") || !j["pair_id"].is_string() ||
        !j.contains("y") || !j["y"].is_number()) {
      return {SubmitStatus::kBadRequest, "expected {\"pair_id\": string, \"y\": number}"};
    }
    const std::string id = j["pair_id"].get<std::string>();
    const double y = j["y"].get<double>();
    if (!data::IsValidLabel(y)) return {SubmitStatus::kBadRequest, "y must be 0, 0.5 or 1"};
    const Pending* pair = Find(id);
    if (pair == nullptr) return {SubmitStatus::kBadRequest, "unknown pair_id " + id};

    std::unique_lock lock(mu_);
    if (done_.count(id) > 0) return {SubmitStatus::kConflict, id + " already labeled"};
    data::AppendPreference(out_path_, {id, pair->seg0, pair->seg1, y, "human"});
    done_.insert(id);
    const bool complete = done_.size() == pairs_.size();
    lock.unlock();
    if (complete) cv_.notify_all();
    return {SubmitStatus::kOk, ""};
  }

  void WaitUntilComplete() const {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return done_.size() == pairs_.size(); });
  }

  // True once every pair is labeled; false after `timeout`.
  bool WaitUntilCompleteFor(std::chrono::milliseconds timeout) const {
    std::unique_lock lock(mu_);
    return cv_.wait_for(lock, timeout, [&] { return done_.size() == pairs_.size(); });
  }

 private:
  struct Pending {
    std::string id;
    data::Segment seg0;
    data::Segment seg1;
  };

  const Pending* Find(const std::string& id) const {
    for (const auto& p : pairs_) {
      if (p.id == id) return &p;
    }
    return nullptr;
  }

  Json SegmentPayload(const data::Segment& s) const {
    data::SegmentView v(dataset_, s);
    Json states = Json::array();
    Json actions = Json::array();
    for (int t = 0; t < v.length(); ++t) {
      states.push_back(std::vector<double>(v.state(t).data(),
                                           v.state(t).data() + v.state(t).size()));
      actions.push_back(std::vector<double>(v.action(t).data(),
                                            v.action(t).data() + v.action(t).size()));
    }
    return {{"traj_id", s.traj_id}, {"start", s.start}, {"states", states},
            {"actions", actions}};
  }

  Json Bounds() const {
    if (dataset_.env() == "pendulum") {
      return {{"angle", {-std::numbers::pi, std::numbers::pi}}};
    }
    return {{"x", {-2.0, 2.0}}, {"y", {-2.0, 2.0}}};
  }

  Json PairPayload(const Pending& p) const {
    return {{"pair_id", p.id},          {"k", k_},
            {"env", dataset_.env()},    {"seg0", SegmentPayload(p.seg0)},
            {"seg1", SegmentPayload(p.seg1)}, {"bounds", Bounds()}};
  }

  const data::Dataset& dataset_;
  int k_;
  std::filesystem::path out_path_;
  std::vector<Pending> pairs_;
  std::set<std::string> done_;
  mutable std::mutex mu_;
  mutable std::condition_variable cv_;
};

inline constexpr const char* kPlaceholderPage =
    "<!doctype html><html><head><meta charset=\"utf-8\"><title>prefopt labeling</title>"
    "</head><body><h1>prefopt labeling server</h1><p>No UI bundle was given "
    "(--ui). The JSON API is live: GET /api/pair, POST /api/label, "
    "GET /api/progress.</p></body></html>";

inline void InstallRoutes(httplib::Server& server, LabelSession& session,
                          const std::string& ui_dir) {
  server.Get("/api/pair", [&session](const httplib::Request&, httplib::Response& res) {
    auto pair = session.NextPair();
    if (!pair) {
      res.status = 204;
      return;
    }
    res.set_content(pair->dump(), "application/json");
  });
  server.Post("/api/label", [&session](const httplib::Request& req, httplib::Response& res) {
    SubmitResult r = session.Submit(req.body);
    switch (r.status) {
      case SubmitStatus::kOk:
        res.status = 200;
        res.set_content(session.Progress().dump(), "application/json");
        return;
      case SubmitStatus::kBadRequest:
        res.status = 400;
        break;
      case SubmitStatus::kConflict:
        res.status = 409;
        break;
    }
    res.set_content(Json{{"error", r.message}}.dump(), "application/json");
  });
  server.Get("/api/progress", [&session](const httplib::Request&, httplib::Response& res) {
    res.set_content(session.Progress().dump(), "application/json");
  });
  if (!ui_dir.empty() && std::filesystem::is_directory(ui_dir)) {
    server.set_mount_point("/", ui_dir);
  } else {
    server.Get("/", [](const httplib::Request&, httplib::Response& res) {
      res.set_content(kPlaceholderPage, "text/html");
    });
  }
}

// Serves until every pair is labeled or `stop` is set. Port 0 picks a free
// port. `on_ready` receives the bound port once the server accepts requests.
inline void ServeLabels(LabelSession& session, const std::string& host, int port,
                        const std::string& ui_dir,
                        const std::function<void(int)>& on_ready = nullptr,
                        const std::atomic<bool>* stop = nullptr) {
  httplib::Server server;
  // httplib's default adds SO_REUSEPORT, which would let a second server
  // share a busy port.
  server.set_socket_options([](socket_t sock) {
    int yes = 1;
    setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  InstallRoutes(server, session, ui_dir);
  const int bound = port == 0 ? server.bind_to_any_port(host) : port;
  if (bound < 0 || (port != 0 && !server.bind_to_port(host, port))) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port) +
                  " (port busy?)");
  }
  std::thread watcher([&] {
    while (!session.WaitUntilCompleteFor(std::chrono::milliseconds(100))) {
      if (stop != nullptr && stop->load()) break;
    }
    server.wait_until_ready();
    server.stop();
  });
  std::thread notifier([&] {
    server.wait_until_ready();
    if (on_ready) on_ready(bound);
  });
  server.listen_after_bind();
  notifier.join();
  watcher.join();
}

}  // namespace prefopt::cli
