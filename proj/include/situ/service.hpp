#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include <httplib.h>

#include "situ/session.hpp"

/// HTTP transport for the teaching session.
///
///   GET  /health                      {"status": "ok"}
///   POST /sessions                    session.start body -> opening messages
///   POST /sessions/{id}/messages      request -> messages it produced
///   GET  /sessions/{id}/events?after= server-sent events, one per message
namespace situ::session {

class Service {
 public:
  explicit Service(Settings cfg, std::optional<TaskModel> model = std::nullopt)
      : cfg_(cfg), model_(std::move(model)) {
    routes();
  }
  ~Service() { stop(); }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port.
  int bind(const std::string& host, int port) {
    if (port == 0) return server_.bind_to_any_port(host);
    return server_.bind_to_port(host, port) ? port : -1;
  }
  /// Serves until stop(); blocks.
  bool run() { return server_.listen_after_bind(); }
  void wait_until_ready() const { server_.wait_until_ready(); }
  void stop() {
    stopping_ = true;
    {
      std::lock_guard lock(sessions_mutex_);
      for (auto& [id, e] : sessions_) e->changed.notify_all();
    }
    server_.stop();
  }

 private:
  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    Session session;
    std::mutex mutex;
    std::condition_variable changed;
  };

  static void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static json array_of(const std::vector<json>& msgs) {
    json a = json::array();
    for (const auto& m : msgs) a.push_back(m);
    return a;
  }

  std::shared_ptr<Entry> find(const std::string& id) {
    std::lock_guard lock(sessions_mutex_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
  }

  void routes() {
    server_.Get("/health", [](const httplib::Request&, httplib::Response& res) { reply(res, 200, {{"status", "ok"}}); });

    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      try {
        const json doc = io::parse(req.body, "request");
        const io::At top(doc);
        // Accept either the bare body or a full session.start message.
        const io::At body = top.has("type") ? top["body"] : top;
        if (top.has("type") && top["type"].str() != "session.start") top["type"].fail("expected session.start");
        const Scenario sc = io::find_scenario(body["scenario"].str());
        const std::string variant = body.has("variant") ? body["variant"].str() : sc.teach.at(0);
        std::string id;
        {
          std::lock_guard lock(sessions_mutex_);
          id = "s" + std::to_string(++next_session_);
        }
        auto e = std::make_shared<Entry>(Session(id, sc, variant, cfg_, model_));
        json out = array_of(e->session.log());
        {
          std::lock_guard lock(sessions_mutex_);
          sessions_.emplace(id, std::move(e));
        }
        reply(res, 200, out);
      } catch (const LoadError& e) {
        reply(res, 400, {{"error", e.what()}});
      } catch (const InvalidInput& e) {
        reply(res, 400, {{"error", e.what()}});
      } catch (const std::out_of_range&) {
        reply(res, 400, {{"error", "scenario has no teach variants"}});
      }
    });

    server_.Post(R"(/sessions/([\w-]+)/messages)", [this](const httplib::Request& req, httplib::Response& res) {
      auto e = find(req.matches[1]);
      if (!e) return reply(res, 404, {{"error", "unknown session"}});
      json doc;
      try {
        doc = io::parse(req.body, "request");
      } catch (const LoadError& err) {
        return reply(res, 400, {{"error", err.what()}});
      }
      std::vector<json> out;
      {
        std::lock_guard lock(e->mutex);
        out = e->session.handle(doc);
      }
      e->changed.notify_all();
      reply(res, 200, array_of(out));
    });

    server_.Get(R"(/sessions/([\w-]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
      auto e = find(req.matches[1]);
      if (!e) return reply(res, 404, {{"error", "unknown session"}});
      std::uint64_t after = 0;
      if (req.has_param("after")) {
        try {
          after = std::stoull(req.get_param_value("after"));
        } catch (const std::exception&) {
          return reply(res, 400, {{"error", "after must be a sequence number"}});
        }
      }
      auto cursor = std::make_shared<std::size_t>(after);
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider("text/event-stream", [this, e, cursor](std::size_t, httplib::DataSink& sink) {
        std::string chunk;
        {
          std::unique_lock lock(e->mutex);
          e->changed.wait_for(lock, std::chrono::milliseconds(200),
                              [&] { return stopping_ || e->session.log().size() > *cursor; });
          const auto& log = e->session.log();
          for (; *cursor < log.size(); ++*cursor) {
            const auto& m = log[*cursor];
            chunk += "id: " + std::to_string(m["seq"].get<std::uint64_t>()) + "\n";
            chunk += "event: " + m["type"].get<std::string>() + "\n";
            chunk += "data: " + m.dump() + "\n\n";
          }
        }
        if (!chunk.empty() && !sink.write(chunk.data(), chunk.size())) return false;
        if (stopping_) {
          sink.done();
          return false;
        }
        return sink.is_writable();
      });
    });
  }

  Settings cfg_;
  std::optional<TaskModel> model_;
  httplib::Server server_;
  std::mutex sessions_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::size_t next_session_ = 0;
  std::atomic<bool> stopping_{false};
};

}  // namespace situ::session
