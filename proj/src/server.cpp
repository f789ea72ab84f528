#include "thyia/server.hpp"

#include <httplib.h>

namespace thyia {

namespace {

void Reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

std::optional<Json> ParseBody(const httplib::Request& req, httplib::Response& res) {
  try {
    return Json::parse(req.body.empty() ? std::string("{}") : req.body);
  } catch (const Json::exception&) {
    Reply(res, 400, Json{{"error", "body is not valid JSON"}});
    return std::nullopt;
  }
}

Json OutcomeToJson(const SuggestionOutcome& out) {
  Json j{{"accepted", out.accepted}};
  if (out.accepted) {
    j["game"] = out.game;
    j["message"] = out.message;
  } else {
    j["rule"] = out.rule;
  }
  return j;
}

std::string StringField(const Json& body, const char* key) {
  if (!body.contains(key) || body.at(key).is_null()) return {};
  if (!body.at(key).is_string()) throw Error(std::string("field '") + key + "' must be a string");
  return body.at(key).get<std::string>();
}

}  // namespace

ControlServer::ControlServer(Runtime& runtime, std::filesystem::path snapshot_dir)
    : runtime_(runtime),
      snapshot_dir_(std::move(snapshot_dir)),
      server_(std::make_unique<httplib::Server>()) {
  Routes();
}

ControlServer::~ControlServer() { Stop(); }

void ControlServer::Routes() {
  auto& s = *server_;

  s.Get("/v1/status", [this](const httplib::Request&, httplib::Response& res) {
    Reply(res, 200, StatusToJson(runtime_.Status()));
  });

  s.Get("/v1/games", [this](const httplib::Request&, httplib::Response& res) {
    Reply(res, 200, Json{{"games", runtime_.Games()}});
  });

  s.Post("/v1/games", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = ParseBody(req, res);
    if (!body) return;
    try {
      const auto out = runtime_.UploadGame(StringField(*body, "gdf"), StringField(*body, "submitter"));
      Reply(res, out.accepted ? 200 : 422, OutcomeToJson(out));
    } catch (const Error& ex) {
      Reply(res, 400, Json{{"error", ex.what()}});
    }
  });

  s.Post("/v1/suggestions", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = ParseBody(req, res);
    if (!body) return;
    try {
      Suggestion sug;
      const auto kind = SuggestionKindFromName(StringField(*body, "kind"));
      if (!kind) throw Error("kind must be play-game, strategy-hint or query-stats");
      sug.kind = *kind;
      sug.game = StringField(*body, "game");
      sug.gdf = StringField(*body, "gdf");
      sug.submitter = StringField(*body, "submitter");
      if (sug.kind == SuggestionKind::kStrategyHint) {
        const auto bias = body->at("bias").get<std::vector<double>>();
        if (bias.size() != kNumActions) throw Error("bias needs one value per action");
        std::copy(bias.begin(), bias.end(), sug.bias.begin());
      }
      sug.timestamp_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                             std::chrono::system_clock::now().time_since_epoch())
                             .count();
      const auto out = runtime_.Enqueue(sug);
      Reply(res, out.accepted ? 200 : 422, OutcomeToJson(out));
    } catch (const Json::exception& ex) {
      Reply(res, 400, Json{{"error", ex.what()}});
    } catch (const Error& ex) {
      Reply(res, 400, Json{{"error", ex.what()}});
    }
  });

  s.Get("/v1/stats", [this](const httplib::Request& req, httplib::Response& res) {
    const std::string game = req.has_param("game") ? req.get_param_value("game") : "";
    if (!game.empty()) {
      const auto games = runtime_.Games();
      if (std::find(games.begin(), games.end(), game) == games.end()) {
        Reply(res, 404, Json{{"error", "unknown game"}});
        return;
      }
    }
    Reply(res, 200, StatsToJson(runtime_.Stats(game)));
  });

  s.Post("/v1/command", [this](const httplib::Request& req, httplib::Response& res) {
    std::string line = req.body;
    if (req.get_header_value("Content-Type").starts_with("application/json")) {
      auto body = ParseBody(req, res);
      if (!body) return;
      try {
        line = StringField(*body, "command");
      } catch (const Error& ex) {
        Reply(res, 400, Json{{"error", ex.what()}});
        return;
      }
    }
    Reply(res, 200, Json{{"response", runtime_.Command(line)}});
  });

  s.Get("/v1/live", [this](const httplib::Request&, httplib::Response& res) {
    auto sub = runtime_.live().Subscribe();
    res.set_header("Cache-Control", "no-cache");
    res.set_chunked_content_provider(
        "text/event-stream",
        [this, sub](std::size_t, httplib::DataSink& sink) {
          if (stopping_.load() || sub->closed()) return false;
          const auto frame = sub->Next(std::chrono::milliseconds(250));
          const std::string chunk =
              frame ? "data: " + FrameToJson(*frame).dump() + "\n\n" : std::string(": idle\n\n");
          return sink.write(chunk.data(), chunk.size());
        },
        [this, sub](bool) { runtime_.live().Unsubscribe(sub); });
  });

  s.Post("/v1/admin/snapshot", [this](const httplib::Request& req, httplib::Response& res) {
    auto body = ParseBody(req, res);
    if (!body) return;
    try {
      std::string path = StringField(*body, "path");
      if (path.empty()) path = snapshot_dir_.string();
      if (path.empty()) throw Error("no snapshot directory configured");
      runtime_.Snapshot(path);
      Reply(res, 200, Json{{"path", path}});
    } catch (const std::exception& ex) {
      Reply(res, 500, Json{{"error", ex.what()}});
    }
  });

  s.Post("/v1/admin/pause", [this](const httplib::Request&, httplib::Response& res) {
    runtime_.Pause();
    Reply(res, 200, Json{{"paused", true}});
  });

  s.Post("/v1/admin/resume", [this](const httplib::Request&, httplib::Response& res) {
    runtime_.Resume();
    Reply(res, 200, Json{{"paused", false}});
  });

  s.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) {
      res.set_content(Json{{"error", httplib::status_message(res.status)}}.dump(),
                      "application/json");
    }
  });
}

int ControlServer::Start(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : server_->bind_to_port(host, port)
                                    ? port
                                    : -1;
  if (bound < 0) throw Error("cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return bound;
}

void ControlServer::Stop() {
  stopping_ = true;
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace thyia
