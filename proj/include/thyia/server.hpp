#pragma once

#include <atomic>
#include <filesystem>
#include <memory>
#include <string>
#include <thread>

#include "thyia/runtime.hpp"

namespace httplib {
class Server;
}

namespace thyia {

// HTTP + JSON control protocol under /v1. Live frames go out as a
// server-sent event stream on GET /v1/live.
class ControlServer {
 public:
  ControlServer(Runtime& runtime, std::filesystem::path snapshot_dir);
  ~ControlServer();

  ControlServer(const ControlServer&) = delete;
  ControlServer& operator=(const ControlServer&) = delete;

  // Binds and serves on a background thread. Port 0 picks a free port.
  // Returns the bound port; throws Error when binding fails.
  int Start(const std::string& host, int port);
  void Stop();

 private:
  void Routes();

  Runtime& runtime_;
  std::filesystem::path snapshot_dir_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<bool> stopping_{false};
};

}  // namespace thyia
