#include "crowdlens/stats_server.hpp"

#include <atomic>
#include <fstream>
#include <limits>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "crowdlens/event_log.hpp"

namespace crowdlens {

namespace {

std::int64_t query_i64(const httplib::Request& req, const char* name, std::int64_t fallback) {
  if (!req.has_param(name)) return fallback;
  try {
    return std::stoll(req.get_param_value(name));
  } catch (const std::exception&) {
    return fallback;
  }
}

} // namespace

struct StatsServer::Impl {
  std::string logPath;
  std::string heatmapPath;
  httplib::Server server;
  std::thread worker;
  int boundPort = 0;
};

StatsServer::StatsServer(std::string logPath, std::string heatmapPath, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->logPath = std::move(logPath);
  impl_->heatmapPath = std::move(heatmapPath);

  impl_->server.set_keep_alive_max_count(1); // connection per request

  impl_->server.Get("/stats", [this](const httplib::Request& req, httplib::Response& res) {
    const std::int64_t from =
        query_i64(req, "from", std::numeric_limits<std::int64_t>::min());
    const std::int64_t to = query_i64(req, "to", std::numeric_limits<std::int64_t>::max());
    const int tz = static_cast<int>(query_i64(req, "tz", 0));
    try {
      const LoadResult loaded = load_events(impl_->logPath, from, to);
      res.set_content(report_to_json(make_report(loaded.events, tz)), "application/json");
    } catch (const Error& e) {
      res.status = 500;
      res.set_content(e.what(), "text/plain");
    }
  });

  impl_->server.Get("/heatmap.ppm", [this](const httplib::Request&, httplib::Response& res) {
    std::ifstream in(impl_->heatmapPath, std::ios::binary);
    if (impl_->heatmapPath.empty() || !in) {
      res.status = 404;
      res.set_content("no heat map available", "text/plain");
      return;
    }
    std::ostringstream body;
    body << in.rdbuf();
    res.set_content(body.str(), "image/x-portable-pixmap");
  });

  if (port == 0) {
    impl_->boundPort = impl_->server.bind_to_any_port("0.0.0.0");
    if (impl_->boundPort <= 0) fail(Errc::BindFailure, "no free port");
  } else {
    if (!impl_->server.bind_to_port("0.0.0.0", port))
      fail(Errc::BindFailure, "port " + std::to_string(port) + " unavailable");
    impl_->boundPort = port;
  }
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

StatsServer::~StatsServer() { stop(); }

int StatsServer::port() const { return impl_->boundPort; }

void StatsServer::stop() {
  if (impl_->worker.joinable()) {
    impl_->server.stop();
    impl_->worker.join();
  }
}

} // namespace crowdlens
