#pragma once

#include <memory>
#include <string>

namespace crowdlens {

/// Read-only HTTP endpoint over an event log: GET /stats returns the
/// current report as JSON (optional from/to/tz query parameters), GET
/// /heatmap.ppm returns the configured heat-map render, anything else
/// 404s. Each request reads its own snapshot of the log.
class StatsServer {
public:
  /// Binds immediately (port 0 picks a free port) and serves from a
  /// background thread. Throws BindFailure when the port is taken.
  StatsServer(std::string logPath, std::string heatmapPath, int port);
  ~StatsServer();
  StatsServer(const StatsServer&) = delete;
  StatsServer& operator=(const StatsServer&) = delete;

  int port() const;
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace crowdlens
