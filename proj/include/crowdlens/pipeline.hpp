#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crowdlens/analytics.hpp"
#include "crowdlens/event_log.hpp"
#include "crowdlens/image.hpp"

namespace crowdlens {

/// Sequential frame producer. next() blocks until a frame is available
/// and returns nullopt once the stream ends cleanly; mid-stream failures
/// throw SourceFailure.
class FrameSource {
public:
  virtual ~FrameSource() = default;
  virtual std::optional<PixelBuffer> next() = 0;
  virtual double declared_fps() const { return 0.0; }
};

/// "pnmdir:<path>" (files consumed in name order) or "tcp:<host>:<port>"
/// (FRM1 wire protocol). An existing but frame-less directory is a
/// warning, not an error.
std::unique_ptr<FrameSource> open_source(const std::string& uri);

enum class RunMode { Gender, Footfall };

/// One run's configuration, usually parsed from a config file of
/// "key value" lines plus "LINE <name> <x1> <y1> <x2> <y2>" entries.
struct ModeConfig {
  RunMode mode = RunMode::Footfall;
  std::string source;
  double fps = 15.0;
  int gridN = 16;
  std::string cascadePath;
  std::string fisherPath;
  std::string svmPath;
  std::string logPath;
  std::optional<double> scaleStep; // default: 1.25 gender, 1.2 footfall
  std::optional<int> stride;       // default: 2 gender, 8 footfall
  double minScore = 0.0;
  double iouThresh = 0.45;
  std::optional<double> gate; // default: 0.1 * frame diagonal
  int maxMissed = 5;
  std::vector<CountingLine> lines;
};

ModeConfig parse_config(const std::string& path);

struct StageLatencies {
  double decodeMs = 0;
  double detectMs = 0;
  double classifyMs = 0;
  double analyticsMs = 0;
  double logMs = 0;
};

struct PipelineStats {
  std::uint64_t framesProcessed = 0;
  std::uint64_t framesDropped = 0;
  double avgFps = 0.0;
  StageLatencies meanMs;
};

struct LineStat {
  std::string label;
  std::uint64_t in = 0;
  std::uint64_t out = 0;
};

struct RunOutput {
  PipelineStats stats;
  HeatGrid grid;
  std::vector<LineStat> lines;
  GenderTally tally;
  std::uint64_t personDetections = 0;
  std::uint64_t faceDetections = 0;
  std::optional<std::string> sourceError; // set when the source died mid-run
};

/// Test and embedding hooks; all optional.
struct RunHooks {
  std::function<void(const Event&)> onEvent;  // called after any log append
  std::function<std::int64_t()> clock;        // ms since epoch
  const std::atomic<bool>* quit = nullptr;    // cooperative stop flag
};

/// Runs one mode over the source: frames are offered at the configured
/// rate through a capacity-1 hand-off (newest wins; overwritten frames
/// count as dropped) and processed on the caller's thread. Ends on
/// source exhaustion or the quit flag.
RunOutput run(const ModeConfig& cfg, FrameSource& src, const RunHooks& hooks = {});

} // namespace crowdlens
