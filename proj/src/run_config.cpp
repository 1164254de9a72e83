#include "crowdlens/pipeline.hpp"

#include <fstream>
#include <sstream>

namespace crowdlens {

ModeConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot read config " + path);
  ModeConfig cfg;
  std::string line;
  int lineNumber = 0;
  bool haveMode = false;
  while (std::getline(in, line)) {
    ++lineNumber;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key) || key[0] == '#') continue;
    const auto where = [&] { return path + ":" + std::to_string(lineNumber); };
    const auto want = [&](auto& slot) {
      if (!(ls >> slot)) fail(Errc::IoFailure, "missing value for " + key + " at " + where());
    };
    if (key == "mode") {
      std::string value;
      want(value);
      if (value == "gender") cfg.mode = RunMode::Gender;
      else if (value == "footfall") cfg.mode = RunMode::Footfall;
      else fail(Errc::IoFailure, "unknown mode '" + value + "' at " + where());
      haveMode = true;
    } else if (key == "source") {
      want(cfg.source);
    } else if (key == "fps") {
      want(cfg.fps);
      if (cfg.fps <= 0) fail(Errc::IoFailure, "fps must be positive at " + where());
    } else if (key == "grid_n") {
      want(cfg.gridN);
      if (cfg.gridN < 1) fail(Errc::IoFailure, "grid_n must be >= 1 at " + where());
    } else if (key == "cascade") {
      want(cfg.cascadePath);
    } else if (key == "fisher") {
      want(cfg.fisherPath);
    } else if (key == "svm") {
      want(cfg.svmPath);
    } else if (key == "scale_step") {
      double v = 0;
      want(v);
      if (v <= 1.0) fail(Errc::IoFailure, "scale_step must exceed 1 at " + where());
      cfg.scaleStep = v;
    } else if (key == "stride") {
      int v = 0;
      want(v);
      if (v < 1) fail(Errc::IoFailure, "stride must be >= 1 at " + where());
      cfg.stride = v;
    } else if (key == "min_score") {
      want(cfg.minScore);
    } else if (key == "iou") {
      want(cfg.iouThresh);
    } else if (key == "gate") {
      double v = 0;
      want(v);
      if (v <= 0) fail(Errc::IoFailure, "gate must be positive at " + where());
      cfg.gate = v;
    } else if (key == "max_missed") {
      want(cfg.maxMissed);
    } else if (key == "log_path") {
      want(cfg.logPath);
    } else if (key == "LINE") {
      CountingLine cl;
      if (!(ls >> cl.label >> cl.p1.x >> cl.p1.y >> cl.p2.x >> cl.p2.y))
        fail(Errc::IoFailure, "LINE needs a name and four coordinates at " + where());
      if (cl.p1.x == cl.p2.x && cl.p1.y == cl.p2.y)
        fail(Errc::IoFailure, "LINE endpoints coincide at " + where());
      cfg.lines.push_back(std::move(cl));
    } else {
      fail(Errc::IoFailure, "unknown config key '" + key + "' at " + where());
    }
  }
  if (!haveMode) fail(Errc::IoFailure, "config " + path + " does not set a mode");
  if (cfg.source.empty()) fail(Errc::IoFailure, "config " + path + " does not set a source");
  return cfg;
}

} // namespace crowdlens
