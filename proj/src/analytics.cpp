#include "crowdlens/analytics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace crowdlens {

std::uint64_t HeatGrid::total() const {
  std::uint64_t t = 0;
  for (std::uint64_t c : counts_) t += c;
  return t;
}

void grid_update(HeatGrid& g, const std::vector<Detection>& dets) {
  for (const Detection& d : dets) {
    const double cx = d.rect.x + d.rect.w / 2.0;
    const double cy = d.rect.y + d.rect.h / 2.0;
    const int col = std::clamp(static_cast<int>(std::floor(cx * g.n() / g.frameW())), 0,
                               g.n() - 1);
    const int row = std::clamp(static_cast<int>(std::floor(cy * g.n() / g.frameH())), 0,
                               g.n() - 1);
    ++g.at(col, row);
  }
}

std::vector<double> grid_percentages(const HeatGrid& g) {
  const std::uint64_t total = g.total();
  if (total == 0) fail(Errc::EmptyGrid, "no detections applied");
  std::vector<double> out(g.counts().size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = double(g.counts()[i]) * 100.0 / double(total);
  return out;
}

namespace {

void heat_color(double ratio, std::uint8_t& r, std::uint8_t& g, std::uint8_t& b) {
  r = static_cast<std::uint8_t>(std::lround(255.0 * ratio));
  g = 0;
  b = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - ratio)));
}

} // namespace

PixelBuffer render_heat(const HeatGrid& g) {
  const int blockW = std::max(1, g.frameW() / g.n());
  const int blockH = std::max(1, g.frameH() / g.n());
  PixelBuffer img;
  img.width = blockW * g.n();
  img.height = blockH * g.n();
  img.channels = 3;
  img.data.resize(std::size_t(img.width) * img.height * 3);
  const std::uint64_t maxCount = *std::max_element(g.counts().begin(), g.counts().end());
  for (int row = 0; row < g.n(); ++row) {
    for (int col = 0; col < g.n(); ++col) {
      const double ratio = maxCount == 0 ? 0.0 : double(g.at(col, row)) / double(maxCount);
      std::uint8_t r, gg, b;
      heat_color(ratio, r, gg, b);
      for (int y = row * blockH; y < (row + 1) * blockH; ++y)
        for (int x = col * blockW; x < (col + 1) * blockW; ++x) {
          img.at(x, y, 0) = r;
          img.at(x, y, 1) = gg;
          img.at(x, y, 2) = b;
        }
    }
  }
  return img;
}

PixelBuffer render_overlay(const GrayImage& frame, const HeatGrid& g, double alpha) {
  PixelBuffer img;
  img.width = frame.width;
  img.height = frame.height;
  img.channels = 3;
  img.data.resize(std::size_t(frame.width) * frame.height * 3);
  const std::uint64_t maxCount = *std::max_element(g.counts().begin(), g.counts().end());
  for (int y = 0; y < frame.height; ++y) {
    const int row = std::clamp(y * g.n() / frame.height, 0, g.n() - 1);
    for (int x = 0; x < frame.width; ++x) {
      const int col = std::clamp(x * g.n() / frame.width, 0, g.n() - 1);
      const double ratio = maxCount == 0 ? 0.0 : double(g.at(col, row)) / double(maxCount);
      std::uint8_t r, gg, b;
      heat_color(ratio, r, gg, b);
      const double base = frame.at(x, y);
      img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround((1 - alpha) * base + alpha * r));
      img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround((1 - alpha) * base + alpha * gg));
      img.at(x, y, 2) = static_cast<std::uint8_t>(std::lround((1 - alpha) * base + alpha * b));
    }
  }
  return img;
}

int line_side(const CountingLine& line, const Point& p) {
  // Image coordinates (y down): cross(p - p1, p2 - p1).
  const double ux = line.p2.x - line.p1.x;
  const double uy = line.p2.y - line.p1.y;
  const double vx = p.x - line.p1.x;
  const double vy = p.y - line.p1.y;
  const double cross = vx * uy - vy * ux;
  return cross < 0 ? -1 : (cross > 0 ? +1 : 0);
}

namespace {

double cross2(const Point& origin, const Point& a, const Point& b) {
  return (a.x - origin.x) * (b.y - origin.y) - (a.y - origin.y) * (b.x - origin.x);
}

// True when the motion segment reaches the finite counting segment;
// callers already know the endpoints straddle the infinite line.
bool motion_hits_segment(const Point& prev, const Point& curr, const CountingLine& line) {
  const double d3 = cross2(prev, curr, line.p1);
  const double d4 = cross2(prev, curr, line.p2);
  return d3 * d4 <= 0.0;
}

} // namespace

CrossDir crossing_check(const Track& t, const CountingLine& line) {
  if (!t.prevCentroid) fail(Errc::MissingHistory, "track has no previous centroid");
  const int s0 = line_side(line, *t.prevCentroid);
  const int s1 = line_side(line, t.centroid);
  if (s0 * s1 >= 0) return CrossDir::None;
  if (!motion_hits_segment(*t.prevCentroid, t.centroid, line)) return CrossDir::None;
  return s0 < 0 ? CrossDir::In : CrossDir::Out;
}

Tracker::StepResult Tracker::step(const std::vector<Detection>& dets, double gate,
                                  int maxMissed) {
  StepResult result;
  const int nd = static_cast<int>(dets.size());
  std::vector<Point> centers(nd);
  for (int i = 0; i < nd; ++i)
    centers[i] = {dets[i].rect.x + dets[i].rect.w / 2.0, dets[i].rect.y + dets[i].rect.h / 2.0};

  std::vector<bool> trackUsed(tracks_.size(), false), detUsed(nd, false);
  // Globally nearest pairs first; ties resolve to the lower track slot,
  // then the lower detection index.
  for (;;) {
    double bestDist = gate;
    int bestT = -1, bestD = -1;
    for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
      if (trackUsed[ti]) continue;
      for (int di = 0; di < nd; ++di) {
        if (detUsed[di]) continue;
        const double dx = tracks_[ti].centroid.x - centers[di].x;
        const double dy = tracks_[ti].centroid.y - centers[di].y;
        const double dist = std::sqrt(dx * dx + dy * dy);
        if (dist < bestDist || (dist == bestDist && bestT == -1)) {
          bestDist = dist;
          bestT = static_cast<int>(ti);
          bestD = di;
        }
      }
    }
    if (bestT < 0) break;
    trackUsed[bestT] = true;
    detUsed[bestD] = true;
    Track& tr = tracks_[bestT];
    tr.prevCentroid = tr.centroid;
    tr.centroid = centers[bestD];
    tr.missed = 0;
    result.matched.push_back({tr.id, bestD});
  }

  std::vector<Track> alive;
  alive.reserve(tracks_.size() + nd);
  for (std::size_t ti = 0; ti < tracks_.size(); ++ti) {
    Track& tr = tracks_[ti];
    ++tr.age;
    if (!trackUsed[ti]) {
      ++tr.missed;
      if (tr.missed > maxMissed) {
        result.retired.push_back(tr.id);
        continue;
      }
    }
    alive.push_back(tr);
  }
  for (int di = 0; di < nd; ++di) {
    if (detUsed[di]) continue;
    Track fresh;
    fresh.id = nextId_++;
    fresh.centroid = centers[di];
    alive.push_back(fresh);
    result.spawned.push_back(fresh.id);
  }
  tracks_ = std::move(alive);

  std::sort(result.matched.begin(), result.matched.end(),
            [](const Assignment& a, const Assignment& b) { return a.trackId < b.trackId; });
  return result;
}

const Track* Tracker::find(std::int64_t id) const {
  for (const Track& t : tracks_)
    if (t.id == id) return &t;
  return nullptr;
}

CrossDir FootfallCounter::update(const Track& t) {
  if (!t.prevCentroid) fail(Errc::MissingHistory, "track has no previous centroid");
  int& mem = lastSide_[t.id];
  if (mem == 0) mem = line_side(line_, *t.prevCentroid);
  const int s1 = line_side(line_, t.centroid);
  if (s1 == 0) return CrossDir::None; // exactly on the line: defer
  if (mem == 0) {
    mem = s1;
    return CrossDir::None;
  }
  if (s1 == mem) return CrossDir::None;
  const int was = mem;
  mem = s1;
  if (!motion_hits_segment(*t.prevCentroid, t.centroid, line_)) return CrossDir::None;
  if (was < 0) {
    ++in_;
    return CrossDir::In;
  }
  ++out_;
  return CrossDir::Out;
}

Occupancy occupancy(const FootfallCounter& fc) {
  const std::int64_t raw =
      static_cast<std::int64_t>(fc.inCount()) - static_cast<std::int64_t>(fc.outCount());
  return {raw, raw > 0 ? static_cast<std::uint64_t>(raw) : 0};
}

std::uint64_t GenderTally::total() const {
  std::uint64_t t = 0;
  for (const auto& [label, count] : counts) t += count;
  return t;
}

} // namespace crowdlens
