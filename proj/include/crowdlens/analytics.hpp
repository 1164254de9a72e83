#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crowdlens/detection.hpp"

namespace crowdlens {

/// n x n visit counters over a frame, zero-initialized.
class HeatGrid {
public:
  HeatGrid() = default;
  HeatGrid(int n, int frameW, int frameH)
      : n_(n), frameW_(frameW), frameH_(frameH), counts_(std::size_t(n) * n, 0) {}

  int n() const { return n_; }
  int frameW() const { return frameW_; }
  int frameH() const { return frameH_; }
  std::uint64_t at(int col, int row) const { return counts_[std::size_t(row) * n_ + col]; }
  std::uint64_t& at(int col, int row) { return counts_[std::size_t(row) * n_ + col]; }
  const std::vector<std::uint64_t>& counts() const { return counts_; }
  std::uint64_t total() const;

private:
  int n_ = 0;
  int frameW_ = 0;
  int frameH_ = 0;
  std::vector<std::uint64_t> counts_;
};

/// Increments the cell under each detection's rect center (clamped to
/// the grid).
void grid_update(HeatGrid& g, const std::vector<Detection>& dets);

/// Per-cell share of all visits, in percent; sums to 100.
std::vector<double> grid_percentages(const HeatGrid& g);

/// Blue-to-red ramp image, one block per cell; block size is the frame
/// size over n rounded down (at least 1 pixel).
PixelBuffer render_heat(const HeatGrid& g);

/// Frame with the heat ramp alpha-blended on top, for live inspection.
PixelBuffer render_overlay(const GrayImage& frame, const HeatGrid& g, double alpha = 0.4);

struct Point {
  double x = 0;
  double y = 0;
};

/// Finite segment people are counted across. Orient p1 -> p2 so that
/// "in" is the negative-to-positive side transition.
struct CountingLine {
  Point p1;
  Point p2;
  std::string label;
};

/// Which side of the (infinite) line p lies on: -1, 0, or +1.
int line_side(const CountingLine& line, const Point& p);

struct Track {
  std::int64_t id = 0;
  Point centroid;
  std::optional<Point> prevCentroid;
  int age = 0;
  int missed = 0;
};

enum class CrossDir { None, In, Out };

/// Crossing test on one motion step: sides of prev and curr must differ
/// strictly and the motion segment must intersect the counting segment.
CrossDir crossing_check(const Track& t, const CountingLine& line);

/// Greedy globally-nearest-pair association of detections to tracks.
class Tracker {
public:
  struct Assignment {
    std::int64_t trackId;
    int detIndex;
  };
  struct StepResult {
    std::vector<Assignment> matched;
    std::vector<std::int64_t> spawned;
    std::vector<std::int64_t> retired;
  };

  /// Matches the closest (track, detection) pairs within the gate,
  /// repeatedly. Unmatched detections spawn tracks with fresh increasing
  /// ids; unmatched tracks accumulate misses and retire past maxMissed.
  StepResult step(const std::vector<Detection>& dets, double gate, int maxMissed = 5);

  const std::vector<Track>& tracks() const { return tracks_; }
  const Track* find(std::int64_t id) const;

private:
  std::vector<Track> tracks_;
  std::int64_t nextId_ = 0;
};

/// Directional tally over one counting line. Keeps a last-known-side
/// memory per track so touching the line exactly (side 0) defers the
/// decision instead of double counting.
class FootfallCounter {
public:
  explicit FootfallCounter(CountingLine line) : line_(std::move(line)) {}

  /// Feeds one matched track update; returns the crossing, if any.
  CrossDir update(const Track& t);
  /// Drops side memory for a retired track.
  void forget(std::int64_t trackId) { lastSide_.erase(trackId); }

  const CountingLine& line() const { return line_; }
  std::uint64_t inCount() const { return in_; }
  std::uint64_t outCount() const { return out_; }

private:
  CountingLine line_;
  std::uint64_t in_ = 0;
  std::uint64_t out_ = 0;
  std::map<std::int64_t, int> lastSide_;
};

struct Occupancy {
  std::int64_t raw = 0;
  std::uint64_t clamped = 0;
};

/// in - out, plus the at-least-zero reading.
Occupancy occupancy(const FootfallCounter& fc);

/// Monotone per-label counters.
struct GenderTally {
  std::map<std::string, std::uint64_t> counts;

  void add(const std::string& label) { ++counts[label]; }
  std::uint64_t total() const;
};

} // namespace crowdlens
