#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "crowdlens/error.hpp"

namespace crowdlens {

enum class EventKind { Face, Gender, Person, Crossing, Occupancy };

const char* event_kind_name(EventKind k);

/// One analytics record: millisecond timestamp, kind, and kind-specific
/// key=value fields (gender: label; crossing: line + dir; person/face:
/// x,y,w,h; occupancy: value).
struct Event {
  std::int64_t ts = 0;
  EventKind kind = EventKind::Person;
  std::map<std::string, std::string> data;

  bool operator==(const Event&) const = default;
};

/// Append handle over the tab-separated line log. Each append is flushed
/// to stable storage before returning; timestamps must be non-decreasing
/// within one log.
class EventLog {
public:
  explicit EventLog(const std::string& path);
  ~EventLog();
  EventLog(const EventLog&) = delete;
  EventLog& operator=(const EventLog&) = delete;

  void append(const Event& e);
  const std::string& path() const { return path_; }

private:
  std::string path_;
  int fd_ = -1;
  std::int64_t lastTs_;
};

std::string format_event(const Event& e);

struct LoadWarning {
  int lineNumber = 0;
  std::string message;
};

struct LoadResult {
  std::vector<Event> events;
  std::vector<LoadWarning> warnings;
};

/// Reads events with ts in [tsStart, tsEnd) in file order. Malformed
/// lines (including a torn final line) become warnings, not errors.
LoadResult load_events(const std::string& path,
                       std::int64_t tsStart = std::numeric_limits<std::int64_t>::min(),
                       std::int64_t tsEnd = std::numeric_limits<std::int64_t>::max());

/// Aggregated views over one event range. Footfall histograms count "in"
/// crossings only; the occupancy series is the running in - out.
struct Report {
  std::array<std::uint64_t, 24> hourly{};
  std::array<std::uint64_t, 7> dayOfWeek{}; // 0 = Sunday
  std::map<std::string, std::uint64_t> genderCounts;
  std::vector<std::pair<std::int64_t, std::int64_t>> occupancySeries;
  int peakHour = 0;
  std::uint64_t inCrossings = 0;
  std::uint64_t outCrossings = 0;
  std::uint64_t eventCount = 0;
};

/// Buckets by local time: tzOffsetMinutes is added to the UTC timestamps.
Report make_report(const std::vector<Event>& events, int tzOffsetMinutes = 0);

std::string report_to_json(const Report& r);

} // namespace crowdlens
