#include "crowdlens/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <nlohmann/json.hpp>

namespace crowdlens {

const char* event_kind_name(EventKind k) {
  switch (k) {
  case EventKind::Face: return "face";
  case EventKind::Gender: return "gender";
  case EventKind::Person: return "person";
  case EventKind::Crossing: return "crossing";
  case EventKind::Occupancy: return "occupancy";
  }
  return "?";
}

namespace {

bool parse_kind(const std::string& name, EventKind& out) {
  for (EventKind k : {EventKind::Face, EventKind::Gender, EventKind::Person,
                      EventKind::Crossing, EventKind::Occupancy}) {
    if (name == event_kind_name(k)) {
      out = k;
      return true;
    }
  }
  return false;
}

} // namespace

std::string format_event(const Event& e) {
  std::string line = std::to_string(e.ts);
  line += '\t';
  line += event_kind_name(e.kind);
  line += '\t';
  bool first = true;
  for (const auto& [key, value] : e.data) {
    if (!first) line += ';';
    first = false;
    line += key;
    line += '=';
    line += value;
  }
  line += '\n';
  return line;
}

EventLog::EventLog(const std::string& path)
    : path_(path), lastTs_(std::numeric_limits<std::int64_t>::min()) {
  // Resume the monotonic-timestamp invariant from an existing log.
  std::ifstream probe(path);
  if (probe.good()) {
    const LoadResult existing = load_events(path);
    if (!existing.events.empty()) lastTs_ = existing.events.back().ts;
  }
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) fail(Errc::IoFailure, "cannot open " + path + ": " + std::strerror(errno));
}

EventLog::~EventLog() {
  if (fd_ >= 0) ::close(fd_);
}

void EventLog::append(const Event& e) {
  if (e.ts < lastTs_)
    fail(Errc::NonMonotonicTimestamp, std::to_string(e.ts) + " after " +
                                          std::to_string(lastTs_) + " in " + path_);
  const std::string line = format_event(e);
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + written, line.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      fail(Errc::IoFailure, "write to " + path_ + ": " + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (::fdatasync(fd_) != 0)
    fail(Errc::IoFailure, "fdatasync " + path_ + ": " + std::strerror(errno));
  lastTs_ = e.ts;
}

LoadResult load_events(const std::string& path, std::int64_t tsStart, std::int64_t tsEnd) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoFailure, "cannot read " + path);
  LoadResult result;
  std::string line;
  int lineNumber = 0;
  while (std::getline(in, line)) {
    ++lineNumber;
    if (in.eof()) {
      // getline hit EOF before a newline: the final line is a torn write.
      result.warnings.push_back({lineNumber, "torn final line dropped"});
      break;
    }
    if (line.empty()) continue;
    const std::size_t tab1 = line.find('\t');
    const std::size_t tab2 = tab1 == std::string::npos ? std::string::npos
                                                       : line.find('\t', tab1 + 1);
    if (tab2 == std::string::npos) {
      result.warnings.push_back({lineNumber, "expected two tab separators"});
      continue;
    }
    Event e;
    const std::string_view tsText(line.data(), tab1);
    const auto [ptr, ec] =
        std::from_chars(tsText.data(), tsText.data() + tsText.size(), e.ts);
    if (ec != std::errc() || ptr != tsText.data() + tsText.size()) {
      result.warnings.push_back({lineNumber, "bad timestamp"});
      continue;
    }
    if (!parse_kind(line.substr(tab1 + 1, tab2 - tab1 - 1), e.kind)) {
      result.warnings.push_back({lineNumber, "unknown event kind"});
      continue;
    }
    bool ok = true;
    std::size_t pos = tab2 + 1;
    while (pos < line.size()) {
      std::size_t end = line.find(';', pos);
      if (end == std::string::npos) end = line.size();
      const std::size_t eq = line.find('=', pos);
      if (eq == std::string::npos || eq >= end) {
        ok = false;
        break;
      }
      e.data[line.substr(pos, eq - pos)] = line.substr(eq + 1, end - eq - 1);
      pos = end + 1;
    }
    if (!ok) {
      result.warnings.push_back({lineNumber, "malformed data fields"});
      continue;
    }
    if (e.ts >= tsStart && e.ts < tsEnd) result.events.push_back(std::move(e));
  }
  return result;
}

namespace {

// Floor division for bucketing timestamps that may be negative.
std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if (a % b != 0 && ((a < 0) != (b < 0))) --q;
  return q;
}

} // namespace

Report make_report(const std::vector<Event>& events, int tzOffsetMinutes) {
  Report r;
  r.eventCount = events.size();
  std::int64_t running = 0;
  for (const Event& e : events) {
    switch (e.kind) {
    case EventKind::Crossing: {
      const auto dir = e.data.find("dir");
      const bool isIn = dir != e.data.end() && dir->second == "in";
      if (isIn) {
        ++r.inCrossings;
        ++running;
        const std::int64_t local = e.ts + std::int64_t(tzOffsetMinutes) * 60'000;
        const std::int64_t hour = floor_div(local, 3'600'000);
        r.hourly[((hour % 24) + 24) % 24] += 1;
        const std::int64_t day = floor_div(local, 86'400'000);
        // 1970-01-01 was a Thursday; index 0 = Sunday.
        r.dayOfWeek[((day + 4) % 7 + 7) % 7] += 1;
      } else {
        ++r.outCrossings;
        --running;
      }
      r.occupancySeries.emplace_back(e.ts, running);
      break;
    }
    case EventKind::Gender: {
      const auto label = e.data.find("label");
      if (label != e.data.end()) ++r.genderCounts[label->second];
      break;
    }
    default: break;
    }
  }
  for (int h = 0; h < 24; ++h)
    if (r.hourly[h] > r.hourly[r.peakHour]) r.peakHour = h;
  return r;
}

std::string report_to_json(const Report& r) {
  nlohmann::json j;
  j["hourly"] = r.hourly;
  j["day_of_week"] = r.dayOfWeek;
  j["gender"] = r.genderCounts;
  nlohmann::json fractions = nlohmann::json::object();
  std::uint64_t genderTotal = 0;
  for (const auto& [label, count] : r.genderCounts) genderTotal += count;
  for (const auto& [label, count] : r.genderCounts)
    fractions[label] = double(count) / double(genderTotal);
  j["gender_fraction"] = fractions;
  nlohmann::json series = nlohmann::json::array();
  for (const auto& [ts, value] : r.occupancySeries) series.push_back({ts, value});
  j["occupancy"] = series;
  j["peak_hour"] = r.peakHour;
  j["in_crossings"] = r.inCrossings;
  j["out_crossings"] = r.outCrossings;
  j["events"] = r.eventCount;
  return j.dump();
}

} // namespace crowdlens
