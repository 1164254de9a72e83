#include "crowdlens/pipeline.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "crowdlens/fisherfaces.hpp"
#include "crowdlens/haar_cascade.hpp"
#include "crowdlens/hog.hpp"
#include "crowdlens/logging.hpp"

namespace crowdlens {

namespace {

namespace fs = std::filesystem;
using SteadyClock = std::chrono::steady_clock;

double ms_between(SteadyClock::time_point a, SteadyClock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

class PnmDirSource final : public FrameSource {
public:
  explicit PnmDirSource(const std::string& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec))
      fail(Errc::BadUri, "'" + dir + "' is not a directory");
    for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
      if (!entry.is_regular_file()) continue;
      const std::string ext = entry.path().extension().string();
      if (ext == ".pgm" || ext == ".ppm") files_.push_back(entry.path());
    }
    std::sort(files_.begin(), files_.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename() < b.filename(); });
    if (files_.empty())
      log_warn("pnmdir '" + dir + "' contains no .pgm/.ppm frames");
  }

  std::optional<PixelBuffer> next() override {
    if (index_ >= files_.size()) return std::nullopt;
    const fs::path& path = files_[index_++];
    std::ifstream in(path, std::ios::binary);
    if (!in) fail(Errc::SourceFailure, "cannot read frame " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    try {
      return decode_pnm(bytes);
    } catch (const Error& e) {
      fail(Errc::SourceFailure, path.string() + ": " + e.what());
    }
  }

private:
  std::vector<fs::path> files_;
  std::size_t index_ = 0;
};

class RawTcpSource final : public FrameSource {
public:
  RawTcpSource(const std::string& host, const std::string& port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* results = nullptr;
    if (getaddrinfo(host.c_str(), port.c_str(), &hints, &results) != 0 || !results)
      fail(Errc::ConnectFailure, "cannot resolve " + host + ":" + port);
    for (addrinfo* ai = results; ai; ai = ai->ai_next) {
      fd_ = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd_ < 0) continue;
      if (::connect(fd_, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd_);
      fd_ = -1;
    }
    freeaddrinfo(results);
    if (fd_ < 0) fail(Errc::ConnectFailure, "cannot connect to " + host + ":" + port);

    std::uint8_t header[20];
    if (read_full(header, sizeof header) != sizeof header) {
      ::close(fd_);
      fd_ = -1;
      fail(Errc::ConnectFailure, "handshake truncated");
    }
    if (std::memcmp(header, "FRM1", 4) != 0) {
      ::close(fd_);
      fd_ = -1;
      fail(Errc::ConnectFailure, "bad stream magic");
    }
    width_ = read_u32(header + 4);
    height_ = read_u32(header + 8);
    channels_ = read_u32(header + 12);
    fps_ = read_u32(header + 16);
    if (width_ < 1 || height_ < 1 || (channels_ != 1 && channels_ != 3)) {
      ::close(fd_);
      fd_ = -1;
      fail(Errc::ConnectFailure, "invalid stream geometry");
    }
  }

  ~RawTcpSource() override {
    if (fd_ >= 0) ::close(fd_);
  }

  std::optional<PixelBuffer> next() override {
    std::uint8_t lenBuf[8];
    const std::size_t got = read_full(lenBuf, sizeof lenBuf);
    if (got == 0) return std::nullopt; // clean close on a frame boundary
    if (got < sizeof lenBuf) fail(Errc::SourceFailure, "stream truncated in frame header");
    std::uint64_t len = 0;
    for (std::uint8_t b : lenBuf) len = (len << 8) | b;
    const std::uint64_t expected =
        std::uint64_t(width_) * height_ * channels_;
    if (len != expected)
      fail(Errc::SourceFailure, "frame payload " + std::to_string(len) + ", expected " +
                                    std::to_string(expected));
    PixelBuffer buf;
    buf.width = static_cast<int>(width_);
    buf.height = static_cast<int>(height_);
    buf.channels = static_cast<int>(channels_);
    buf.data.resize(len);
    if (read_full(buf.data.data(), len) != len)
      fail(Errc::SourceFailure, "stream truncated mid-frame");
    return buf;
  }

  double declared_fps() const override { return fps_; }

private:
  static std::uint32_t read_u32(const std::uint8_t* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
  }

  std::size_t read_full(void* dst, std::size_t size) const {
    std::size_t total = 0;
    auto* out = static_cast<std::uint8_t*>(dst);
    while (total < size) {
      const ssize_t n = ::read(fd_, out + total, size - total);
      if (n < 0) {
        if (errno == EINTR) continue;
        fail(Errc::SourceFailure, std::string("read: ") + std::strerror(errno));
      }
      if (n == 0) break;
      total += static_cast<std::size_t>(n);
    }
    return total;
  }

  int fd_ = -1;
  std::uint32_t width_ = 0, height_ = 0, channels_ = 0, fps_ = 0;
};

} // namespace

std::unique_ptr<FrameSource> open_source(const std::string& uri) {
  if (uri.rfind("pnmdir:", 0) == 0)
    return std::make_unique<PnmDirSource>(uri.substr(7));
  if (uri.rfind("tcp:", 0) == 0) {
    const std::string rest = uri.substr(4);
    const std::size_t colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == rest.size())
      fail(Errc::BadUri, "expected tcp:<host>:<port>, got '" + uri + "'");
    return std::make_unique<RawTcpSource>(rest.substr(0, colon), rest.substr(colon + 1));
  }
  fail(Errc::BadUri, "unsupported source uri '" + uri + "'");
}

namespace {

// Capacity-1 hand-off between the acquisition and processing contexts;
// an unconsumed frame is replaced (and counted dropped) by a newer one.
struct FrameSlot {
  std::mutex m;
  std::condition_variable cv;
  std::optional<PixelBuffer> frame;
  double decodeMs = 0;
  bool done = false;
  std::uint64_t dropped = 0;
  std::optional<std::string> sourceError;
};

std::int64_t system_now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::map<std::string, std::string> rect_fields(const Rect& r) {
  return {{"x", std::to_string(r.x)},
          {"y", std::to_string(r.y)},
          {"w", std::to_string(r.w)},
          {"h", std::to_string(r.h)}};
}

} // namespace

RunOutput run(const ModeConfig& cfg, FrameSource& src, const RunHooks& hooks) {
  Cascade cascade;
  FisherModel fisher;
  LinearSvm svm;
  try {
    if (cfg.mode == RunMode::Gender) {
      cascade = load_cascade(cfg.cascadePath);
      fisher = load_fisher(cfg.fisherPath);
    } else {
      svm = load_svm(cfg.svmPath);
    }
  } catch (const Error& e) {
    fail(Errc::ModelLoadFailure, e.what());
  }

  std::optional<EventLog> log;
  if (!cfg.logPath.empty()) log.emplace(cfg.logPath);
  const auto wallClock = hooks.clock ? hooks.clock : system_now_ms;

  FaceDetectParams faceParams;
  faceParams.scaleFactor = cfg.scaleStep.value_or(1.25);
  faceParams.stride = cfg.stride.value_or(2);
  faceParams.iouThresh = cfg.iouThresh;
  DetectParams hogParams;
  hogParams.scaleStep = cfg.scaleStep.value_or(1.2);
  hogParams.stride = cfg.stride.value_or(8);
  hogParams.minScore = cfg.minScore;
  hogParams.iouThresh = cfg.iouThresh;

  RunOutput out;
  std::vector<FootfallCounter> counters;
  counters.reserve(cfg.lines.size());
  for (const CountingLine& line : cfg.lines) counters.emplace_back(line);
  Tracker tracker;
  double gate = cfg.gate.value_or(0.0);

  FrameSlot slot;
  std::atomic<bool> noQuit{false};
  const std::atomic<bool>& quit = hooks.quit ? *hooks.quit : noQuit;
  const auto period = std::chrono::duration_cast<SteadyClock::duration>(
      std::chrono::duration<double>(1.0 / cfg.fps));

  std::thread acquisition([&] {
    auto nextTick = SteadyClock::now();
    try {
      while (!quit.load(std::memory_order_relaxed)) {
        const auto d0 = SteadyClock::now();
        std::optional<PixelBuffer> frame = src.next();
        if (!frame) break;
        const double decodeMs = ms_between(d0, SteadyClock::now());
        std::this_thread::sleep_until(nextTick); // offer at the frame rate
        nextTick += period;
        {
          std::lock_guard<std::mutex> lk(slot.m);
          if (slot.frame) ++slot.dropped; // newest frame wins
          slot.frame = std::move(frame);
          slot.decodeMs = decodeMs;
        }
        slot.cv.notify_one();
      }
    } catch (const Error& e) {
      std::lock_guard<std::mutex> lk(slot.m);
      slot.sourceError = e.what();
    }
    {
      std::lock_guard<std::mutex> lk(slot.m);
      slot.done = true;
    }
    slot.cv.notify_one();
  });

  StageLatencies sums;
  std::uint64_t processed = 0;
  std::optional<SteadyClock::time_point> firstFrameAt;
  SteadyClock::time_point lastDoneAt{};
  std::int64_t lastTs = std::numeric_limits<std::int64_t>::min();
  double frameLogMs = 0;

  const auto emit = [&](EventKind kind, std::map<std::string, std::string> data) {
    Event e;
    e.ts = std::max(wallClock(), lastTs);
    lastTs = e.ts;
    e.kind = kind;
    e.data = std::move(data);
    const auto l0 = SteadyClock::now();
    if (log) log->append(e);
    frameLogMs += ms_between(l0, SteadyClock::now());
    if (hooks.onEvent) hooks.onEvent(e);
  };

  bool firstFrame = true;
  for (;;) {
    std::optional<PixelBuffer> buffer;
    double decodeMs = 0;
    {
      std::unique_lock<std::mutex> lk(slot.m);
      // Timed wait so an external quit is noticed within a frame period.
      slot.cv.wait_for(lk, std::min<SteadyClock::duration>(period, std::chrono::milliseconds(20)),
                       [&] { return slot.frame.has_value() || slot.done; });
      if (quit.load(std::memory_order_relaxed)) {
        if (slot.frame) {
          ++slot.dropped; // offered but abandoned at quit
          slot.frame.reset();
        }
        break;
      }
      if (!slot.frame) {
        if (slot.done) break;
        continue;
      }
      buffer = std::move(slot.frame);
      slot.frame.reset();
      decodeMs = slot.decodeMs;
    }

    const auto p0 = SteadyClock::now();
    if (!firstFrameAt) firstFrameAt = p0;
    const GrayImage gray = to_gray(*buffer);
    if (firstFrame) {
      firstFrame = false;
      out.grid = HeatGrid(cfg.gridN, gray.width, gray.height);
      if (gate <= 0.0) gate = 0.1 * std::hypot(double(gray.width), double(gray.height));
    }
    frameLogMs = 0;

    if (cfg.mode == RunMode::Gender) {
      const std::vector<Detection> faces = detect_faces(gray, cascade, faceParams);
      const auto t1 = SteadyClock::now();
      sums.detectMs += ms_between(p0, t1);
      out.faceDetections += faces.size();
      double classifyMs = 0;
      for (const Detection& face : faces) {
        emit(EventKind::Face, rect_fields(face.rect));
        const auto c0 = SteadyClock::now();
        const GrayImage cropd = resize(crop(gray, face.rect), kFaceCropSize, kFaceCropSize);
        const PredictResult pr = predict(fisher, cropd);
        classifyMs += ms_between(c0, SteadyClock::now());
        out.tally.add(pr.label);
        emit(EventKind::Gender, {{"label", pr.label}});
      }
      sums.classifyMs += classifyMs;
    } else {
      const std::vector<Detection> people = detect(gray, svm, hogParams);
      const auto t1 = SteadyClock::now();
      sums.detectMs += ms_between(p0, t1);
      out.personDetections += people.size();

      const auto a0 = SteadyClock::now();
      grid_update(out.grid, people);
      const Tracker::StepResult step = tracker.step(people, gate, cfg.maxMissed);
      sums.analyticsMs += ms_between(a0, SteadyClock::now());

      for (const Detection& person : people) emit(EventKind::Person, rect_fields(person.rect));
      for (const Tracker::Assignment& match : step.matched) {
        const Track* track = tracker.find(match.trackId);
        if (!track || !track->prevCentroid) continue;
        for (FootfallCounter& counter : counters) {
          const CrossDir dir = counter.update(*track);
          if (dir == CrossDir::None) continue;
          emit(EventKind::Crossing, {{"dir", dir == CrossDir::In ? "in" : "out"},
                                     {"line", counter.line().label}});
          emit(EventKind::Occupancy,
               {{"value", std::to_string(occupancy(counter).raw)}});
        }
      }
      for (std::int64_t retired : step.retired)
        for (FootfallCounter& counter : counters) counter.forget(retired);
    }
    sums.decodeMs += decodeMs;
    sums.logMs += frameLogMs;
    ++processed;
    lastDoneAt = SteadyClock::now();
  }
  acquisition.join();

  out.stats.framesProcessed = processed;
  out.stats.framesDropped = slot.dropped;
  out.sourceError = slot.sourceError;
  if (processed > 0) {
    const double n = double(processed);
    out.stats.meanMs = {sums.decodeMs / n, sums.detectMs / n, sums.classifyMs / n,
                        sums.analyticsMs / n, sums.logMs / n};
    const double activeSec =
        std::max(ms_between(*firstFrameAt, lastDoneAt) / 1000.0, 1e-9);
    out.stats.avgFps = n / activeSec;
  }
  for (const FootfallCounter& counter : counters)
    out.lines.push_back({counter.line().label, counter.inCount(), counter.outCount()});
  if (out.sourceError) log_warn("source ended early: " + *out.sourceError);
  return out;
}

} // namespace crowdlens
