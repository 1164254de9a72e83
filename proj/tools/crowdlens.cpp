#include <CLI11.hpp>

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "crowdlens/analytics.hpp"
#include "crowdlens/event_log.hpp"
#include "crowdlens/fisherfaces.hpp"
#include "crowdlens/haar_cascade.hpp"
#include "crowdlens/hog.hpp"
#include "crowdlens/logging.hpp"
#include "crowdlens/pipeline.hpp"
#include "crowdlens/stats_server.hpp"

namespace fs = std::filesystem;
using namespace crowdlens;

namespace {

std::atomic<bool> g_quit{false};

void handle_signal(int) { g_quit.store(true); }

// Maps Ctrl-C and the 'q' key onto the pipeline quit flag.
void install_quit_handlers() {
  std::signal(SIGINT, handle_signal);
  std::signal(SIGTERM, handle_signal);
  std::thread([] {
    char c;
    while (::read(STDIN_FILENO, &c, 1) == 1)
      if (c == 'q') {
        g_quit.store(true);
        break;
      }
  }).detach();
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoFailure, "cannot read " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

GrayImage load_gray(const std::string& path) { return to_gray(decode_pnm(read_file(path))); }

std::vector<GrayImage> load_window_dir(const std::string& dir, int w, int h) {
  if (!fs::is_directory(dir)) fail(Errc::IoFailure, "'" + dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const fs::directory_entry& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = entry.path().extension().string();
    if (ext == ".pgm" || ext == ".ppm") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<GrayImage> out;
  out.reserve(files.size());
  for (const fs::path& path : files) {
    GrayImage img = load_gray(path.string());
    if (img.width != w || img.height != h) img = resize(img, w, h);
    out.push_back(std::move(img));
  }
  return out;
}

void write_bytes(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoFailure, "cannot write " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  if (!out.flush()) fail(Errc::IoFailure, "write failed: " + path);
}

int cmd_train_cascade(const std::string& posDir, const std::string& negDir,
                      const std::string& outPath, int maxStages, int stepPos, int stepSize) {
  const std::vector<GrayImage> pos = load_window_dir(posDir, kCascadeBaseWindow, kCascadeBaseWindow);
  const std::vector<GrayImage> neg = load_window_dir(negDir, kCascadeBaseWindow, kCascadeBaseWindow);
  TrainCascadeOptions opts;
  opts.maxStages = maxStages;
  opts.stepPos = stepPos;
  opts.stepSize = stepSize;
  const Cascade cascade = train_cascade(pos, neg, opts);
  save_cascade(cascade, outPath);
  std::cout << "stages=" << cascade.stages.size() << " features=" << cascade.features.size()
            << " out=" << outPath << "\n";
  return 0;
}

int cmd_train_fisher(const std::string& dataDir, const std::string& labelsPath,
                     const std::string& outPath) {
  std::ifstream in(labelsPath);
  if (!in) fail(Errc::IoFailure, "cannot read labels file " + labelsPath);
  std::vector<GrayImage> images;
  std::vector<std::string> labels;
  std::string file, label;
  while (in >> file >> label) {
    GrayImage img = load_gray((fs::path(dataDir) / file).string());
    if (img.width != kFaceCropSize || img.height != kFaceCropSize)
      img = resize(img, kFaceCropSize, kFaceCropSize);
    images.push_back(std::move(img));
    labels.push_back(label);
  }
  const auto [xc, cv] = build_matrix(images, labels);
  const FisherModel model = train(xc, cv);
  save_fisher(model, outPath);
  std::cout << "classes=" << model.names.size() << " dims=" << model.w.cols()
            << " out=" << outPath << "\n";
  return 0;
}

int cmd_train_hog(const std::string& posDir, const std::string& negDir,
                  const std::string& outPath, double lambda, int epochs, std::uint64_t seed) {
  std::vector<HogDescriptor> xs;
  std::vector<int> ys;
  for (const GrayImage& img : load_window_dir(posDir, kHogWindowW, kHogWindowH)) {
    xs.push_back(descriptor(img));
    ys.push_back(+1);
  }
  for (const GrayImage& img : load_window_dir(negDir, kHogWindowW, kHogWindowH)) {
    xs.push_back(descriptor(img));
    ys.push_back(-1);
  }
  const LinearSvm svm = svm_train(xs, ys, {lambda, epochs, seed});
  save_svm(svm, outPath);
  std::cout << "samples=" << xs.size() << " objective=" << svm_objective(svm, xs, ys)
            << " out=" << outPath << "\n";
  return 0;
}

int cmd_run(const std::string& configPath) {
  const ModeConfig cfg = parse_config(configPath);
  const std::unique_ptr<FrameSource> src = open_source(cfg.source);
  install_quit_handlers();
  RunHooks hooks;
  hooks.quit = &g_quit;
  const RunOutput out = run(cfg, *src, hooks);
  const PipelineStats& s = out.stats;
  std::cout << "processed=" << s.framesProcessed << " dropped=" << s.framesDropped
            << " fps=" << s.avgFps << " decode_ms=" << s.meanMs.decodeMs
            << " detect_ms=" << s.meanMs.detectMs << " classify_ms=" << s.meanMs.classifyMs
            << " analytics_ms=" << s.meanMs.analyticsMs << " log_ms=" << s.meanMs.logMs << "\n";
  for (const LineStat& line : out.lines)
    std::cout << "line " << line.label << " in=" << line.in << " out=" << line.out << "\n";
  for (const auto& [label, count] : out.tally.counts)
    std::cout << "gender " << label << " count=" << count << "\n";
  if (out.sourceError) {
    log_error("source failure: " + *out.sourceError);
    return 1;
  }
  return 0;
}

int cmd_report(const std::string& logPath, const std::string& bucket, int tz,
               const std::string& format) {
  const LoadResult loaded = load_events(logPath);
  for (const LoadWarning& warning : loaded.warnings)
    log_warn(logPath + ":" + std::to_string(warning.lineNumber) + ": " + warning.message);
  const Report report = make_report(loaded.events, tz);

  const bool tsv = format == "tsv";
  if (bucket == "hour") {
    if (tsv) {
      std::cout << "hour\tcount\n";
      for (int h = 0; h < 24; ++h) std::cout << h << "\t" << report.hourly[h] << "\n";
    } else {
      std::cout << "hour   in-count\n";
      for (int h = 0; h < 24; ++h)
        std::cout << (h < 10 ? " " : "") << h << "     " << report.hourly[h] << "\n";
    }
  } else {
    static const char* days[] = {"sun", "mon", "tue", "wed", "thu", "fri", "sat"};
    if (tsv) {
      std::cout << "day\tcount\n";
      for (int d = 0; d < 7; ++d) std::cout << days[d] << "\t" << report.dayOfWeek[d] << "\n";
    } else {
      std::cout << "day    in-count\n";
      for (int d = 0; d < 7; ++d) std::cout << days[d] << "    " << report.dayOfWeek[d] << "\n";
    }
  }
  if (tsv) {
    for (const auto& [label, count] : report.genderCounts)
      std::cout << "gender\t" << label << "\t" << count << "\n";
    std::cout << "peak_hour\t" << report.peakHour << "\n";
    std::cout << "in\t" << report.inCrossings << "\nout\t" << report.outCrossings << "\n";
  } else {
    std::cout << "\ngender split\n";
    std::uint64_t total = 0;
    for (const auto& [label, count] : report.genderCounts) total += count;
    for (const auto& [label, count] : report.genderCounts)
      std::cout << "  " << label << "  " << count
                << (total ? "  (" + std::to_string(100.0 * count / total) + "%)" : "") << "\n";
    std::cout << "\npeak hour: " << report.peakHour << "\n";
    std::cout << "crossings: in=" << report.inCrossings << " out=" << report.outCrossings
              << "\n";
    const Occupancy last = {report.occupancySeries.empty()
                                ? 0
                                : report.occupancySeries.back().second,
                            0};
    std::cout << "occupancy (raw): " << last.raw << "\n";
  }
  return 0;
}

int cmd_render_heatmap(const std::string& logPath, const std::string& gridPath,
                       const std::string& outPath, int n, int width, int height) {
  HeatGrid grid;
  if (!gridPath.empty()) {
    std::ifstream in(gridPath);
    if (!in) fail(Errc::IoFailure, "cannot read " + gridPath);
    std::string tag;
    int gn = 0, fw = 0, fh = 0;
    if (!(in >> tag >> gn >> fw >> fh) || tag != "HEATGRID1" || gn < 1)
      fail(Errc::IoFailure, "bad heat-grid header in " + gridPath);
    grid = HeatGrid(gn, fw, fh);
    for (int row = 0; row < gn; ++row)
      for (int col = 0; col < gn; ++col)
        if (!(in >> grid.at(col, row))) fail(Errc::IoFailure, "truncated grid in " + gridPath);
  } else {
    if (width < 1 || height < 1)
      fail(Errc::IoFailure, "--width and --height are required with --log");
    grid = HeatGrid(n, width, height);
    const LoadResult loaded = load_events(logPath);
    std::vector<Detection> dets;
    for (const Event& e : loaded.events) {
      if (e.kind != EventKind::Person && e.kind != EventKind::Face) continue;
      Detection d;
      d.rect.x = std::stoi(e.data.at("x"));
      d.rect.y = std::stoi(e.data.at("y"));
      d.rect.w = std::stoi(e.data.at("w"));
      d.rect.h = std::stoi(e.data.at("h"));
      dets.push_back(d);
    }
    grid_update(grid, dets);
  }
  write_bytes(outPath, encode_pnm(render_heat(grid)));
  std::cout << "cells=" << grid.n() << "x" << grid.n() << " total=" << grid.total()
            << " out=" << outPath << "\n";
  return 0;
}

int cmd_serve(const std::string& logPath, int port, const std::string& heatmapPath) {
  StatsServer server(logPath, heatmapPath, port);
  install_quit_handlers();
  std::cerr << "serving on port " << server.port() << " (Ctrl-C or 'q' to stop)\n";
  while (!g_quit.load()) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  return 0;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"crowdlens - face/person analytics engine"};
  app.require_subcommand(1);

  auto* trainCascade = app.add_subcommand("train-cascade", "Train the face cascade");
  std::string tcPos, tcNeg, tcOut;
  int tcStages = 8, tcStepPos = 2, tcStepSize = 2;
  std::uint64_t tcSeed = 1;
  trainCascade->add_option("--pos", tcPos, "Directory of 24x24 positive windows")->required();
  trainCascade->add_option("--neg", tcNeg, "Directory of 24x24 negative windows")->required();
  trainCascade->add_option("--out", tcOut, "Output model path")->required();
  trainCascade->add_option("--max-stages", tcStages, "Maximum cascade stages");
  trainCascade->add_option("--step-pos", tcStepPos, "Feature position subsampling");
  trainCascade->add_option("--step-size", tcStepSize, "Feature size subsampling");
  trainCascade->add_option("--seed", tcSeed, "Unused; training is deterministic");

  auto* trainFisher = app.add_subcommand("train-fisher", "Train the gender classifier");
  std::string tfData, tfLabels, tfOut;
  std::uint64_t tfSeed = 1;
  trainFisher->add_option("--data", tfData, "Directory of face crops")->required();
  trainFisher->add_option("--labels", tfLabels, "Labels file: <filename> <label> per line")
      ->required();
  trainFisher->add_option("--out", tfOut, "Output model path")->required();
  trainFisher->add_option("--seed", tfSeed, "Unused; training is deterministic");

  auto* trainHog = app.add_subcommand("train-hog", "Train the person detector");
  std::string thPos, thNeg, thOut;
  double thLambda = 1e-4;
  int thEpochs = 100;
  std::uint64_t thSeed = 1;
  trainHog->add_option("--pos", thPos, "Directory of 64x128 positive windows")->required();
  trainHog->add_option("--neg", thNeg, "Directory of 64x128 negative windows")->required();
  trainHog->add_option("--out", thOut, "Output model path")->required();
  trainHog->add_option("--lambda", thLambda, "Regularization strength");
  trainHog->add_option("--epochs", thEpochs, "Training epochs");
  trainHog->add_option("--seed", thSeed, "Shuffle seed");

  auto* runCmd = app.add_subcommand("run", "Run a configured pipeline");
  std::string runConfig;
  runCmd->add_option("--config", runConfig, "Run config file")->required();

  auto* reportCmd = app.add_subcommand("report", "Aggregate an event log");
  std::string repLog, repBucket = "hour", repFormat = "text";
  int repTz = 0;
  reportCmd->add_option("--log", repLog, "Event log path")->required();
  reportCmd->add_option("--bucket", repBucket, "hour or dow")
      ->check(CLI::IsMember({"hour", "dow"}));
  reportCmd->add_option("--tz", repTz, "Timezone offset in minutes");
  reportCmd->add_option("--format", repFormat, "text or tsv")
      ->check(CLI::IsMember({"text", "tsv"}));

  auto* renderCmd = app.add_subcommand("render-heatmap", "Render a heat-map P6 image");
  std::string rhLog, rhGrid, rhOut;
  int rhN = 16, rhWidth = 0, rhHeight = 0;
  renderCmd->add_option("--log", rhLog, "Event log to aggregate");
  renderCmd->add_option("--grid", rhGrid, "Serialized HEATGRID1 file");
  renderCmd->add_option("--out", rhOut, "Output .ppm path")->required();
  renderCmd->add_option("--n", rhN, "Grid side");
  renderCmd->add_option("--width", rhWidth, "Frame width (with --log)");
  renderCmd->add_option("--height", rhHeight, "Frame height (with --log)");

  auto* serveCmd = app.add_subcommand("serve", "Serve /stats and /heatmap.ppm");
  std::string svLog, svHeatmap;
  int svPort = 8080;
  serveCmd->add_option("--log", svLog, "Event log path")->required();
  serveCmd->add_option("--port", svPort, "Listen port")->required();
  serveCmd->add_option("--heatmap", svHeatmap, "Heat-map .ppm served at /heatmap.ppm");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e); // prints usage, exit 0
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  }

  try {
    if (trainCascade->parsed())
      return cmd_train_cascade(tcPos, tcNeg, tcOut, tcStages, tcStepPos, tcStepSize);
    if (trainFisher->parsed()) return cmd_train_fisher(tfData, tfLabels, tfOut);
    if (trainHog->parsed()) return cmd_train_hog(thPos, thNeg, thOut, thLambda, thEpochs, thSeed);
    if (runCmd->parsed()) return cmd_run(runConfig);
    if (reportCmd->parsed()) return cmd_report(repLog, repBucket, repTz, repFormat);
    if (renderCmd->parsed()) {
      if (rhLog.empty() && rhGrid.empty()) {
        std::cerr << "usage error: render-heatmap needs --log or --grid\n";
        return 2;
      }
      return cmd_render_heatmap(rhLog, rhGrid, rhOut, rhN, rhWidth, rhHeight);
    }
    if (serveCmd->parsed()) return cmd_serve(svLog, svPort, svHeatmap);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
