#include "crowdlens/haar_cascade.hpp"

#include "crowdlens/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace crowdlens {

const char* haar_kind_token(HaarKind k) {
  switch (k) {
  case HaarKind::TwoRectH: return "2h";
  case HaarKind::TwoRectV: return "2v";
  case HaarKind::ThreeRectH: return "3h";
  case HaarKind::ThreeRectV: return "3v";
  case HaarKind::FourRect: return "4r";
  }
  return "?";
}

namespace {

constexpr HaarKind kAllKinds[] = {HaarKind::TwoRectH, HaarKind::TwoRectV, HaarKind::ThreeRectH,
                                  HaarKind::ThreeRectV, HaarKind::FourRect};

// Unit cell of each kind; sizes are multiples of these.
void kind_units(HaarKind k, int& uw, int& uh) {
  switch (k) {
  case HaarKind::TwoRectH: uw = 2; uh = 1; break;
  case HaarKind::TwoRectV: uw = 1; uh = 2; break;
  case HaarKind::ThreeRectH: uw = 3; uh = 1; break;
  case HaarKind::ThreeRectV: uw = 1; uh = 3; break;
  case HaarKind::FourRect: uw = 2; uh = 2; break;
  }
}

struct WeightedRect {
  Rect r;
  double weight;
};

// Scaled sub-rects relative to the window origin. Sizes scale from the
// unit split so white and black masses stay balanced at every scale.
// areaRatio is the scaled white mass over the unit white mass; dividing
// responses by it keeps them comparable to 24x24 training values at any
// scale (it is exactly 1 at scale 1).
void split_feature(const HaarFeature& f, double scale, WeightedRect out[4], int& count,
                   double& areaRatio) {
  const int bx = static_cast<int>(std::lround(f.base.x * scale));
  const int by = static_cast<int>(std::lround(f.base.y * scale));
  const auto dim = [&](int v, int parts) {
    return std::max(1, static_cast<int>(std::lround(v * scale / parts)));
  };
  switch (f.kind) {
  case HaarKind::TwoRectH: {
    const int hw = dim(f.base.w, 2), bh = dim(f.base.h, 1);
    out[0] = {{bx, by, hw, bh}, +1.0};
    out[1] = {{bx + hw, by, hw, bh}, -1.0};
    count = 2;
    break;
  }
  case HaarKind::TwoRectV: {
    const int bw = dim(f.base.w, 1), hh = dim(f.base.h, 2);
    out[0] = {{bx, by, bw, hh}, +1.0};
    out[1] = {{bx, by + hh, bw, hh}, -1.0};
    count = 2;
    break;
  }
  case HaarKind::ThreeRectH: {
    const int tw = dim(f.base.w, 3), bh = dim(f.base.h, 1);
    out[0] = {{bx, by, tw, bh}, +1.0};
    out[1] = {{bx + tw, by, tw, bh}, -2.0};
    out[2] = {{bx + 2 * tw, by, tw, bh}, +1.0};
    count = 3;
    break;
  }
  case HaarKind::ThreeRectV: {
    const int bw = dim(f.base.w, 1), th = dim(f.base.h, 3);
    out[0] = {{bx, by, bw, th}, +1.0};
    out[1] = {{bx, by + th, bw, th}, -2.0};
    out[2] = {{bx, by + 2 * th, bw, th}, +1.0};
    count = 3;
    break;
  }
  case HaarKind::FourRect: {
    const int hw = dim(f.base.w, 2), hh = dim(f.base.h, 2);
    out[0] = {{bx, by, hw, hh}, +1.0};
    out[1] = {{bx + hw, by, hw, hh}, -1.0};
    out[2] = {{bx, by + hh, hw, hh}, -1.0};
    out[3] = {{bx + hw, by + hh, hw, hh}, +1.0};
    count = 4;
    break;
  }
  }
  if (scale == 1.0) {
    areaRatio = 1.0;
    return;
  }
  // White mass of the unit split: half, two thirds, or half the base.
  const double unitWhite = f.kind == HaarKind::ThreeRectH || f.kind == HaarKind::ThreeRectV
                               ? 2.0 * double(f.base.w) * f.base.h / 3.0
                               : double(f.base.w) * f.base.h / 2.0;
  double scaledWhite = 0;
  for (int i = 0; i < count; ++i)
    if (out[i].weight > 0) scaledWhite += double(out[i].r.w) * out[i].r.h;
  areaRatio = std::max(scaledWhite / unitWhite, 1e-12);
}

// Standard deviation of the window's intensity, clamped below at 1.
double window_std(const IntegralImage& ii, const Rect& win) {
  const double n = double(win.w) * win.h;
  const double s1 = double(ii.sum(win));
  const double s2 = double(ii.sum_sq(win));
  const double mean = s1 / n;
  const double var = std::max(s2 / n - mean * mean, 0.0);
  return std::max(std::sqrt(var), 1.0);
}

} // namespace

std::vector<HaarFeature> enumerate_features(int base, int stepPos, int stepSize) {
  std::vector<HaarFeature> out;
  for (HaarKind kind : kAllKinds) {
    int uw = 0, uh = 0;
    kind_units(kind, uw, uh);
    for (int y = 0; y < base; y += stepPos) {
      for (int x = 0; x < base; x += stepPos) {
        for (int hm = 1; uh * hm + y <= base; hm += stepSize) {
          const int h = uh * hm;
          for (int wm = 1; uw * wm + x <= base; wm += stepSize) {
            const int w = uw * wm;
            out.push_back({kind, {x, y, w, h}});
          }
        }
      }
    }
  }
  return out;
}

double eval_feature(const IntegralImage& ii, const HaarFeature& f, int originX, int originY,
                    double scale) {
  WeightedRect parts[4];
  int count = 0;
  double areaRatio = 1.0;
  split_feature(f, scale, parts, count, areaRatio);
  double raw = 0;
  for (int i = 0; i < count; ++i) {
    Rect r = parts[i].r;
    r.x += originX;
    r.y += originY;
    raw += parts[i].weight * double(ii.sum(r));
  }
  const int win = std::max(1, static_cast<int>(std::lround(kCascadeBaseWindow * scale)));
  return raw / (window_std(ii, {originX, originY, win, win}) * areaRatio);
}

std::pair<WeakStump, double> best_stump(std::span<const double> values,
                                        std::span<const double> weights,
                                        std::span<const int> labels, int featureIndex) {
  const std::size_t n = values.size();
  if (n < 2 || weights.size() != n || labels.size() != n)
    fail(Errc::DegenerateInput, "need >= 2 samples with matching weights/labels");
  bool hasPos = false, hasNeg = false;
  for (int y : labels) (y > 0 ? hasPos : hasNeg) = true;
  if (!hasPos || !hasNeg) fail(Errc::DegenerateInput, "all labels equal");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return values[a] < values[b]; });

  // prefixPos[k] = weight of positives among the k smallest values.
  std::vector<double> prefixPos(n + 1, 0.0), prefixNeg(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const int i = order[k];
    prefixPos[k + 1] = prefixPos[k] + (labels[i] > 0 ? weights[i] : 0.0);
    prefixNeg[k + 1] = prefixNeg[k] + (labels[i] > 0 ? 0.0 : weights[i]);
  }
  const double totalPos = prefixPos[n];
  const double totalNeg = prefixNeg[n];

  WeakStump best{featureIndex, -std::numeric_limits<double>::infinity(), +1};
  double bestEps = std::numeric_limits<double>::infinity();
  // k = samples strictly below the threshold; theta enumerated ascending,
  // polarity +1 first, improvement strict -> spec's tie-break rule.
  const auto consider = [&](double theta, std::size_t k) {
    const double epsPlus = prefixPos[k] + (totalNeg - prefixNeg[k]);
    if (epsPlus < bestEps) {
      bestEps = epsPlus;
      best = {featureIndex, theta, +1};
    }
    const double epsMinus = prefixNeg[k] + (totalPos - prefixPos[k]);
    if (epsMinus < bestEps) {
      bestEps = epsMinus;
      best = {featureIndex, theta, -1};
    }
  };

  consider(-std::numeric_limits<double>::infinity(), 0);
  for (std::size_t k = 1; k < n; ++k) {
    const double lo = values[order[k - 1]];
    const double hi = values[order[k]];
    if (lo == hi) continue;
    consider(lo + (hi - lo) / 2.0, k);
  }
  consider(std::numeric_limits<double>::infinity(), n);
  return {best, bestEps};
}

double StrongClassifier::margin(std::span<const double> featureValues) const {
  double sum = 0;
  for (const BoostRound& r : rounds) {
    if (static_cast<std::size_t>(r.stump.featureIndex) >= featureValues.size())
      fail(Errc::MissingFeature, "stump references feature " +
                                     std::to_string(r.stump.featureIndex) + " of " +
                                     std::to_string(featureValues.size()));
    sum += r.alpha * r.stump.predict(featureValues[r.stump.featureIndex]);
  }
  return sum - shift;
}

int classify(const StrongClassifier& sc, std::span<const double> featureValues) {
  return sc.margin(featureValues) >= 0.0 ? +1 : -1;
}

namespace {

constexpr double kEpsFloor = 1e-10;

struct StumpPick {
  WeakStump stump;
  double epsilon;
};

// Minimum-error stump across all feature columns; ties keep the lowest
// feature index (best_stump already fixes ties within a column).
StumpPick pick_stump(const std::vector<LabeledSample>& samples,
                     std::span<const double> weights, std::span<const int> labels) {
  const std::size_t featureCount = samples[0].values.size();
  std::vector<double> column(samples.size());
  StumpPick best{{}, std::numeric_limits<double>::infinity()};
  for (std::size_t f = 0; f < featureCount; ++f) {
    for (std::size_t i = 0; i < samples.size(); ++i) column[i] = samples[i].values[f];
    auto [stump, eps] = best_stump(column, weights, labels, static_cast<int>(f));
    if (eps < best.epsilon) best = {stump, eps};
  }
  return best;
}

} // namespace

StrongClassifier adaboost_train(const std::vector<LabeledSample>& samples, int maxRounds,
                                AdaboostTrace* trace) {
  const std::size_t n = samples.size();
  if (n < 2) fail(Errc::DegenerateInput, "need >= 2 samples");
  if (maxRounds < 1) fail(Errc::DegenerateInput, "need >= 1 round");
  const std::size_t featureCount = samples[0].values.size();
  bool hasPos = false, hasNeg = false;
  for (const LabeledSample& s : samples) {
    if (s.values.size() != featureCount) fail(Errc::DimMismatch, "feature row length varies");
    if (s.label == +1) hasPos = true;
    else if (s.label == -1) hasNeg = true;
    else fail(Errc::DegenerateInput, "labels must be -1 or +1");
  }
  if (!hasPos || !hasNeg) fail(Errc::DegenerateInput, "both labels must be present");

  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = samples[i].label;
  std::vector<double> weights(n, 1.0 / double(n));
  std::vector<double> margins(n, 0.0);

  StrongClassifier sc;
  for (int round = 0; round < maxRounds; ++round) {
    const StumpPick pick = pick_stump(samples, weights, labels);
    if (pick.epsilon >= 0.5) break; // no stump beats chance
    const double eps = std::clamp(pick.epsilon, kEpsFloor, 0.5 - kEpsFloor);
    const double alpha = 0.5 * std::log((1.0 - eps) / eps);
    sc.rounds.push_back({pick.stump, alpha, eps});

    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const int h = pick.stump.predict(samples[i].values[pick.stump.featureIndex]);
      weights[i] *= std::exp(-alpha * labels[i] * h);
      margins[i] += alpha * h;
      sum += weights[i];
    }
    for (double& w : weights) w /= sum;
    if (trace) trace->rounds.push_back({weights, pick.epsilon});

    std::size_t wrong = 0;
    for (std::size_t i = 0; i < n; ++i)
      if ((margins[i] >= 0.0 ? +1 : -1) != labels[i]) ++wrong;
    if (wrong == 0) break;
  }
  if (sc.rounds.empty())
    fail(Errc::DegenerateInput, "no stump performed better than chance");
  return sc;
}

namespace {

// Margins of every sample under the stage's current rounds (shift ignored).
std::vector<double> raw_margins(const StrongClassifier& sc,
                                const std::vector<LabeledSample>& samples) {
  std::vector<double> m(samples.size(), 0.0);
  for (const BoostRound& r : sc.rounds)
    for (std::size_t i = 0; i < samples.size(); ++i)
      m[i] += r.alpha * r.stump.predict(samples[i].values[r.stump.featureIndex]);
  return m;
}

} // namespace

Cascade train_cascade(const std::vector<GrayImage>& pos, const std::vector<GrayImage>& neg,
                      const TrainCascadeOptions& opts) {
  if (pos.size() < 20 || neg.size() < 20)
    fail(Errc::InsufficientData, "need >= 20 samples per class, got " +
                                     std::to_string(pos.size()) + " pos / " +
                                     std::to_string(neg.size()) + " neg");
  for (const std::vector<GrayImage>* set : {&pos, &neg})
    for (const GrayImage& img : *set)
      if (img.width != kCascadeBaseWindow || img.height != kCascadeBaseWindow)
        fail(Errc::DimMismatch, "training windows must be 24x24");

  Cascade cascade;
  cascade.features = enumerate_features(kCascadeBaseWindow, opts.stepPos, opts.stepSize);

  // Feature values are fixed per window; compute the full table once.
  const auto featurize = [&](const GrayImage& img) {
    const IntegralImage ii(img);
    std::vector<double> row(cascade.features.size());
    for (std::size_t f = 0; f < cascade.features.size(); ++f)
      row[f] = eval_feature(ii, cascade.features[f], 0, 0, 1.0);
    return row;
  };
  std::vector<std::vector<double>> posRows(pos.size()), negRows(neg.size());
  for (std::size_t i = 0; i < pos.size(); ++i) posRows[i] = featurize(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i) negRows[i] = featurize(neg[i]);

  std::vector<std::size_t> survivors(neg.size());
  std::iota(survivors.begin(), survivors.end(), 0);

  for (int stage = 0; stage < opts.maxStages && !survivors.empty(); ++stage) {
    std::vector<LabeledSample> samples;
    samples.reserve(pos.size() + survivors.size());
    for (const auto& row : posRows) samples.push_back({row, +1});
    for (std::size_t i : survivors) samples.push_back({negRows[i], -1});

    std::vector<int> labels(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) labels[i] = samples[i].label;
    std::vector<double> weights(samples.size(), 1.0 / double(samples.size()));

    StrongClassifier sc;
    double shift = 0;
    bool met = false;
    while (static_cast<int>(sc.rounds.size()) < opts.maxRoundsPerStage) {
      const StumpPick pick = pick_stump(samples, weights, labels);
      if (pick.epsilon >= 0.5) break;
      const double eps = std::clamp(pick.epsilon, kEpsFloor, 0.5 - kEpsFloor);
      const double alpha = 0.5 * std::log((1.0 - eps) / eps);
      sc.rounds.push_back({pick.stump, alpha, eps});
      double sum = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const int h = pick.stump.predict(samples[i].values[pick.stump.featureIndex]);
        weights[i] *= std::exp(-alpha * labels[i] * h);
        sum += weights[i];
      }
      for (double& w : weights) w /= sum;

      // Lower the stage shift until >= minDetect positives pass, then
      // test the false-positive goal on the surviving negatives.
      const std::vector<double> margins = raw_margins(sc, samples);
      std::vector<double> posMargins(margins.begin(), margins.begin() + pos.size());
      std::sort(posMargins.begin(), posMargins.end());
      const std::size_t allowedMisses = static_cast<std::size_t>(
          (1.0 - opts.goals.minDetect) * double(pos.size()) + 1e-9);
      shift = posMargins[allowedMisses];
      std::size_t falsePos = 0;
      for (std::size_t i = pos.size(); i < samples.size(); ++i)
        if (margins[i] >= shift) ++falsePos;
      if (double(falsePos) <= opts.goals.maxFalsePos * double(survivors.size())) {
        met = true;
        break;
      }
    }
    if (sc.rounds.empty()) {
      if (cascade.stages.empty())
        fail(Errc::DegenerateInput, "first stage found no stump better than chance");
      break;
    }
    sc.shift = shift;
    cascade.stages.push_back(sc);

    // Only negatives this stage still accepts feed the next stage.
    std::vector<std::size_t> remaining;
    for (std::size_t i : survivors) {
      double m = 0;
      for (const BoostRound& r : sc.rounds)
        m += r.alpha * r.stump.predict(negRows[i][r.stump.featureIndex]);
      if (m >= shift) remaining.push_back(i);
    }
    survivors = std::move(remaining);
    if (met && survivors.empty()) break;
  }
  if (cascade.stages.empty()) fail(Errc::DegenerateInput, "no stage could be trained");
  return cascade;
}

std::vector<Detection> detect_faces(const GrayImage& img, const Cascade& cascade,
                                    const FaceDetectParams& params,
                                    CascadeEvalCounters* counters) {
  if (img.width < cascade.baseWindow || img.height < cascade.baseWindow)
    fail(Errc::ImageTooSmall, std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  ", need at least " + std::to_string(cascade.baseWindow) +
                                  " square");
  if (cascade.stages.empty()) fail(Errc::ModelLoadFailure, "cascade has no stages");
  if (counters) counters->stageWindows.assign(cascade.stages.size(), 0);

  const IntegralImage ii(img);
  std::vector<Detection> all;

  for (int level = 0;; ++level) {
    const double scale = std::pow(params.scaleFactor, level);
    const int win = static_cast<int>(std::lround(cascade.baseWindow * scale));
    if (win > img.width || win > img.height) break;

    // Pre-scale every feature once per level; track how far any sub-rect
    // reaches past the origin so edge windows never index out of bounds.
    std::vector<std::array<WeightedRect, 4>> parts(cascade.features.size());
    std::vector<int> counts(cascade.features.size(), 0);
    std::vector<double> areaRatios(cascade.features.size(), 1.0);
    int reachX = win, reachY = win;
    for (std::size_t f = 0; f < cascade.features.size(); ++f) {
      split_feature(cascade.features[f], scale, parts[f].data(), counts[f], areaRatios[f]);
      for (int i = 0; i < counts[f]; ++i) {
        reachX = std::max(reachX, parts[f][i].r.x + parts[f][i].r.w);
        reachY = std::max(reachY, parts[f][i].r.y + parts[f][i].r.h);
      }
    }

    for (int y = 0; y + reachY <= img.height; y += params.stride) {
      for (int x = 0; x + reachX <= img.width; x += params.stride) {
        const double invStd = 1.0 / window_std(ii, {x, y, win, win});
        double margin = 0;
        bool rejected = false;
        for (std::size_t s = 0; s < cascade.stages.size() && !rejected; ++s) {
          if (counters) ++counters->stageWindows[s];
          const StrongClassifier& stage = cascade.stages[s];
          margin = 0;
          for (const BoostRound& r : stage.rounds) {
            const auto& fp = parts[r.stump.featureIndex];
            double raw = 0;
            for (int i = 0; i < counts[r.stump.featureIndex]; ++i) {
              Rect rr = fp[i].r;
              rr.x += x;
              rr.y += y;
              raw += fp[i].weight * double(ii.sum(rr));
            }
            margin += r.alpha * r.stump.predict(raw * invStd / areaRatios[r.stump.featureIndex]);
          }
          margin -= stage.shift;
          rejected = margin < 0.0;
        }
        if (!rejected) all.push_back({{x, y, win, win}, margin});
      }
    }
  }
  // Scan order is (scale, y, x); NMS then resolves by score.
  return nms(std::move(all), params.iouThresh);
}

void save_cascade(const Cascade& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoFailure, "cannot write " + path);
  out << "CASCADE1\n" << c.baseWindow << "\n";
  for (const StrongClassifier& stage : c.stages) {
    out << stage.rounds.size() << " " << format_double(stage.shift) << "\n";
    for (const BoostRound& r : stage.rounds) {
      const HaarFeature& f = c.features[r.stump.featureIndex];
      out << format_double(r.alpha) << " " << haar_kind_token(f.kind) << " " << f.base.x << " "
          << f.base.y << " " << f.base.w << " " << f.base.h << " "
          << format_double(r.stump.threshold) << " " << r.stump.polarity << "\n";
    }
  }
  if (!out.flush()) fail(Errc::IoFailure, "write failed: " + path);
}

namespace {

HaarKind parse_kind(const std::string& token, const std::string& path) {
  for (HaarKind k : kAllKinds)
    if (token == haar_kind_token(k)) return k;
  fail(Errc::IoFailure, "unknown feature kind '" + token + "' in " + path);
}

// Model files may hold +-inf thresholds; iostream float parsing of "inf"
// is not reliable across standard libraries, strtod is.
double parse_double(const std::string& token, const std::string& path) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') fail(Errc::IoFailure, "bad number '" + token + "' in " + path);
  return v;
}

} // namespace

Cascade load_cascade(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot read " + path);
  std::string tag;
  Cascade c;
  if (!(in >> tag) || tag != "CASCADE1") fail(Errc::IoFailure, "bad cascade header in " + path);
  if (!(in >> c.baseWindow) || c.baseWindow < 1)
    fail(Errc::IoFailure, "bad base window in " + path);
  std::size_t roundCount = 0;
  std::string shiftTok;
  while (in >> roundCount >> shiftTok) {
    StrongClassifier stage;
    stage.shift = parse_double(shiftTok, path);
    for (std::size_t i = 0; i < roundCount; ++i) {
      std::string alphaTok, kindTok, thresholdTok;
      HaarFeature f;
      int polarity = 0;
      if (!(in >> alphaTok >> kindTok >> f.base.x >> f.base.y >> f.base.w >> f.base.h >>
            thresholdTok >> polarity))
        fail(Errc::IoFailure, "truncated stage in " + path);
      f.kind = parse_kind(kindTok, path);
      WeakStump stump;
      stump.featureIndex = static_cast<int>(c.features.size());
      stump.threshold = parse_double(thresholdTok, path);
      stump.polarity = polarity;
      c.features.push_back(f);
      stage.rounds.push_back({stump, parse_double(alphaTok, path), 0.0});
    }
    if (stage.rounds.empty()) fail(Errc::IoFailure, "empty stage in " + path);
    c.stages.push_back(std::move(stage));
  }
  if (c.stages.empty()) fail(Errc::IoFailure, "cascade has no stages in " + path);
  return c;
}

} // namespace crowdlens
