#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crowdlens/detection.hpp"
#include "crowdlens/image.hpp"

namespace crowdlens {

inline constexpr int kCascadeBaseWindow = 24;

enum class HaarKind {
  TwoRectH,   // white left, black right
  TwoRectV,   // white top, black bottom
  ThreeRectH, // white outer thirds, black middle (double weight)
  ThreeRectV,
  FourRect, // white on the main diagonal
};

const char* haar_kind_token(HaarKind k);

/// Rectangle probe on the 24x24 reference window. The base rect is
/// split into sub-rects by kind; the split sizes must divide evenly
/// (w even, h even, or thirds, depending on kind).
struct HaarFeature {
  HaarKind kind = HaarKind::TwoRectH;
  Rect base;

  bool operator==(const HaarFeature&) const = default;
};

/// One-feature threshold rule: predicts +1 when
/// polarity * (value - threshold) >= 0, else -1.
struct WeakStump {
  int featureIndex = 0;
  double threshold = 0.0;
  int polarity = +1;

  int predict(double value) const {
    return polarity * (value - threshold) >= 0.0 ? +1 : -1;
  }
};

struct BoostRound {
  WeakStump stump;
  double alpha = 0.0;
  double epsilon = 0.0; // weighted error the round was trained at
};

/// Weighted vote H(x) = sign(sum_t alpha_t h_t(x) - shift), sign(0) = +1.
struct StrongClassifier {
  std::vector<BoostRound> rounds;
  double shift = 0.0;

  double margin(std::span<const double> featureValues) const;
};

/// Early-rejection chain of strong classifiers over one feature table.
/// A stage's shift is its pass threshold.
struct Cascade {
  int baseWindow = kCascadeBaseWindow;
  std::vector<HaarFeature> features;
  std::vector<StrongClassifier> stages;
};

struct LabeledSample {
  std::vector<double> values; // one value per enumerated feature
  int label = +1;             // -1 or +1
};

/// All features of every kind fitting the base window, kind-major then
/// y, x, h, w. stepPos subsamples positions; stepSize subsamples the
/// size multiplier (1, 1+stepSize, 1+2*stepSize, ...).
std::vector<HaarFeature> enumerate_features(int base = kCascadeBaseWindow, int stepPos = 1,
                                            int stepSize = 1);

/// Feature response at the given window origin and scale: white sums
/// minus black sums (middle rect doubled for three-rect kinds, so a
/// constant window scores 0), divided by the window's intensity standard
/// deviation clamped below at 1. Sub-rect sizes are scaled and rounded
/// to the nearest pixel.
double eval_feature(const IntegralImage& ii, const HaarFeature& f, int originX, int originY,
                    double scale = 1.0);

/// Best decision stump for a single feature: scans the midpoints of
/// consecutive sorted distinct values plus +-infinity, both polarities.
/// Ties resolve to the smaller threshold, then polarity +1.
std::pair<WeakStump, double> best_stump(std::span<const double> values,
                                        std::span<const double> weights,
                                        std::span<const int> labels, int featureIndex = 0);

/// Per-round diagnostics captured during boosting.
struct AdaboostTrace {
  struct Round {
    std::vector<double> weightsAfter; // normalized distribution after the update
    double rawEpsilon = 0.0;          // unclamped weighted error of the pick
  };
  std::vector<Round> rounds;
};

/// AdaBoost over decision stumps: uniform initial weights, per round the
/// minimum-error stump across all features, exponential reweighting with
/// normalization. Epsilon is clamped to [1e-10, 0.5 - 1e-10] before the
/// alpha computation. Stops early when no stump beats chance or the
/// ensemble reaches zero training error.
StrongClassifier adaboost_train(const std::vector<LabeledSample>& samples, int maxRounds,
                                AdaboostTrace* trace = nullptr);

/// sign(margin) with sign(0) = +1. Throws MissingFeature when a stump
/// references a value index outside featureValues.
int classify(const StrongClassifier& sc, std::span<const double> featureValues);

struct CascadeGoals {
  double minDetect = 0.995;
  double maxFalsePos = 0.5;
};

struct TrainCascadeOptions {
  CascadeGoals goals;
  int maxStages = 8;
  int stepPos = 2;
  int stepSize = 2;
  int maxRoundsPerStage = 100;
};

/// Trains staged classifiers on 24x24 windows: each stage grows rounds
/// until, with its shift lowered to keep >= minDetect of the positives,
/// at most maxFalsePos of the surviving negatives still pass. Negatives
/// passing a stage feed the next one.
Cascade train_cascade(const std::vector<GrayImage>& pos, const std::vector<GrayImage>& neg,
                      const TrainCascadeOptions& opts = {});

struct FaceDetectParams {
  double scaleFactor = 1.25;
  int stride = 2;
  double iouThresh = 0.45;
};

/// Windows evaluated per stage, for short-circuit checks.
struct CascadeEvalCounters {
  std::vector<std::uint64_t> stageWindows;
};

/// Multi-scale sliding-window scan; a window must pass every stage and
/// scores by its final-stage margin. Overlaps are merged by greedy NMS.
std::vector<Detection> detect_faces(const GrayImage& img, const Cascade& c,
                                    const FaceDetectParams& params = {},
                                    CascadeEvalCounters* counters = nullptr);

void save_cascade(const Cascade& c, const std::string& path);
Cascade load_cascade(const std::string& path);

} // namespace crowdlens
