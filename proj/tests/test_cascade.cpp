#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>

#include "crowdlens/haar_cascade.hpp"
#include "synthetic.hpp"

using namespace crowdlens;

namespace {

GrayImage constant_image(int w, int h, std::uint8_t v) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.luma.assign(std::size_t(w) * h, v);
  return img;
}

// Exhaustive stump search: every midpoint threshold (plus +-inf), both
// polarities, straight from the definition.
std::pair<WeakStump, double> brute_best_stump(const std::vector<double>& values,
                                              const std::vector<double>& weights,
                                              const std::vector<int>& labels) {
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  std::vector<double> thresholds{-std::numeric_limits<double>::infinity()};
  for (std::size_t i = 1; i < sorted.size(); ++i)
    thresholds.push_back(sorted[i - 1] + (sorted[i] - sorted[i - 1]) / 2.0);
  thresholds.push_back(std::numeric_limits<double>::infinity());

  WeakStump best;
  double bestEps = std::numeric_limits<double>::infinity();
  for (double theta : thresholds) {
    for (int polarity : {+1, -1}) {
      double eps = 0;
      for (std::size_t i = 0; i < values.size(); ++i) {
        const int h = polarity * (values[i] - theta) >= 0.0 ? +1 : -1;
        if (h != labels[i]) eps += weights[i];
      }
      if (eps < bestEps) {
        bestEps = eps;
        best = {0, theta, polarity};
      }
    }
  }
  return {best, bestEps};
}

// Random non-separable instance: samples 0 and 1 share every feature
// value with opposite labels, so no stump reaches zero error.
std::vector<LabeledSample> random_instance(synth::Rng& rng, int n, int features) {
  std::vector<LabeledSample> samples(n);
  for (int i = 0; i < n; ++i) {
    samples[i].values.resize(features);
    for (int f = 0; f < features; ++f)
      samples[i].values[f] = synth::uniform_real(rng, -10, 10);
    samples[i].label = synth::uniform_int(rng, 0, 1) ? +1 : -1;
  }
  samples[1].values = samples[0].values;
  samples[0].label = +1;
  samples[1].label = -1;
  return samples;
}

} // namespace

TEST_SUITE_BEGIN("cascade");

TEST_CASE("enumerate_features matches a brute-force count on a 4x4 window") {
  const auto features = enumerate_features(4, 1, 1);
  // Oracle: direct enumeration per kind.
  std::size_t expected = 0;
  for (int kind = 0; kind < 5; ++kind) {
    const int uw = kind == 0 ? 2 : (kind == 2 ? 3 : (kind == 4 ? 2 : 1));
    const int uh = kind == 1 ? 2 : (kind == 3 ? 3 : (kind == 4 ? 2 : 1));
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x)
        for (int h = uh; y + h <= 4; h += uh)
          for (int w = uw; x + w <= 4; w += uw) ++expected;
  }
  CHECK(features.size() == expected);

  std::size_t twoRectH = 0;
  for (const HaarFeature& f : features)
    if (f.kind == HaarKind::TwoRectH) ++twoRectH;
  CHECK(twoRectH == 40); // all (x, y, even w, h) inside 4x4
}

TEST_CASE("enumerate_features with oversized steps stays valid and small") {
  const auto features = enumerate_features(4, 10, 10);
  for (const HaarFeature& f : features) {
    CHECK(f.base.x == 0);
    CHECK(f.base.y == 0);
  }
  CHECK(!features.empty());
}

TEST_CASE("enumerate_features at full resolution exceeds 100k features") {
  CHECK(enumerate_features(24, 1, 1).size() > 100'000);
}

TEST_CASE("eval_feature is zero on constant images for every kind") {
  const IntegralImage ii(constant_image(48, 48, 137));
  for (const HaarFeature& f : enumerate_features(24, 3, 3)) {
    CHECK(eval_feature(ii, f, 0, 0, 1.0) == 0.0);
    CHECK(eval_feature(ii, f, 5, 7, 1.3) == 0.0);
  }
}

TEST_CASE("two-rect-horizontal is positive on a left-bright edge") {
  GrayImage img = constant_image(24, 24, 0);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 12; ++x) img.at(x, y) = 255;
  const IntegralImage ii(img);
  const HaarFeature f{HaarKind::TwoRectH, {0, 0, 24, 24}};
  CHECK(eval_feature(ii, f, 0, 0, 1.0) > 0.0);
}

TEST_CASE("eval_feature at scale 1 equals direct rect_sum arithmetic") {
  synth::Rng rng(107);
  const GrayImage img = synth::noise_image(rng, 24, 24);
  const IntegralImage ii(img);
  const auto std_of = [&]() {
    const double n = 24.0 * 24.0;
    const double s1 = double(ii.sum({0, 0, 24, 24}));
    const double s2 = double(ii.sum_sq({0, 0, 24, 24}));
    const double var = std::max(s2 / n - (s1 / n) * (s1 / n), 0.0);
    return std::max(std::sqrt(var), 1.0);
  };
  const double sd = std_of();

  const HaarFeature twoH{HaarKind::TwoRectH, {2, 4, 10, 6}};
  const double expectedTwoH =
      (double(ii.sum({2, 4, 5, 6})) - double(ii.sum({7, 4, 5, 6}))) / sd;
  CHECK(eval_feature(ii, twoH, 0, 0, 1.0) == doctest::Approx(expectedTwoH).epsilon(1e-12));

  const HaarFeature threeV{HaarKind::ThreeRectV, {3, 3, 8, 9}};
  const double expectedThreeV = (double(ii.sum({3, 3, 8, 3})) -
                                 2.0 * double(ii.sum({3, 6, 8, 3})) +
                                 double(ii.sum({3, 9, 8, 3}))) /
                                sd;
  CHECK(eval_feature(ii, threeV, 0, 0, 1.0) == doctest::Approx(expectedThreeV).epsilon(1e-12));

  const HaarFeature four{HaarKind::FourRect, {0, 0, 12, 12}};
  const double expectedFour =
      (double(ii.sum({0, 0, 6, 6})) - double(ii.sum({6, 0, 6, 6})) -
       double(ii.sum({0, 6, 6, 6})) + double(ii.sum({6, 6, 6, 6}))) /
      sd;
  CHECK(eval_feature(ii, four, 0, 0, 1.0) == doctest::Approx(expectedFour).epsilon(1e-12));
}

TEST_CASE("best_stump solves the canonical separable line") {
  const std::vector<double> values{0, 1, 2, 3};
  const std::vector<double> weights(4, 0.25);
  const std::vector<int> labels{-1, -1, +1, +1};
  const auto [stump, eps] = best_stump(values, weights, labels);
  CHECK(stump.threshold == doctest::Approx(1.5));
  CHECK(stump.polarity == +1);
  CHECK(eps == 0.0);
}

TEST_CASE("best_stump rejects single-label input") {
  const std::vector<double> values{0, 1};
  const std::vector<double> weights{0.5, 0.5};
  const std::vector<int> labels{+1, +1};
  try {
    best_stump(values, weights, labels);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateInput);
  }
}

TEST_CASE("best_stump matches exhaustive search on random instances") {
  synth::Rng rng(109);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 20;
    std::vector<double> values(n), weights(n);
    std::vector<int> labels(n);
    double wsum = 0;
    for (int i = 0; i < n; ++i) {
      values[i] = synth::uniform_int(rng, -5, 5); // duplicates likely
      weights[i] = synth::uniform_real(rng, 0.01, 1.0);
      labels[i] = synth::uniform_int(rng, 0, 1) ? +1 : -1;
      wsum += weights[i];
    }
    labels[0] = +1;
    labels[1] = -1;
    for (double& w : weights) w /= wsum;
    const auto [stump, eps] = best_stump(values, weights, labels);
    const auto [bruteStump, bruteEps] = brute_best_stump(values, weights, labels);
    CHECK(eps == doctest::Approx(bruteEps).epsilon(1e-12));
    CHECK(stump.threshold == bruteStump.threshold);
    CHECK(stump.polarity == bruteStump.polarity);
  }
}

TEST_CASE("adaboost solves the separable line in one round") {
  std::vector<LabeledSample> samples;
  for (int i = 0; i < 4; ++i) samples.push_back({{double(i)}, i < 2 ? -1 : +1});
  const StrongClassifier sc = adaboost_train(samples, 5);
  CHECK(sc.rounds.size() == 1); // stops at zero training error
  for (const LabeledSample& s : samples)
    CHECK(classify(sc, s.values) == s.label);
}

TEST_CASE("adaboost weight update hits the worked quarter-error case") {
  // One feature, values 0..3, labels (+1, -1, -1, +1), uniform weights.
  // Two stumps reach epsilon = 0.25; the tie rule (smaller threshold,
  // then polarity +1) picks threshold 0.5 with polarity -1, which errs
  // only on sample 3. With alpha = 0.5 ln 3 the wrong sample moves to
  // 0.25 sqrt(3) and the right ones to 0.25 / sqrt(3); normalizing
  // leaves the wrong sample at exactly 0.5 and the others at 1/6.
  std::vector<LabeledSample> samples;
  samples.push_back({{0.0}, +1});
  samples.push_back({{1.0}, -1});
  samples.push_back({{2.0}, -1});
  samples.push_back({{3.0}, +1});
  AdaboostTrace trace;
  const StrongClassifier sc = adaboost_train(samples, 1, &trace);
  REQUIRE(sc.rounds.size() == 1);
  CHECK(sc.rounds[0].stump.threshold == doctest::Approx(0.5));
  CHECK(sc.rounds[0].stump.polarity == -1);
  CHECK(sc.rounds[0].epsilon == doctest::Approx(0.25));
  CHECK(sc.rounds[0].alpha == doctest::Approx(0.5 * std::log(3.0)));
  REQUIRE(trace.rounds.size() == 1);
  const auto& w = trace.rounds[0].weightsAfter;
  CHECK(w[3] == doctest::Approx(0.5)); // the misclassified sample
  CHECK(w[0] == doctest::Approx(1.0 / 6.0));
  CHECK(w[1] == doctest::Approx(1.0 / 6.0));
  CHECK(w[2] == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("a window rejected at stage k never reaches stage k+1") {
  // Hand-built two-stage cascade over one feature: stage 1 passes only
  // windows whose left half is brighter, stage 2 passes everything.
  Cascade cascade;
  cascade.features.push_back({HaarKind::TwoRectH, {0, 0, 24, 24}});
  StrongClassifier s1;
  s1.rounds.push_back({{0, 0.5, +1}, 1.0, 0.25});
  s1.shift = 0.5; // pass needs the stump to fire positive
  StrongClassifier s2;
  s2.rounds.push_back({{0, -1e18, +1}, 1.0, 0.25});
  s2.shift = 0.0;
  cascade.stages = {s1, s2};

  // Left third bright: windows near the left edge see left>right, the
  // rest do not, so stage 1 filters a strict subset through.
  GrayImage img = constant_image(72, 24, 0);
  for (int y = 0; y < 24; ++y)
    for (int x = 0; x < 24; ++x) img.at(x, y) = 200;
  CascadeEvalCounters counters;
  detect_faces(img, cascade, {1.25, 2, 0.45}, &counters);
  REQUIRE(counters.stageWindows.size() == 2);
  CHECK(counters.stageWindows[1] < counters.stageWindows[0]);
  CHECK(counters.stageWindows[1] > 0);
}

TEST_CASE("adaboost per-round identities on random instances") {
  synth::Rng rng(113);
  for (int trial = 0; trial < 10; ++trial) {
    const auto samples = random_instance(rng, 20, 3);
    AdaboostTrace trace;
    const StrongClassifier sc = adaboost_train(samples, 6, &trace);
    REQUIRE(!sc.rounds.empty());
    double bound = 1.0;
    for (std::size_t r = 0; r < sc.rounds.size(); ++r) {
      const auto& round = sc.rounds[r];
      const auto& weights = trace.rounds[r].weightsAfter;
      // Invariant: alpha matches the stored epsilon exactly.
      CHECK(round.alpha ==
            doctest::Approx(0.5 * std::log((1 - round.epsilon) / round.epsilon))
                .epsilon(1e-12));
      // Weights stay a distribution.
      double sum = 0;
      for (double w : weights) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      // The just-picked stump sits at chance under the new weights.
      double err = 0;
      for (std::size_t i = 0; i < samples.size(); ++i) {
        const int h = round.stump.predict(samples[i].values[round.stump.featureIndex]);
        if (h != samples[i].label) err += weights[i];
      }
      CHECK(err == doctest::Approx(0.5).epsilon(1e-9));
      bound *= 2.0 * std::sqrt(round.epsilon * (1.0 - round.epsilon));
    }
    // Training error bounded by the product of normalizers.
    double wrong = 0;
    for (const LabeledSample& s : samples)
      if (classify(sc, s.values) != s.label) wrong += 1.0;
    CHECK(wrong / double(samples.size()) <= bound + 1e-9);
  }
}

TEST_CASE("adaboost rejects hopeless data") {
  // Two identical samples with opposite labels: every stump is at chance.
  std::vector<LabeledSample> samples;
  samples.push_back({{1.0, 2.0}, +1});
  samples.push_back({{1.0, 2.0}, -1});
  try {
    adaboost_train(samples, 3);
    FAIL("expected DegenerateInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateInput);
  }
}

TEST_CASE("classify applies the sign-zero-is-positive rule") {
  StrongClassifier sc;
  sc.rounds.push_back({{0, 0.5, +1}, 1.0, 0.25});
  CHECK(classify(sc, std::vector<double>{1.0}) == +1);
  CHECK(classify(sc, std::vector<double>{0.0}) == -1);
  sc.shift = -1.0; // margin of a negative stump becomes exactly 0
  CHECK(classify(sc, std::vector<double>{0.0}) == +1);
}

TEST_CASE("classify reports missing feature indices") {
  StrongClassifier sc;
  sc.rounds.push_back({{3, 0.0, +1}, 1.0, 0.25});
  try {
    classify(sc, std::vector<double>{1.0});
    FAIL("expected MissingFeature");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MissingFeature);
  }
}

namespace {

TrainCascadeOptions fast_cascade_options() {
  TrainCascadeOptions opts;
  opts.stepPos = 4;
  opts.stepSize = 4;
  opts.maxStages = 4;
  return opts;
}

} // namespace

TEST_CASE("train_cascade separates the synthetic face pattern") {
  synth::Rng rng(127);
  std::vector<GrayImage> pos, neg;
  for (int i = 0; i < 40; ++i) {
    pos.push_back(synth::face_window(rng));
    neg.push_back(synth::nonface_window(rng));
  }
  const Cascade cascade = train_cascade(pos, neg, fast_cascade_options());
  REQUIRE(!cascade.stages.empty());

  // Stage-wise detection rate on training positives >= 0.995 by
  // construction; with 40 positives that means every one survives.
  std::size_t detected = 0;
  for (const GrayImage& img : pos) {
    const IntegralImage ii(img);
    bool pass = true;
    for (const StrongClassifier& stage : cascade.stages) {
      double margin = 0;
      for (const BoostRound& r : stage.rounds)
        margin += r.alpha *
                  r.stump.predict(eval_feature(ii, cascade.features[r.stump.featureIndex], 0,
                                               0, 1.0));
      if (margin < stage.shift) {
        pass = false;
        break;
      }
    }
    if (pass) ++detected;
  }
  CHECK(detected == pos.size());

  // All training negatives rejected (trivially separable construction).
  std::size_t falsePos = 0;
  for (const GrayImage& img : neg) {
    const IntegralImage ii(img);
    bool pass = true;
    for (const StrongClassifier& stage : cascade.stages) {
      double margin = 0;
      for (const BoostRound& r : stage.rounds)
        margin += r.alpha *
                  r.stump.predict(eval_feature(ii, cascade.features[r.stump.featureIndex], 0,
                                               0, 1.0));
      if (margin < stage.shift) {
        pass = false;
        break;
      }
    }
    if (pass) ++falsePos;
  }
  CHECK(falsePos == 0);
}

TEST_CASE("train_cascade needs both classes populated") {
  synth::Rng rng(131);
  std::vector<GrayImage> pos;
  for (int i = 0; i < 25; ++i) pos.push_back(synth::face_window(rng));
  try {
    train_cascade(pos, {}, fast_cascade_options());
    FAIL("expected InsufficientData");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::InsufficientData);
  }
}

TEST_CASE("detect_faces trivials: reject-all cascade and tiny image") {
  Cascade cascade;
  cascade.features.push_back({HaarKind::TwoRectH, {0, 0, 24, 24}});
  StrongClassifier stage;
  stage.rounds.push_back({{0, 0.0, +1}, 1.0, 0.25});
  stage.shift = 1e9; // rejects everything
  cascade.stages.push_back(stage);
  CHECK(detect_faces(constant_image(64, 64, 10), cascade).empty());

  try {
    detect_faces(constant_image(23, 23, 0), cascade);
    FAIL("expected ImageTooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::ImageTooSmall);
  }
}

TEST_CASE("detect_faces finds a trained pattern and short-circuits stages") {
  synth::Rng rng(137);
  std::vector<GrayImage> pos, neg;
  for (int i = 0; i < 40; ++i) {
    pos.push_back(synth::face_window(rng));
    neg.push_back(synth::nonface_window(rng));
  }
  TrainCascadeOptions opts = fast_cascade_options();
  opts.maxStages = 3;
  opts.goals.maxFalsePos = 0.02; // grow stages until they truly reject noise
  const Cascade cascade = train_cascade(pos, neg, opts);

  GrayImage frame = synth::noise_image(rng, 96, 96, 0, 255);
  synth::draw_face_pattern(frame, 36, 30, 24, rng);
  const Rect truth{36, 30, 24, 24};

  CascadeEvalCounters counters;
  const std::vector<Detection> dets = detect_faces(frame, cascade, {}, &counters);
  REQUIRE(!dets.empty());
  CHECK(iou(dets[0].rect, truth) >= 0.5);

  // Later stages never see more windows than earlier ones.
  for (std::size_t s = 1; s < counters.stageWindows.size(); ++s)
    CHECK(counters.stageWindows[s] <= counters.stageWindows[s - 1]);
  if (counters.stageWindows.size() > 1)
    CHECK(counters.stageWindows[1] < counters.stageWindows[0]);
}

TEST_CASE("cascade model file round-trips through detection") {
  synth::Rng rng(139);
  std::vector<GrayImage> pos, neg;
  for (int i = 0; i < 30; ++i) {
    pos.push_back(synth::face_window(rng));
    neg.push_back(synth::nonface_window(rng));
  }
  const Cascade cascade = train_cascade(pos, neg, fast_cascade_options());
  const std::string path =
      (std::filesystem::temp_directory_path() / "crowdlens_cascade_test.txt").string();
  save_cascade(cascade, path);
  const Cascade back = load_cascade(path);
  REQUIRE(back.stages.size() == cascade.stages.size());
  CHECK(back.baseWindow == cascade.baseWindow);

  GrayImage frame = synth::noise_image(rng, 80, 80, 0, 255);
  synth::draw_face_pattern(frame, 20, 28, 24, rng);
  const auto a = detect_faces(frame, cascade);
  const auto b = detect_faces(frame, back);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].rect == b[i].rect);
    CHECK(a[i].score == doctest::Approx(b[i].score).epsilon(1e-12));
  }
  std::filesystem::remove(path);
}

TEST_SUITE_END();
