#include "crowdlens/fisherfaces.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace crowdlens {

std::pair<ImageColumnMatrix, ClassVector> build_matrix(const std::vector<GrayImage>& images,
                                                       const std::vector<std::string>& labels) {
  if (images.size() != labels.size())
    fail(Errc::DimMismatch, "image and label counts differ");
  if (images.size() < 4) fail(Errc::TooFewSamples, "need >= 2 classes with >= 2 images each");
  const int w = images[0].width;
  const int h = images[0].height;
  for (const GrayImage& img : images)
    if (img.width != w || img.height != h)
      fail(Errc::DimMismatch, "images must share dimensions");

  ClassVector cv;
  cv.labels.reserve(labels.size());
  for (const std::string& label : labels) {
    const auto it = std::find(cv.names.begin(), cv.names.end(), label);
    if (it == cv.names.end()) {
      cv.labels.push_back(static_cast<int>(cv.names.size()));
      cv.names.push_back(label);
    } else {
      cv.labels.push_back(static_cast<int>(it - cv.names.begin()));
    }
  }
  if (cv.classCount() < 2) fail(Errc::TooFewSamples, "need >= 2 classes");
  std::vector<int> perClass(cv.classCount(), 0);
  for (int id : cv.labels) ++perClass[id];
  for (int i = 0; i < cv.classCount(); ++i)
    if (perClass[i] < 2)
      fail(Errc::TooFewSamples, "class '" + cv.names[i] + "' has fewer than 2 images");

  ImageColumnMatrix xc;
  xc.imageW = w;
  xc.imageH = h;
  xc.x = Mat(w * h, static_cast<int>(images.size()));
  for (std::size_t j = 0; j < images.size(); ++j)
    for (int i = 0; i < w * h; ++i) xc.x(i, static_cast<int>(j)) = images[j].luma[i];
  return {std::move(xc), std::move(cv)};
}

PcaStep pca_step(const ImageColumnMatrix& xc, int classCount) {
  const int n = xc.sampleCount();
  const int d = xc.x.rows();
  const int k = n - classCount;
  if (k < 1) fail(Errc::TooFewSamples, "N - c must be >= 1");

  PcaStep step;
  step.mean = Mat(d, 1);
  for (int i = 0; i < d; ++i) {
    double s = 0;
    for (int j = 0; j < n; ++j) s += xc.x(i, j);
    step.mean(i, 0) = s / n;
  }
  Mat centered = xc.x;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < n; ++j) centered(i, j) -= step.mean(i, 0);

  step.basis = gram_pca(centered, k);
  step.projection.p = step.basis.transposed() * centered;
  return step;
}

namespace {

// Class means of the projected samples, one column per class, plus the
// overall mean as the last output.
void class_means(const Projection& p, const ClassVector& cv, Mat& classMean, Mat& overallMean,
                 std::vector<int>& counts) {
  const int dims = p.p.rows();
  const int n = p.p.cols();
  const int c = cv.classCount();
  classMean = Mat(dims, c);
  overallMean = Mat(dims, 1);
  counts.assign(c, 0);
  for (int j = 0; j < n; ++j) {
    const int id = cv.labels[j];
    ++counts[id];
    for (int i = 0; i < dims; ++i) {
      classMean(i, id) += p.p(i, j);
      overallMean(i, 0) += p.p(i, j);
    }
  }
  for (int id = 0; id < c; ++id)
    for (int i = 0; i < dims; ++i) classMean(i, id) /= counts[id];
  for (int i = 0; i < dims; ++i) overallMean(i, 0) /= n;
}

} // namespace

Mat scatter_between(const Projection& p, const ClassVector& cv) {
  if (static_cast<int>(cv.labels.size()) != p.p.cols())
    fail(Errc::DimMismatch, "label count does not match projection columns");
  Mat classMean, overallMean;
  std::vector<int> counts;
  class_means(p, cv, classMean, overallMean, counts);
  const int dims = p.p.rows();
  Mat sb(dims, dims);
  for (int id = 0; id < cv.classCount(); ++id) {
    for (int i = 0; i < dims; ++i) {
      const double di = classMean(i, id) - overallMean(i, 0);
      for (int j = 0; j < dims; ++j) {
        const double dj = classMean(j, id) - overallMean(j, 0);
        sb(i, j) += counts[id] * di * dj;
      }
    }
  }
  return sb;
}

Mat scatter_within(const Projection& p, const ClassVector& cv) {
  if (static_cast<int>(cv.labels.size()) != p.p.cols())
    fail(Errc::DimMismatch, "label count does not match projection columns");
  Mat classMean, overallMean;
  std::vector<int> counts;
  class_means(p, cv, classMean, overallMean, counts);
  const int dims = p.p.rows();
  Mat sw(dims, dims);
  std::vector<double> dev(dims);
  for (int col = 0; col < p.p.cols(); ++col) {
    const int id = cv.labels[col];
    for (int i = 0; i < dims; ++i) dev[i] = p.p(i, col) - classMean(i, id);
    for (int i = 0; i < dims; ++i)
      for (int j = 0; j < dims; ++j) sw(i, j) += dev[i] * dev[j];
  }
  return sw;
}

Mat lda_step(const ScatterPair& sp, int k) {
  const SymEig e = gen_eig(sp.s_b, sp.s_w);
  if (k > e.vectors.cols()) fail(Errc::DimMismatch, "k exceeds available eigenvectors");
  Mat out(e.vectors.rows(), k);
  for (int c = 0; c < k; ++c)
    for (int r = 0; r < e.vectors.rows(); ++r) out(r, c) = e.vectors(r, c);
  return out;
}

FisherModel train(const ImageColumnMatrix& xc, const ClassVector& cv) {
  const int c = cv.classCount();
  const PcaStep step = pca_step(xc, c);
  const ScatterPair sp{scatter_between(step.projection, cv),
                       scatter_within(step.projection, cv)};
  const SymEig e = gen_eig(sp.s_b, sp.s_w);
  if (e.values.empty() || e.values[0] < 1e-8)
    fail(Errc::NoDiscrimination, "top generalized eigenvalue below 1e-8");
  Mat wfld(e.vectors.rows(), c - 1);
  for (int col = 0; col < c - 1; ++col)
    for (int r = 0; r < e.vectors.rows(); ++r) wfld(r, col) = e.vectors(r, col);

  FisherModel m;
  m.imageW = xc.imageW;
  m.imageH = xc.imageH;
  m.names = cv.names;
  m.mean = step.mean;
  m.w = step.basis * wfld; // d x (c-1)

  // Projected class centroids, y = W^T (x - mean) per training column.
  const Mat projected = wfld.transposed() * step.projection.p; // (c-1) x N
  m.centroids = Mat(c, c - 1);
  std::vector<int> counts(c, 0);
  for (int j = 0; j < projected.cols(); ++j) {
    const int id = cv.labels[j];
    ++counts[id];
    for (int i = 0; i < c - 1; ++i) m.centroids(id, i) += projected(i, j);
  }
  for (int id = 0; id < c; ++id)
    for (int i = 0; i < c - 1; ++i) m.centroids(id, i) /= counts[id];
  return m;
}

PredictResult predict(const FisherModel& m, const GrayImage& face) {
  if (face.width != m.imageW || face.height != m.imageH)
    fail(Errc::DimMismatch, "face is " + std::to_string(face.width) + "x" +
                                std::to_string(face.height) + ", model expects " +
                                std::to_string(m.imageW) + "x" + std::to_string(m.imageH));
  const int outDims = m.w.cols();
  std::vector<double> y(outDims, 0.0);
  for (int i = 0; i < m.w.rows(); ++i) {
    const double centered = double(face.luma[i]) - m.mean(i, 0);
    if (centered == 0.0) continue;
    for (int k = 0; k < outDims; ++k) y[k] += m.w(i, k) * centered;
  }
  int bestId = 0;
  double bestSq = std::numeric_limits<double>::infinity();
  for (int id = 0; id < m.centroids.rows(); ++id) {
    double sq = 0;
    for (int k = 0; k < outDims; ++k) {
      const double d = y[k] - m.centroids(id, k);
      sq += d * d;
    }
    if (sq < bestSq) {
      bestSq = sq;
      bestId = id;
    }
  }
  return {m.names[bestId], std::sqrt(bestSq)};
}

void save_fisher(const FisherModel& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoFailure, "cannot write " + path);
  out << "FISHER1\n";
  out << m.imageW << " " << m.imageH << " " << m.names.size() << "\n";
  for (std::size_t i = 0; i < m.names.size(); ++i)
    out << m.names[i] << (i + 1 == m.names.size() ? "\n" : " ");
  for (int i = 0; i < m.mean.rows(); ++i)
    out << format_double(m.mean(i, 0)) << (i + 1 == m.mean.rows() ? "\n" : " ");
  write_mat(out, m.w);
  write_mat(out, m.centroids);
  if (!out.flush()) fail(Errc::IoFailure, "write failed: " + path);
}

FisherModel load_fisher(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot read " + path);
  std::string tag;
  if (!(in >> tag) || tag != "FISHER1") fail(Errc::IoFailure, "bad fisher header in " + path);
  FisherModel m;
  std::size_t classCount = 0;
  if (!(in >> m.imageW >> m.imageH >> classCount) || m.imageW < 1 || m.imageH < 1 ||
      classCount < 2)
    fail(Errc::IoFailure, "bad fisher dimensions in " + path);
  m.names.resize(classCount);
  for (std::string& name : m.names)
    if (!(in >> name)) fail(Errc::IoFailure, "truncated class names in " + path);
  const int d = m.imageW * m.imageH;
  m.mean = Mat(d, 1);
  for (int i = 0; i < d; ++i)
    if (!(in >> m.mean(i, 0))) fail(Errc::IoFailure, "truncated mean vector in " + path);
  m.w = read_mat(in);
  m.centroids = read_mat(in);
  if (m.w.rows() != d || m.w.cols() != static_cast<int>(classCount) - 1 ||
      m.centroids.rows() != static_cast<int>(classCount) || m.centroids.cols() != m.w.cols())
    fail(Errc::IoFailure, "inconsistent fisher model shapes in " + path);
  return m;
}

} // namespace crowdlens
