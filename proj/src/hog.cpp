#include "crowdlens/hog.hpp"

#include "crowdlens/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace crowdlens {

namespace {

constexpr double kBinWidth = 180.0 / kHogBins; // 20 degrees
constexpr double kNormEps2 = 1e-12;            // eps = 1e-6, squared

// Splits one magnitude vote between the two nearest bin centers
// (10, 30, ..., 170), circularly over the half circle.
inline void vote(double* bins, double orientation, double magnitude) {
  const double t = (orientation - 10.0) / kBinWidth;
  const double fl = std::floor(t);
  const double frac = t - fl;
  int i0 = static_cast<int>(fl) % kHogBins;
  if (i0 < 0) i0 += kHogBins;
  const int i1 = (i0 + 1) % kHogBins;
  bins[i0] += magnitude * (1.0 - frac);
  bins[i1] += magnitude * frac;
}

// Accumulates the 9-bin histogram of one 8x8 tile with origin (px, py).
inline void cell_votes(const GradientField& f, int px, int py, double* bins) {
  for (int y = py; y < py + kHogCellSize; ++y)
    for (int x = px; x < px + kHogCellSize; ++x)
      vote(bins, f.ori(x, y), f.mag(x, y));
}

inline void normalize_slice(double* bins) {
  double sq = 0;
  for (int b = 0; b < kHogBins; ++b) sq += bins[b] * bins[b];
  const double inv = 1.0 / std::sqrt(sq + kNormEps2);
  for (int b = 0; b < kHogBins; ++b) bins[b] *= inv;
}

} // namespace

double LinearSvm::score(std::span<const double> d) const {
  return std::inner_product(weights.begin(), weights.end(), d.begin(), bias);
}

GradientField gradients(const GrayImage& img) {
  if (img.width < 3 || img.height < 3)
    fail(Errc::ImageTooSmall, std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  ", need at least 3x3");
  GradientField f;
  f.width = img.width;
  f.height = img.height;
  f.magnitude.resize(std::size_t(img.width) * img.height);
  f.orientation.resize(f.magnitude.size());
  for (int y = 0; y < img.height; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, img.height - 1);
    for (int x = 0; x < img.width; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, img.width - 1);
      const double dx = double(img.at(xp, y)) - img.at(xm, y);
      const double dy = double(img.at(x, yp)) - img.at(x, ym);
      const std::size_t i = std::size_t(y) * img.width + x;
      f.magnitude[i] = std::sqrt(dx * dx + dy * dy);
      double deg = std::atan2(dy, dx) * 180.0 / M_PI;
      deg = std::fmod(deg, 180.0);
      if (deg < 0) deg += 180.0;
      if (deg >= 180.0) deg = 0.0;
      f.orientation[i] = deg;
    }
  }
  return f;
}

CellHistogramGrid cell_histograms(const GradientField& field) {
  if (field.width != kHogWindowW || field.height != kHogWindowH)
    fail(Errc::BadWindowSize, std::to_string(field.width) + "x" + std::to_string(field.height) +
                                  ", expected 64x128");
  CellHistogramGrid grid;
  for (int cy = 0; cy < kHogCellsY; ++cy)
    for (int cx = 0; cx < kHogCellsX; ++cx)
      cell_votes(field, cx * kHogCellSize, cy * kHogCellSize, &grid.at(cx, cy, 0));
  return grid;
}

CellHistogramGrid normalize_cells(const CellHistogramGrid& grid) {
  CellHistogramGrid out = grid;
  for (int cy = 0; cy < kHogCellsY; ++cy)
    for (int cx = 0; cx < kHogCellsX; ++cx) normalize_slice(&out.at(cx, cy, 0));
  return out;
}

HogDescriptor descriptor(const GrayImage& window) {
  if (window.width != kHogWindowW || window.height != kHogWindowH)
    fail(Errc::BadWindowSize, std::to_string(window.width) + "x" +
                                  std::to_string(window.height) + ", expected 64x128");
  return normalize_cells(cell_histograms(gradients(window))).bins;
}

namespace {

// Deterministic in-place Fisher-Yates; avoids std::shuffle so results do
// not depend on the standard library's distribution implementation.
void shuffle_indices(std::vector<int>& idx, std::mt19937_64& rng) {
  for (std::size_t i = idx.size() - 1; i > 0; --i) {
    const std::size_t j = rng() % (i + 1);
    std::swap(idx[i], idx[j]);
  }
}

} // namespace

LinearSvm svm_train(const std::vector<HogDescriptor>& xs, const std::vector<int>& ys,
                    const SvmTrainParams& params) {
  if (xs.empty() || xs.size() != ys.size())
    fail(Errc::DegenerateInput, "empty or mismatched training set");
  const std::size_t dim = xs[0].size();
  for (const auto& x : xs)
    if (x.size() != dim) fail(Errc::DimMismatch, "descriptor length varies");
  bool hasPos = false, hasNeg = false;
  for (int y : ys) {
    if (y == +1) hasPos = true;
    else if (y == -1) hasNeg = true;
    else fail(Errc::DegenerateInput, "labels must be -1 or +1");
  }
  if (!hasPos || !hasNeg) fail(Errc::DegenerateInput, "both labels must be present");

  const double lambda = params.lambda;
  std::vector<double> w(dim, 0.0);
  double b = 0.0;
  std::vector<double> wSum(dim, 0.0);
  double bSum = 0.0;
  std::size_t avgSteps = 0;

  std::mt19937_64 rng(params.seed);
  std::vector<int> order(xs.size());
  std::iota(order.begin(), order.end(), 0);

  std::size_t t = 0;
  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    shuffle_indices(order, rng);
    const bool lastEpoch = epoch == params.epochs - 1;
    for (int i : order) {
      ++t;
      const double eta = 1.0 / (lambda * double(t));
      const auto& x = xs[i];
      const double y = ys[i];
      double margin = b;
      for (std::size_t k = 0; k < dim; ++k) margin += w[k] * x[k];
      margin *= y;
      const double keep = 1.0 - eta * lambda; // == 1 - 1/t
      if (margin < 1.0) {
        const double step = eta * y;
        for (std::size_t k = 0; k < dim; ++k) w[k] = keep * w[k] + step * x[k];
        // The bias is not strongly convex; the 1/(lambda t) schedule
        // would take an unrecoverable 1/lambda jump at t = 1, so it
        // follows the plain 1/t rate (still unregularized).
        b += y / double(t);
      } else {
        for (std::size_t k = 0; k < dim; ++k) w[k] *= keep;
      }
      if (lastEpoch) {
        for (std::size_t k = 0; k < dim; ++k) wSum[k] += w[k];
        bSum += b;
        ++avgSteps;
      }
    }
  }
  LinearSvm svm;
  svm.lambda = lambda;
  svm.weights.resize(dim);
  for (std::size_t k = 0; k < dim; ++k) svm.weights[k] = wSum[k] / double(avgSteps);
  svm.bias = bSum / double(avgSteps);
  return svm;
}

double svm_objective(const LinearSvm& svm, const std::vector<HogDescriptor>& xs,
                     const std::vector<int>& ys) {
  double wsq = 0;
  for (double v : svm.weights) wsq += v * v;
  double hinge = 0;
  for (std::size_t i = 0; i < xs.size(); ++i)
    hinge += std::max(0.0, 1.0 - ys[i] * svm.score(xs[i]));
  return 0.5 * svm.lambda * wsq + hinge / double(xs.size());
}

namespace {

void sort_detections(std::vector<Detection>& dets) {
  std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.rect.y != b.rect.y) return a.rect.y < b.rect.y;
    return a.rect.x < b.rect.x;
  });
}

std::vector<Detection> detect_impl(const GrayImage& img, const LinearSvm& svm,
                                   const DetectParams& params, bool allowFastPath) {
  if (img.width < kHogWindowW || img.height < kHogWindowH)
    fail(Errc::ImageTooSmall, std::to_string(img.width) + "x" + std::to_string(img.height) +
                                  ", need at least 64x128");
  std::vector<Detection> all;
  for (int level = 0;; ++level) {
    const double scale = std::pow(params.scaleStep, level);
    const int lw = static_cast<int>(std::lround(img.width / scale));
    const int lh = static_cast<int>(std::lround(img.height / scale));
    if (lw < kHogWindowW || lh < kHogWindowH) break;
    const GrayImage levelImg = level == 0 ? img : resize(img, lw, lh);
    const GradientField field = gradients(levelImg);

    const bool fast = allowFastPath && params.stride % kHogCellSize == 0;
    std::vector<double> cellGrid;
    int cellsW = 0, cellsH = 0;
    if (fast) {
      // Stride-aligned windows share cell tiles: vote and normalize each
      // tile once per level, then descriptors are contiguous copies.
      cellsW = lw / kHogCellSize;
      cellsH = lh / kHogCellSize;
      cellGrid.assign(std::size_t(cellsW) * cellsH * kHogBins, 0.0);
      for (int cy = 0; cy < cellsH; ++cy)
        for (int cx = 0; cx < cellsW; ++cx) {
          double* bins = &cellGrid[(std::size_t(cy) * cellsW + cx) * kHogBins];
          cell_votes(field, cx * kHogCellSize, cy * kHogCellSize, bins);
          normalize_slice(bins);
        }
    }

    std::vector<double> desc(kHogDescriptorLen);
    for (int y = 0; y + kHogWindowH <= lh; y += params.stride) {
      for (int x = 0; x + kHogWindowW <= lw; x += params.stride) {
        if (fast) {
          const int cx0 = x / kHogCellSize;
          const int cy0 = y / kHogCellSize;
          double* dst = desc.data();
          for (int cy = 0; cy < kHogCellsY; ++cy) {
            const double* src =
                &cellGrid[(std::size_t(cy0 + cy) * cellsW + cx0) * kHogBins];
            std::copy_n(src, kHogCellsX * kHogBins, dst);
            dst += kHogCellsX * kHogBins;
          }
        } else {
          std::fill(desc.begin(), desc.end(), 0.0);
          for (int cy = 0; cy < kHogCellsY; ++cy)
            for (int cx = 0; cx < kHogCellsX; ++cx) {
              double* bins = &desc[(std::size_t(cy) * kHogCellsX + cx) * kHogBins];
              cell_votes(field, x + cx * kHogCellSize, y + cy * kHogCellSize, bins);
              normalize_slice(bins);
            }
        }
        const double score = svm.score(desc);
        if (score > params.minScore) {
          Rect r;
          r.w = std::min(static_cast<int>(std::lround(kHogWindowW * scale)), img.width);
          r.h = std::min(static_cast<int>(std::lround(kHogWindowH * scale)), img.height);
          r.x = std::clamp(static_cast<int>(std::lround(x * scale)), 0, img.width - r.w);
          r.y = std::clamp(static_cast<int>(std::lround(y * scale)), 0, img.height - r.h);
          all.push_back({r, score});
        }
      }
    }
  }
  sort_detections(all);
  return nms(std::move(all), params.iouThresh);
}

} // namespace

std::vector<Detection> detect(const GrayImage& img, const LinearSvm& svm,
                              const DetectParams& params) {
  return detect_impl(img, svm, params, true);
}

namespace detail {
std::vector<Detection> detect_no_fast_path(const GrayImage& img, const LinearSvm& svm,
                                           const DetectParams& params) {
  return detect_impl(img, svm, params, false);
}
} // namespace detail

std::vector<Detection> nms(std::vector<Detection> dets, double iouThresh) {
  sort_detections(dets);
  std::vector<Detection> kept;
  std::vector<bool> removed(dets.size(), false);
  for (std::size_t i = 0; i < dets.size(); ++i) {
    if (removed[i]) continue;
    kept.push_back(dets[i]);
    for (std::size_t j = i + 1; j < dets.size(); ++j)
      if (!removed[j] && iou(dets[i].rect, dets[j].rect) > iouThresh) removed[j] = true;
  }
  return kept;
}

void save_svm(const LinearSvm& svm, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(Errc::IoFailure, "cannot write " + path);
  out << "SVM1\n" << format_double(svm.lambda) << " " << format_double(svm.bias) << "\n";
  for (std::size_t i = 0; i < svm.weights.size(); ++i)
    out << format_double(svm.weights[i]) << (i + 1 == svm.weights.size() ? "\n" : " ");
  if (!out.flush()) fail(Errc::IoFailure, "write failed: " + path);
}

LinearSvm load_svm(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot read " + path);
  std::string tag;
  LinearSvm svm;
  if (!(in >> tag) || tag != "SVM1") fail(Errc::IoFailure, "bad SVM model header in " + path);
  if (!(in >> svm.lambda >> svm.bias)) fail(Errc::IoFailure, "bad SVM parameters in " + path);
  svm.weights.resize(kHogDescriptorLen);
  for (double& w : svm.weights)
    if (!(in >> w)) fail(Errc::IoFailure, "truncated SVM weights in " + path);
  return svm;
}

} // namespace crowdlens
