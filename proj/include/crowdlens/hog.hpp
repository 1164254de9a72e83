#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowdlens/detection.hpp"

namespace crowdlens {

inline constexpr int kHogWindowW = 64;
inline constexpr int kHogWindowH = 128;
inline constexpr int kHogCellSize = 8;
inline constexpr int kHogCellsX = kHogWindowW / kHogCellSize; // 8
inline constexpr int kHogCellsY = kHogWindowH / kHogCellSize; // 16
inline constexpr int kHogBins = 9;
inline constexpr int kHogDescriptorLen = kHogCellsX * kHogCellsY * kHogBins; // 1152

/// Per-pixel gradient magnitude and unsigned orientation in [0, 180).
struct GradientField {
  int width = 0;
  int height = 0;
  std::vector<double> magnitude;
  std::vector<double> orientation;

  double mag(int x, int y) const { return magnitude[std::size_t(y) * width + x]; }
  double ori(int x, int y) const { return orientation[std::size_t(y) * width + x]; }
};

/// 9-bin cell histograms over an 8x16 cell grid (one detection window).
struct CellHistogramGrid {
  // cell-major row order, bin-minor: [cy][cx][bin]
  std::vector<double> bins = std::vector<double>(kHogDescriptorLen, 0.0);

  double& at(int cx, int cy, int bin) {
    return bins[(std::size_t(cy) * kHogCellsX + cx) * kHogBins + bin];
  }
  double at(int cx, int cy, int bin) const {
    return bins[(std::size_t(cy) * kHogCellsX + cx) * kHogBins + bin];
  }
};

using HogDescriptor = std::vector<double>; // length kHogDescriptorLen

/// Hinge-loss hyperplane over HOG descriptors.
struct LinearSvm {
  std::vector<double> weights; // length kHogDescriptorLen
  double bias = 0.0;
  double lambda = 1e-4;

  double score(std::span<const double> descriptor) const;
};

struct DetectParams {
  double scaleStep = 1.2;
  int stride = 8;
  double minScore = 0.0;
  double iouThresh = 0.45;
};

/// Central differences (-1, 0, +1) in both axes with replicated borders;
/// orientation folded into the half circle (unsigned gradients).
GradientField gradients(const GrayImage& img);

/// Magnitude-weighted votes split linearly between the two nearest bin
/// centers (10, 30, ..., 170 degrees; circular over the half circle).
CellHistogramGrid cell_histograms(const GradientField& field);

/// Per-cell normalization h -> h / sqrt(|h|^2 + eps^2), eps = 1e-6.
CellHistogramGrid normalize_cells(const CellHistogramGrid& grid);

/// Full 1152-dim descriptor of one 64x128 window.
HogDescriptor descriptor(const GrayImage& window);

struct SvmTrainParams {
  double lambda = 1e-4;
  int epochs = 100;
  std::uint64_t seed = 1;
};

/// Pegasos-style stochastic subgradient descent on the regularized hinge
/// objective; bias unregularized; returns the average iterate of the
/// last epoch. Deterministic for a fixed seed.
LinearSvm svm_train(const std::vector<HogDescriptor>& xs, const std::vector<int>& ys,
                    const SvmTrainParams& params = {});

/// Regularized hinge objective lambda/2 |w|^2 + mean hinge loss.
double svm_objective(const LinearSvm& svm, const std::vector<HogDescriptor>& xs,
                     const std::vector<int>& ys);

/// Multi-scale sliding-window person detection; detections come back
/// sorted by descending score after non-maximum suppression.
std::vector<Detection> detect(const GrayImage& img, const LinearSvm& svm,
                              const DetectParams& params = {});

void save_svm(const LinearSvm& svm, const std::string& path);
LinearSvm load_svm(const std::string& path);

} // namespace crowdlens
