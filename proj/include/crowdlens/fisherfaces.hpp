#pragma once

#include <string>
#include <vector>

#include "crowdlens/image.hpp"
#include "crowdlens/matrix.hpp"

namespace crowdlens {

/// Face crops are normalized to this size before training / prediction.
inline constexpr int kFaceCropSize = 32;

/// Samples as columns: d pixels by N images, row-major flattening.
struct ImageColumnMatrix {
  Mat x;
  int imageW = 0;
  int imageH = 0;

  int sampleCount() const { return x.cols(); }
};

/// Per-column class ids 0..c-1 plus display names per class.
struct ClassVector {
  std::vector<int> labels;
  std::vector<std::string> names;

  int classCount() const { return static_cast<int>(names.size()); }
};

/// PCA-projected, mean-centered samples: (N-c) x N.
struct Projection {
  Mat p;
};

struct ScatterPair {
  Mat s_b;
  Mat s_w;
};

/// Combined projection W = W_pca * W_fld with the training mean and the
/// projected class centroids.
struct FisherModel {
  int imageW = 0;
  int imageH = 0;
  std::vector<std::string> names;
  Mat mean;      // d x 1
  Mat w;         // d x (c-1)
  Mat centroids; // c x (c-1), one row per class
};

struct PredictResult {
  std::string label;
  double distance = 0.0;
};

/// Flattens images into columns; labels map to class ids in order of
/// first appearance. Needs >= 2 classes with >= 2 images each.
std::pair<ImageColumnMatrix, ClassVector> build_matrix(const std::vector<GrayImage>& images,
                                                       const std::vector<std::string>& labels);

struct PcaStep {
  Mat basis; // d x (N-c)
  Mat mean;  // d x 1
  Projection projection;
};

/// Projects the centered samples onto the top N-c principal directions.
PcaStep pca_step(const ImageColumnMatrix& xc, int classCount);

/// Between-class scatter sum_i N_i (m_i - m)(m_i - m)^T of the projection.
Mat scatter_between(const Projection& p, const ClassVector& cv);

/// Within-class scatter sum_i sum_{x in class i} (x - m_i)(x - m_i)^T.
Mat scatter_within(const Projection& p, const ClassVector& cv);

/// Top-k generalized eigenvectors of (S_b, S_w), unit-norm columns.
Mat lda_step(const ScatterPair& sp, int k);

/// Full Fisherfaces training: PCA to N-c dims, scatter matrices, LDA to
/// c-1 dims, combined projection and class centroids.
FisherModel train(const ImageColumnMatrix& xc, const ClassVector& cv);

/// Nearest projected class centroid (Euclidean); ties take the lower id.
PredictResult predict(const FisherModel& m, const GrayImage& face);

void save_fisher(const FisherModel& m, const std::string& path);
FisherModel load_fisher(const std::string& path);

} // namespace crowdlens
