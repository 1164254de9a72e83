#pragma once

#include <vector>

#include "crowdlens/image.hpp"

namespace crowdlens {

/// One sliding-window hit in frame coordinates.
struct Detection {
  Rect rect;
  double score = 0.0;
};

/// Greedy non-maximum suppression: repeatedly keep the highest-scoring
/// detection and drop everything with IoU strictly above iouThresh.
/// Output order is (score desc, y, x); ties at the threshold survive.
std::vector<Detection> nms(std::vector<Detection> dets, double iouThresh = 0.45);

} // namespace crowdlens
