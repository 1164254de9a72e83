#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "crowdlens/error.hpp"

namespace crowdlens {

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  bool operator==(const Rect&) const = default;
};

/// Intersection-over-union of two rects; 0 when either is empty.
double iou(const Rect& a, const Rect& b);

/// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels, row-major.
struct PixelBuffer {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<std::uint8_t> data;

  std::uint8_t at(int x, int y, int c = 0) const {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
  std::uint8_t& at(int x, int y, int c = 0) {
    return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
  }
};

/// Single-channel 8-bit luma image, row-major.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> luma;

  std::uint8_t at(int x, int y) const {
    return luma[static_cast<std::size_t>(y) * width + x];
  }
  std::uint8_t& at(int x, int y) {
    return luma[static_cast<std::size_t>(y) * width + x];
  }
};

/// Summed-area tables over luma and squared luma. The grid is
/// (width+1) x (height+1) with a zero first row and column, so
/// at(x, y) is the sum over the half-open rectangle [0,x) x [0,y).
class IntegralImage {
public:
  IntegralImage() = default;
  explicit IntegralImage(const GrayImage& img);

  int width() const { return w_; }
  int height() const { return h_; }

  std::uint64_t at(int x, int y) const {
    return sum_[static_cast<std::size_t>(y) * (w_ + 1) + x];
  }
  std::uint64_t at_sq(int x, int y) const {
    return sq_[static_cast<std::size_t>(y) * (w_ + 1) + x];
  }

  /// Luma sum over r. Throws RectOutOfBounds unless r has positive
  /// extent and lies inside the image.
  std::uint64_t sum(const Rect& r) const;
  /// Squared-luma sum over r, same bounds rule.
  std::uint64_t sum_sq(const Rect& r) const;

private:
  void check(const Rect& r) const;

  int w_ = 0;
  int h_ = 0;
  std::vector<std::uint64_t> sum_;
  std::vector<std::uint64_t> sq_;
};

/// Decodes binary PGM (P5) or PPM (P6) with maxval 255. Header comments
/// (# to end of line) are skipped.
PixelBuffer decode_pnm(std::span<const std::uint8_t> bytes);

/// Encodes as P5 (1 channel) or P6 (3 channels), maxval 255.
std::vector<std::uint8_t> encode_pnm(const PixelBuffer& buf);

/// BT.601 luma: round(0.299 R + 0.587 G + 0.114 B). 1-channel input copies.
GrayImage to_gray(const PixelBuffer& buf);

IntegralImage integral(const GrayImage& img);

std::uint64_t rect_sum(const IntegralImage& ii, const Rect& r);

/// Bilinear resize with center-aligned source mapping
/// (x + 0.5) * srcW / newW - 0.5, clamped; output rounded half-up.
GrayImage resize(const GrayImage& img, int newW, int newH);

/// Copy of the pixels under r (must be in bounds).
GrayImage crop(const GrayImage& img, const Rect& r);

} // namespace crowdlens
