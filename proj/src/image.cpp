#include "crowdlens/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

namespace crowdlens {

double iou(const Rect& a, const Rect& b) {
  if (a.w <= 0 || a.h <= 0 || b.w <= 0 || b.h <= 0) return 0.0;
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.x + a.w, b.x + b.w);
  const int y1 = std::min(a.y + a.h, b.y + b.h);
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const double inter = double(x1 - x0) * double(y1 - y0);
  const double uni = double(a.w) * a.h + double(b.w) * b.h - inter;
  return inter / uni;
}

namespace {

struct ByteReader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  bool eof() const { return pos >= bytes.size(); }
  int peek() const { return eof() ? -1 : bytes[pos]; }
  int get() { return eof() ? -1 : bytes[pos++]; }

  // Skips whitespace and # comments between header tokens.
  void skip_space_and_comments() {
    while (!eof()) {
      const int c = peek();
      if (c == '#') {
        while (!eof() && get() != '\n') {
        }
      } else if (std::isspace(c)) {
        ++pos;
      } else {
        break;
      }
    }
  }

  // Reads one unsigned decimal header field.
  long read_uint() {
    skip_space_and_comments();
    if (eof() || !std::isdigit(peek()))
      fail(Errc::TruncatedBody, "malformed PNM header");
    long v = 0;
    while (!eof() && std::isdigit(peek())) {
      v = v * 10 + (get() - '0');
      if (v > 1'000'000'000) fail(Errc::TruncatedBody, "header value out of range");
    }
    return v;
  }
};

} // namespace

PixelBuffer decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2) fail(Errc::TruncatedBody, "input shorter than a magic number");
  ByteReader r{bytes};
  const int m0 = r.get();
  const int m1 = r.get();
  int channels = 0;
  if (m0 == 'P' && m1 == '5') channels = 1;
  else if (m0 == 'P' && m1 == '6') channels = 3;
  else {
    fail(Errc::UnsupportedMagic,
         "expected P5 or P6, got \"" + std::string{char(m0), char(m1)} + "\"");
  }
  const long w = r.read_uint();
  const long h = r.read_uint();
  const long maxval = r.read_uint();
  if (w < 1 || h < 1) fail(Errc::TruncatedBody, "non-positive dimensions");
  if (maxval != 255) fail(Errc::MaxvalNot255, "maxval " + std::to_string(maxval));
  // Exactly one whitespace byte separates the header from the body.
  if (r.eof() || !std::isspace(r.peek()))
    fail(Errc::TruncatedBody, "missing header terminator");
  r.get();

  PixelBuffer buf;
  buf.width = static_cast<int>(w);
  buf.height = static_cast<int>(h);
  buf.channels = channels;
  const std::size_t need = std::size_t(w) * std::size_t(h) * channels;
  if (bytes.size() - r.pos < need)
    fail(Errc::TruncatedBody, "body has " + std::to_string(bytes.size() - r.pos) +
                                  " bytes, expected " + std::to_string(need));
  buf.data.assign(bytes.begin() + r.pos, bytes.begin() + r.pos + need);
  return buf;
}

std::vector<std::uint8_t> encode_pnm(const PixelBuffer& buf) {
  if (buf.channels != 1 && buf.channels != 3)
    fail(Errc::BadChannelCount, std::to_string(buf.channels) + " channels");
  std::string header = buf.channels == 1 ? "P5\n" : "P6\n";
  header += std::to_string(buf.width) + " " + std::to_string(buf.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), buf.data.begin(), buf.data.end());
  return out;
}

GrayImage to_gray(const PixelBuffer& buf) {
  GrayImage img;
  img.width = buf.width;
  img.height = buf.height;
  if (buf.channels == 1) {
    img.luma = buf.data;
    return img;
  }
  if (buf.channels != 3)
    fail(Errc::BadChannelCount, std::to_string(buf.channels) + " channels");
  img.luma.resize(std::size_t(buf.width) * buf.height);
  const std::uint8_t* p = buf.data.data();
  for (std::size_t i = 0; i < img.luma.size(); ++i, p += 3) {
    const double y = 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2];
    img.luma[i] = static_cast<std::uint8_t>(std::clamp(std::lround(y), 0L, 255L));
  }
  return img;
}

IntegralImage::IntegralImage(const GrayImage& img) : w_(img.width), h_(img.height) {
  const std::size_t stride = w_ + 1;
  sum_.assign(stride * (h_ + 1), 0);
  sq_.assign(stride * (h_ + 1), 0);
  for (int y = 1; y <= h_; ++y) {
    std::uint64_t row = 0;
    std::uint64_t rowSq = 0;
    const std::uint8_t* src = img.luma.data() + std::size_t(y - 1) * w_;
    std::uint64_t* cur = sum_.data() + y * stride;
    std::uint64_t* sq = sq_.data() + y * stride;
    const std::uint64_t* above = sum_.data() + (y - 1) * stride;
    const std::uint64_t* aboveSq = sq_.data() + (y - 1) * stride;
    for (int x = 1; x <= w_; ++x) {
      const std::uint64_t v = src[x - 1];
      row += v;
      rowSq += v * v;
      cur[x] = above[x] + row;
      sq[x] = aboveSq[x] + rowSq;
    }
  }
}

void IntegralImage::check(const Rect& r) const {
  if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > w_ || r.y + r.h > h_)
    fail(Errc::RectOutOfBounds, "rect " + std::to_string(r.x) + "," + std::to_string(r.y) +
                                    " " + std::to_string(r.w) + "x" + std::to_string(r.h) +
                                    " vs image " + std::to_string(w_) + "x" + std::to_string(h_));
}

std::uint64_t IntegralImage::sum(const Rect& r) const {
  check(r);
  return at(r.x + r.w, r.y + r.h) - at(r.x, r.y + r.h) - at(r.x + r.w, r.y) + at(r.x, r.y);
}

std::uint64_t IntegralImage::sum_sq(const Rect& r) const {
  check(r);
  return at_sq(r.x + r.w, r.y + r.h) - at_sq(r.x, r.y + r.h) - at_sq(r.x + r.w, r.y) +
         at_sq(r.x, r.y);
}

IntegralImage integral(const GrayImage& img) { return IntegralImage(img); }

std::uint64_t rect_sum(const IntegralImage& ii, const Rect& r) { return ii.sum(r); }

GrayImage resize(const GrayImage& img, int newW, int newH) {
  GrayImage out;
  out.width = newW;
  out.height = newH;
  out.luma.resize(std::size_t(newW) * newH);
  if (newW == img.width && newH == img.height) {
    out.luma = img.luma;
    return out;
  }
  const double sx = double(img.width) / newW;
  const double sy = double(img.height) / newH;
  for (int y = 0; y < newH; ++y) {
    double fy = (y + 0.5) * sy - 0.5;
    fy = std::clamp(fy, 0.0, double(img.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < newW; ++x) {
      double fx = (x + 0.5) * sx - 0.5;
      fx = std::clamp(fx, 0.0, double(img.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      const double top = (1 - wx) * img.at(x0, y0) + wx * img.at(x1, y0);
      const double bot = (1 - wx) * img.at(x0, y1) + wx * img.at(x1, y1);
      const double v = (1 - wy) * top + wy * bot;
      out.at(x, y) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  }
  return out;
}

GrayImage crop(const GrayImage& img, const Rect& r) {
  if (r.w < 1 || r.h < 1 || r.x < 0 || r.y < 0 || r.x + r.w > img.width ||
      r.y + r.h > img.height)
    fail(Errc::RectOutOfBounds, "crop outside image");
  GrayImage out;
  out.width = r.w;
  out.height = r.h;
  out.luma.resize(std::size_t(r.w) * r.h);
  for (int y = 0; y < r.h; ++y)
    std::copy_n(img.luma.data() + std::size_t(r.y + y) * img.width + r.x, r.w,
                out.luma.data() + std::size_t(y) * r.w);
  return out;
}

} // namespace crowdlens
