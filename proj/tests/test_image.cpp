#include <doctest.h>

#include <random>

#include "crowdlens/image.hpp"
#include "synthetic.hpp"

using namespace crowdlens;

namespace {

std::vector<std::uint8_t> pnm_bytes(const std::string& header,
                                    std::initializer_list<int> body) {
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  for (int b : body) bytes.push_back(static_cast<std::uint8_t>(b));
  return bytes;
}

// Independent prefix-sum oracle for rect sums.
std::uint64_t brute_rect_sum(const GrayImage& img, const Rect& r) {
  std::uint64_t s = 0;
  for (int y = r.y; y < r.y + r.h; ++y)
    for (int x = r.x; x < r.x + r.w; ++x) s += img.at(x, y);
  return s;
}

} // namespace

TEST_SUITE_BEGIN("image");

TEST_CASE("decode_pnm reads a one pixel P5") {
  const auto buf = decode_pnm(pnm_bytes("P5\n1 1\n255\n", {0x7F}));
  CHECK(buf.width == 1);
  CHECK(buf.height == 1);
  CHECK(buf.channels == 1);
  CHECK(buf.data == std::vector<std::uint8_t>{127});
}

TEST_CASE("decode_pnm reads a 2x1 P6") {
  const auto buf = decode_pnm(pnm_bytes("P6\n2 1\n255\n", {255, 0, 0, 0, 255, 0}));
  CHECK(buf.width == 2);
  CHECK(buf.channels == 3);
  CHECK(buf.at(0, 0, 0) == 255);
  CHECK(buf.at(1, 0, 1) == 255);
}

TEST_CASE("decode_pnm skips header comments") {
  const auto buf = decode_pnm(pnm_bytes("P5\n# made by a test\n1 1\n# more\n255\n", {9}));
  CHECK(buf.at(0, 0) == 9);
}

TEST_CASE("decode_pnm rejects P4") {
  CHECK_THROWS_WITH_AS(decode_pnm(pnm_bytes("P4\n1 1\n", {0})), doctest::Contains("P5 or P6"),
                       Error);
  try {
    decode_pnm(pnm_bytes("P4\n1 1\n", {0}));
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnsupportedMagic);
  }
}

TEST_CASE("decode_pnm rejects other maxvals") {
  try {
    decode_pnm(pnm_bytes("P5\n1 1\n65535\n", {0, 0}));
    FAIL("expected MaxvalNot255");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::MaxvalNot255);
  }
}

TEST_CASE("decode_pnm rejects a truncated body") {
  try {
    decode_pnm(pnm_bytes("P6\n2 2\n255\n", {1, 2, 3}));
    FAIL("expected TruncatedBody");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TruncatedBody);
  }
}

TEST_CASE("encode then decode round-trips") {
  synth::Rng rng(7);
  PixelBuffer buf;
  buf.width = 5;
  buf.height = 3;
  buf.channels = 3;
  buf.data.resize(45);
  for (auto& v : buf.data) v = static_cast<std::uint8_t>(rng());
  const PixelBuffer back = decode_pnm(encode_pnm(buf));
  CHECK(back.width == buf.width);
  CHECK(back.height == buf.height);
  CHECK(back.channels == buf.channels);
  CHECK(back.data == buf.data);
  // Re-encoding the decode is byte-identical.
  CHECK(encode_pnm(back) == encode_pnm(buf));
}

TEST_CASE("to_gray endpoints and the red weight") {
  PixelBuffer buf;
  buf.width = 3;
  buf.height = 1;
  buf.channels = 3;
  buf.data = {0, 0, 0, 255, 255, 255, 255, 0, 0};
  const GrayImage g = to_gray(buf);
  CHECK(g.at(0, 0) == 0);
  CHECK(g.at(1, 0) == 255);
  CHECK(g.at(2, 0) == 76); // round(0.299 * 255)
}

TEST_CASE("to_gray is the identity on gray input") {
  synth::Rng rng(11);
  const GrayImage img = synth::noise_image(rng, 9, 4);
  PixelBuffer buf;
  buf.width = img.width;
  buf.height = img.height;
  buf.channels = 1;
  buf.data = img.luma;
  CHECK(to_gray(buf).luma == img.luma);
}

TEST_CASE("to_gray rejects other channel counts") {
  PixelBuffer buf;
  buf.width = 1;
  buf.height = 1;
  buf.channels = 2;
  buf.data = {1, 2};
  try {
    to_gray(buf);
    FAIL("expected BadChannelCount");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BadChannelCount);
  }
}

TEST_CASE("integral of single pixel and constant image") {
  GrayImage one;
  one.width = 1;
  one.height = 1;
  one.luma = {42};
  CHECK(integral(one).at(1, 1) == 42);

  GrayImage ones;
  ones.width = 4;
  ones.height = 4;
  ones.luma.assign(16, 1);
  const IntegralImage ii(ones);
  CHECK(ii.at(4, 4) == 16);
  CHECK(rect_sum(ii, {0, 0, 4, 4}) == 16);
}

TEST_CASE("integral matches the brute-force oracle on random images") {
  synth::Rng rng(3);
  const GrayImage img = synth::noise_image(rng, 16, 16);
  const IntegralImage ii(img);
  for (int y = 0; y <= 16; ++y)
    for (int x = 0; x <= 16; ++x) {
      std::uint64_t expected = 0;
      for (int yy = 0; yy < y; ++yy)
        for (int xx = 0; xx < x; ++xx) expected += img.at(xx, yy);
      CHECK(ii.at(x, y) == expected);
    }
}

TEST_CASE("integral entries are monotone along rows and columns") {
  synth::Rng rng(5);
  const GrayImage img = synth::noise_image(rng, 13, 9);
  const IntegralImage ii(img);
  for (int y = 0; y <= img.height; ++y)
    for (int x = 1; x <= img.width; ++x) CHECK(ii.at(x, y) >= ii.at(x - 1, y));
  for (int x = 0; x <= img.width; ++x)
    for (int y = 1; y <= img.height; ++y) CHECK(ii.at(x, y) >= ii.at(x, y - 1));
}

TEST_CASE("rect_sum equals the double loop for random rects") {
  synth::Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int w = synth::uniform_int(rng, 1, 40);
    const int h = synth::uniform_int(rng, 1, 40);
    const GrayImage img = synth::noise_image(rng, w, h);
    const IntegralImage ii(img);
    for (int i = 0; i < 50; ++i) {
      Rect r;
      r.x = synth::uniform_int(rng, 0, w - 1);
      r.y = synth::uniform_int(rng, 0, h - 1);
      r.w = synth::uniform_int(rng, 1, w - r.x);
      r.h = synth::uniform_int(rng, 1, h - r.y);
      CHECK(rect_sum(ii, r) == brute_rect_sum(img, r));
    }
  }
}

TEST_CASE("rect_sum rejects empty and out-of-bounds rects") {
  GrayImage img;
  img.width = 4;
  img.height = 4;
  img.luma.assign(16, 1);
  const IntegralImage ii(img);
  for (const Rect r : {Rect{0, 0, 0, 2}, Rect{0, 0, 2, 0}, Rect{3, 0, 2, 1}, Rect{-1, 0, 2, 2},
                       Rect{0, 4, 1, 1}}) {
    try {
      rect_sum(ii, r);
      FAIL("expected RectOutOfBounds");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::RectOutOfBounds);
    }
  }
}

TEST_CASE("rect_sum_sq matches the brute-force oracle") {
  synth::Rng rng(23);
  const GrayImage img = synth::noise_image(rng, 12, 7);
  const IntegralImage ii(img);
  for (int i = 0; i < 50; ++i) {
    Rect r;
    r.x = synth::uniform_int(rng, 0, 11);
    r.y = synth::uniform_int(rng, 0, 6);
    r.w = synth::uniform_int(rng, 1, 12 - r.x);
    r.h = synth::uniform_int(rng, 1, 7 - r.y);
    std::uint64_t expected = 0;
    for (int y = r.y; y < r.y + r.h; ++y)
      for (int x = r.x; x < r.x + r.w; ++x)
        expected += std::uint64_t(img.at(x, y)) * img.at(x, y);
    CHECK(ii.sum_sq(r) == expected);
  }
}

TEST_CASE("resize to the same size is the identity") {
  synth::Rng rng(29);
  const GrayImage img = synth::noise_image(rng, 10, 6);
  CHECK(resize(img, 10, 6).luma == img.luma);
}

TEST_CASE("resize preserves constant images") {
  GrayImage img;
  img.width = 2;
  img.height = 2;
  img.luma.assign(4, 100);
  for (const auto [w, h] : {std::pair{1, 1}, {5, 3}, {8, 8}}) {
    const GrayImage out = resize(img, w, h);
    for (std::uint8_t v : out.luma) CHECK(v == 100);
  }
}

TEST_CASE("resize interpolates a 1x2 ramp to 1x3") {
  GrayImage img;
  img.width = 1;
  img.height = 2;
  img.luma = {0, 255};
  const GrayImage out = resize(img, 1, 3);
  CHECK(out.at(0, 0) == 0);
  CHECK(std::abs(int(out.at(0, 1)) - 127) <= 1); // center near 127.5
  CHECK(out.at(0, 2) == 255);
}

TEST_CASE("crop copies the selected pixels") {
  synth::Rng rng(31);
  const GrayImage img = synth::noise_image(rng, 8, 8);
  const GrayImage c = crop(img, {2, 3, 4, 2});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 4; ++x) CHECK(c.at(x, y) == img.at(x + 2, y + 3));
}

TEST_CASE("iou basics") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == doctest::Approx(1.0));
  CHECK(iou({0, 0, 10, 10}, {20, 20, 5, 5}) == doctest::Approx(0.0));
  CHECK(iou({0, 0, 10, 10}, {5, 0, 10, 10}) == doctest::Approx(50.0 / 150.0));
}

TEST_SUITE_END();
