#include "pageopt/correctness.h"

#include <filesystem>
#include <random>

#include "doctest.h"
#include "pageopt/errors.h"

namespace pageopt {
namespace {

Screenshot RandomImage(std::mt19937& rng, int w, int h, int palette) {
  Screenshot img(w, h);
  std::uniform_int_distribution<int> pick(0, palette - 1);
  for (auto& byte : img.pixels) byte = uint8_t(pick(rng) * 60);
  return img;
}

int64_t DoubleLoopDiff(const Screenshot& a, const Screenshot& b) {
  int64_t count = 0;
  for (int y = 0; y < a.height; ++y) {
    for (int x = 0; x < a.width; ++x) {
      const uint8_t* p = a.At(x, y);
      const uint8_t* q = b.At(x, y);
      if (p[0] != q[0] || p[1] != q[1] || p[2] != q[2] || p[3] != q[3]) {
        ++count;
      }
    }
  }
  return count;
}

TEST_CASE("PixelDiff examples") {
  Screenshot a(10, 10);
  CHECK(PixelDiff(a, a) == 0);
  Screenshot b = a;
  b.At(3, 4)[0] = 7;
  CHECK(PixelDiff(a, b) == 1);
  b.At(3, 4)[3] = 0;  // same pixel, second channel
  CHECK(PixelDiff(a, b) == 1);
  b.At(9, 9)[3] = 0;  // alpha counts
  CHECK(PixelDiff(a, b) == 2);
  CHECK_THROWS_AS(PixelDiff(a, Screenshot(10, 9)), DimensionMismatch);
}

TEST_CASE("PixelDiff tolerance knob") {
  Screenshot a(2, 1);
  Screenshot b = a;
  b.At(0, 0)[1] = 250;  // 5 away
  CHECK(PixelDiff(a, b, 0) == 1);
  CHECK(PixelDiff(a, b, 5) == 0);
  CHECK(PixelDiff(a, b, 4) == 1);
}

TEST_CASE("PixelDiff matches a double loop, is symmetric and reflexive") {
  std::mt19937 rng(1234);
  for (int round = 0; round < 200; ++round) {
    int w = 1 + round % 17;
    int h = 1 + (round * 7) % 13;
    Screenshot a = RandomImage(rng, w, h, 2 + round % 3);
    Screenshot b = RandomImage(rng, w, h, 2 + round % 3);
    CHECK(PixelDiff(a, b) == DoubleLoopDiff(a, b));
    CHECK(PixelDiff(a, b) == PixelDiff(b, a));
    CHECK(PixelDiff(a, a) == 0);
  }
}

TEST_CASE("CalibrateThreshold") {
  Screenshot a(20, 20);
  CHECK(CalibrateThreshold(a, a, 3.0, 0) == 0);
  Screenshot b = a;
  for (int i = 0; i < 10; ++i) b.At(i, 0)[2] = 0;
  CHECK(CalibrateThreshold(a, b, 3.0, 0) == 30);
  CHECK(CalibrateThreshold(a, a, 3.0, 25) == 25);
  CHECK(CalibrateThreshold(a, b, 1.05, 0) == 11);  // ceil(10.5)
  CHECK_THROWS_AS(CalibrateThreshold(a, b, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(CalibrateThreshold(a, b, 2.0, -1), std::invalid_argument);
  CHECK_THROWS_AS(CalibrateThreshold(a, Screenshot(1, 1), 2.0, 0),
                  DimensionMismatch);
}

TEST_CASE("Judge") {
  Screenshot oracle(8, 8);
  Screenshot off = oracle;
  off.At(0, 0)[0] = 0;
  CHECK(Judge(oracle, oracle, 0, true).pass);
  CHECK_FALSE(Judge(oracle, oracle, 0, false).pass);
  CHECK_FALSE(Judge(oracle, off, 0, true).pass);
  CHECK(Judge(oracle, off, 1, true).pass);
  CorrectnessVerdict mismatch = Judge(oracle, Screenshot(4, 4), 1000, true);
  CHECK_FALSE(mismatch.pass);
  CHECK(mismatch.pixel_diff == 64);
}

TEST_CASE("Judge is monotone in the diff") {
  std::mt19937 rng(9);
  Screenshot oracle(6, 6);
  for (int threshold = 0; threshold < 10; ++threshold) {
    for (int diff = 0; diff <= 12; ++diff) {
      Screenshot candidate = oracle;
      for (int i = 0; i < diff; ++i) candidate.pixels[size_t(i) * 4] = 1;
      bool pass = Judge(oracle, candidate, threshold, true).pass;
      CHECK(pass == (diff <= threshold));
      if (pass) {
        for (int lower = 0; lower < diff; ++lower) {
          Screenshot c2 = oracle;
          for (int i = 0; i < lower; ++i) c2.pixels[size_t(i) * 4] = 1;
          CHECK(Judge(oracle, c2, threshold, true).pass);
        }
      }
    }
  }
}

TEST_CASE("PNG round trip") {
  std::mt19937 rng(5);
  Screenshot img = RandomImage(rng, 33, 21, 4);
  CHECK(DecodePng(EncodePng(img)) == img);
  auto path = std::filesystem::temp_directory_path() / "pageopt_png_test.png";
  WritePngFile(path, img);
  CHECK(ReadPngFile(path) == img);
  std::filesystem::remove(path);
  std::vector<uint8_t> junk = {1, 2, 3};
  CHECK_THROWS_AS(DecodePng(junk), Error);
}

}  // namespace
}  // namespace pageopt
