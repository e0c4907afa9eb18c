#include "pageopt/correctness.h"

#include <png.h>

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <stdexcept>

#include "pageopt/errors.h"

namespace pageopt {

Screenshot::Screenshot(int w, int h, uint8_t r, uint8_t g, uint8_t b,
                       uint8_t a)
    : width(w), height(h), pixels(size_t(w) * h * 4) {
  for (size_t i = 0; i < pixels.size(); i += 4) {
    pixels[i] = r;
    pixels[i + 1] = g;
    pixels[i + 2] = b;
    pixels[i + 3] = a;
  }
}

std::vector<uint8_t> EncodePng(const Screenshot& image) {
  if (!image.Valid()) throw Error("screenshot buffer size is inconsistent");
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  png.width = static_cast<png_uint_32>(image.width);
  png.height = static_cast<png_uint_32>(image.height);
  png.format = PNG_FORMAT_RGBA;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&png, nullptr, &size, 0,
                                 image.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + png.message);
  }
  std::vector<uint8_t> out(size);
  if (!png_image_write_to_memory(&png, out.data(), &size, 0,
                                 image.pixels.data(), 0, nullptr)) {
    throw Error(std::string("png encode failed: ") + png.message);
  }
  out.resize(size);
  return out;
}

Screenshot DecodePng(std::span<const uint8_t> bytes) {
  png_image png{};
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&png, bytes.data(), bytes.size())) {
    throw Error(std::string("png decode failed: ") + png.message);
  }
  png.format = PNG_FORMAT_RGBA;
  Screenshot image;
  image.width = static_cast<int>(png.width);
  image.height = static_cast<int>(png.height);
  image.pixels.resize(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, image.pixels.data(), 0, nullptr)) {
    png_image_free(&png);
    throw Error(std::string("png decode failed: ") + png.message);
  }
  return image;
}

void WritePngFile(const std::filesystem::path& path, const Screenshot& image) {
  std::vector<uint8_t> bytes = EncodePng(image);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("cannot write " + path.string());
}

Screenshot ReadPngFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                             std::istreambuf_iterator<char>());
  return DecodePng(bytes);
}

int64_t PixelDiff(const Screenshot& a, const Screenshot& b,
                  int channel_tolerance) {
  if (a.width != b.width || a.height != b.height) {
    throw DimensionMismatch(
        "screenshots differ in size: " + std::to_string(a.width) + "x" +
        std::to_string(a.height) + " vs " + std::to_string(b.width) + "x" +
        std::to_string(b.height));
  }
  int64_t count = 0;
  const size_t n = a.pixels.size();
  for (size_t i = 0; i < n; i += 4) {
    for (size_t c = 0; c < 4; ++c) {
      if (std::abs(int(a.pixels[i + c]) - int(b.pixels[i + c])) >
          channel_tolerance) {
        ++count;
        break;
      }
    }
  }
  return count;
}

int64_t CalibrateThreshold(const Screenshot& oracle_a,
                           const Screenshot& oracle_b, double multiplier,
                           int64_t floor) {
  if (!(multiplier >= 1.0)) {
    throw std::invalid_argument("threshold multiplier must be >= 1");
  }
  if (floor < 0) throw std::invalid_argument("threshold floor must be >= 0");
  int64_t base = PixelDiff(oracle_a, oracle_b);
  auto scaled = static_cast<int64_t>(std::ceil(multiplier * double(base)));
  return std::max(scaled, floor);
}

CorrectnessVerdict Judge(const Screenshot& oracle, const Screenshot& candidate,
                         int64_t threshold, bool loaded,
                         int channel_tolerance) {
  CorrectnessVerdict verdict;
  verdict.loaded = loaded;
  verdict.threshold = threshold;
  try {
    verdict.pixel_diff = PixelDiff(oracle, candidate, channel_tolerance);
  } catch (const DimensionMismatch&) {
    verdict.pixel_diff = int64_t(oracle.width) * oracle.height;
    verdict.pass = false;
    return verdict;
  }
  verdict.pass = loaded && verdict.pixel_diff <= threshold;
  return verdict;
}

}  // namespace pageopt
