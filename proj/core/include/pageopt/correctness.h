#ifndef PAGEOPT_CORRECTNESS_H_
#define PAGEOPT_CORRECTNESS_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace pageopt {

// Row-major 8-bit RGBA image.
struct Screenshot {
  int width = 0;
  int height = 0;
  std::vector<uint8_t> pixels;  // width * height * 4 bytes

  Screenshot() = default;
  // Filled with a single colour.
  Screenshot(int w, int h, uint8_t r = 255, uint8_t g = 255, uint8_t b = 255,
             uint8_t a = 255);

  bool Valid() const {
    return width >= 0 && height >= 0 &&
           pixels.size() == static_cast<size_t>(width) * height * 4;
  }
  uint8_t* At(int x, int y) { return &pixels[(size_t(y) * width + x) * 4]; }
  const uint8_t* At(int x, int y) const {
    return &pixels[(size_t(y) * width + x) * 4];
  }

  friend bool operator==(const Screenshot&, const Screenshot&) = default;
};

std::vector<uint8_t> EncodePng(const Screenshot& image);
// Any PNG libpng understands, converted to 8-bit RGBA. Throws Error.
Screenshot DecodePng(std::span<const uint8_t> bytes);

void WritePngFile(const std::filesystem::path& path, const Screenshot& image);
Screenshot ReadPngFile(const std::filesystem::path& path);

// Number of pixel positions where any channel differs by more than
// `channel_tolerance` (0 = exact). Throws DimensionMismatch.
int64_t PixelDiff(const Screenshot& a, const Screenshot& b,
                  int channel_tolerance = 0);

// max(ceil(multiplier * PixelDiff(a, b)), floor). Throws DimensionMismatch
// and std::invalid_argument for multiplier < 1 or floor < 0.
int64_t CalibrateThreshold(const Screenshot& oracle_a,
                           const Screenshot& oracle_b, double multiplier,
                           int64_t floor);

struct CorrectnessVerdict {
  bool loaded = false;
  int64_t pixel_diff = 0;
  int64_t threshold = 0;
  bool pass = false;
};

// pass <=> loaded && pixel_diff <= threshold. A size mismatch fails with
// pixel_diff set to the oracle's pixel count.
CorrectnessVerdict Judge(const Screenshot& oracle, const Screenshot& candidate,
                         int64_t threshold, bool loaded,
                         int channel_tolerance = 0);

}  // namespace pageopt

#endif  // PAGEOPT_CORRECTNESS_H_
