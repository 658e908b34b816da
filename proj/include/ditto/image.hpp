#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace ditto {

struct ImageSize {
  int width = 0;
  int height = 0;
  bool operator==(const ImageSize&) const = default;
};

struct PixelIndex {
  int x = 0;
  int y = 0;
};

/// Round-half-up to the nearest pixel; nullopt when outside the image.
inline std::optional<PixelIndex> nearest_pixel(double u, double v, ImageSize size) {
  if (!std::isfinite(u) || !std::isfinite(v)) return std::nullopt;
  const double x = std::floor(u + 0.5);
  const double y = std::floor(v + 0.5);
  if (x < 0.0 || y < 0.0 || x >= size.width || y >= size.height) return std::nullopt;
  return PixelIndex{static_cast<int>(x), static_cast<int>(y)};
}

/// Row-major depth in meters, 32-bit float as stored on disk.
struct DepthImage {
  ImageSize size;
  std::vector<float> data;

  DepthImage() = default;
  explicit DepthImage(ImageSize s) : size(s), data(static_cast<std::size_t>(s.width) * s.height, 0.0f) {}

  float& at(int x, int y) { return data[static_cast<std::size_t>(y) * size.width + x]; }
  float at(int x, int y) const { return data[static_cast<std::size_t>(y) * size.width + x]; }
  bool operator==(const DepthImage&) const = default;
};

/// Per-pixel occupancy, row-major.
struct Mask {
  ImageSize size;
  std::vector<std::uint8_t> data;

  Mask() = default;
  explicit Mask(ImageSize s, bool value = false)
      : size(s), data(static_cast<std::size_t>(s.width) * s.height, value ? 1 : 0) {}

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * size.width + x] != 0; }
  void set(int x, int y, bool value = true) {
    data[static_cast<std::size_t>(y) * size.width + x] = value ? 1 : 0;
  }
  /// Membership of the round-half-up pixel; out-of-bounds is outside.
  bool contains(double u, double v) const {
    const auto p = nearest_pixel(u, v, size);
    return p && at(p->x, p->y);
  }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool operator==(const Mask&) const = default;
};

Mask intersect(const Mask& a, const Mask& b);

/// Depth outside (0, 10 m] or non-finite is treated as missing.
inline constexpr double kMaxValidDepth = 10.0;
inline bool is_valid_depth(double d) { return std::isfinite(d) && d > 0.0 && d <= kMaxValidDepth; }

/// Raw little-endian float32, row-major; dimensions come from the caller.
DepthImage read_depth(const std::filesystem::path& path, ImageSize size);
void write_depth(const std::filesystem::path& path, const DepthImage& depth);

/// Binary PGM (P5, maxval 255): 0 = background, nonzero = inside.
Mask read_mask(const std::filesystem::path& path);
void write_mask(const std::filesystem::path& path, const Mask& mask);

}  // namespace ditto
