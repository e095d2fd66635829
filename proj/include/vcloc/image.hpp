#pragma once

#include <filesystem>
#include <vector>

namespace vcloc {

/// Row-major single-channel float raster. Intensities are nominally in [0, 1].
class Image {
 public:
  Image() = default;
  Image(int width, int height, float fill = 0.0f);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return width_ == 0 || height_ == 0; }

  float& operator()(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  float operator()(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
  /// Clamped read; out-of-range coordinates return the nearest border pixel.
  float at_clamped(int x, int y) const;

  const std::vector<float>& data() const { return data_; }

  /// Copy of the rectangle [x, x+w) x [y, y+h); must lie inside the image.
  Image crop(int x, int y, int w, int h) const;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<float> data_;
};

/// 2x2 box-filter decimation (odd trailing row/column dropped).
Image downsample2(const Image& img);

/// Binary (P5) or ASCII (P2) 8/16-bit PGM; values scaled to [0, 1].
Image read_pgm(const std::filesystem::path& path);
void write_pgm(const std::filesystem::path& path, const Image& img);

}  // namespace vcloc
