#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace depthsim {

// Interleaved, row-major image with the origin at the top-left pixel.
template <typename T>
struct Image {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<T> data;

  Image() = default;
  Image(int w, int h, int c = 1, T fill = T{})
      : width(w), height(h), channels(c), data(static_cast<std::size_t>(w) * h * c, fill) {}

  bool empty() const { return data.empty(); }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
  std::size_t index(int x, int y, int c = 0) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }

  T& at(int x, int y, int c = 0) { return data[index(x, y, c)]; }
  const T& at(int x, int y, int c = 0) const { return data[index(x, y, c)]; }

  std::span<T> row(int y) { return {data.data() + index(0, y), static_cast<std::size_t>(width) * channels}; }
  std::span<const T> row(int y) const {
    return {data.data() + index(0, y), static_cast<std::size_t>(width) * channels};
  }

  bool same_shape(const Image& o) const {
    return width == o.width && height == o.height && channels == o.channels;
  }

  friend bool operator==(const Image&, const Image&) = default;
};

using ImageF = Image<float>;
using Image8 = Image<std::uint8_t>;

// Linear radiance, non-negative; the renderer's output type.
using RadianceImage = ImageF;

ImageF extract_channel(const ImageF& img, int channel);
ImageF to_float(const Image8& img);

// 3x3 median per channel; border pixels use the clamped neighbourhood.
ImageF median3x3(const ImageF& img);

// Mean structural similarity over 7x7 windows (single channel, range `range`).
double ssim(const ImageF& a, const ImageF& b, double range);

ImageF flip_horizontal(const ImageF& img);

}  // namespace depthsim
