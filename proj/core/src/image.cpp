#include "depthsim/image.hpp"

#include <algorithm>
#include <array>
#include <stdexcept>

namespace depthsim {

ImageF extract_channel(const ImageF& img, int channel) {
  if (channel < 0 || channel >= img.channels) throw std::out_of_range("extract_channel: bad channel");
  ImageF out(img.width, img.height, 1);
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    out.data[i] = img.data[i * img.channels + channel];
  return out;
}

ImageF to_float(const Image8& img) {
  ImageF out(img.width, img.height, img.channels);
  std::copy(img.data.begin(), img.data.end(), out.data.begin());
  return out;
}

ImageF median3x3(const ImageF& img) {
  ImageF out(img.width, img.height, img.channels);
  std::array<float, 9> win{};
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) {
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy) {
          const int yy = std::clamp(y + dy, 0, img.height - 1);
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = std::clamp(x + dx, 0, img.width - 1);
            win[n++] = img.at(xx, yy, c);
          }
        }
        std::nth_element(win.begin(), win.begin() + 4, win.end());
        out.at(x, y, c) = win[4];
      }
    }
  }
  return out;
}

double ssim(const ImageF& a, const ImageF& b, double range) {
  if (!a.same_shape(b) || a.channels != 1) throw std::invalid_argument("ssim: shape mismatch");
  const double c1 = (0.01 * range) * (0.01 * range);
  const double c2 = (0.03 * range) * (0.03 * range);
  constexpr int r = 3;
  double total = 0;
  int count = 0;
  for (int y = r; y + r < a.height; ++y) {
    for (int x = r; x + r < a.width; ++x) {
      double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const double va = a.at(x + dx, y + dy), vb = b.at(x + dx, y + dy);
          sa += va; sb += vb; saa += va * va; sbb += vb * vb; sab += va * vb;
        }
      }
      constexpr double n = (2 * r + 1) * (2 * r + 1);
      const double ma = sa / n, mb = sb / n;
      const double va = saa / n - ma * ma, vb = sbb / n - mb * mb, cov = sab / n - ma * mb;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return count > 0 ? total / count : 1.0;
}

ImageF flip_horizontal(const ImageF& img) {
  ImageF out(img.width, img.height, img.channels);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < img.channels; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

}  // namespace depthsim
