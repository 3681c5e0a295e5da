#include "depthsim/stereo.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "depthsim/error.hpp"
#include "depthsim/parallel.hpp"

namespace depthsim {

namespace {

void check_odd(int v, const char* field, int lo, int hi) {
  if (v < lo || v > hi || v % 2 == 0)
    throw ValidationError(std::string("stereo.") + field,
                          "must be odd in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
}

void check_gray(const Image8& img, const char* what) {
  if (img.channels != 1) throw RuntimeError(std::string(what) + ": stereo input must be single-channel");
  if (img.empty()) throw RuntimeError(std::string(what) + ": empty image");
}

inline int hamming(const CensusImage::Bits& a, const CensusImage::Bits& b) {
  return std::popcount(a[0] ^ b[0]) + std::popcount(a[1] ^ b[1]);
}

// Number of columns processed together by one vertical-path task.
constexpr int kColumnChunk = 16;

// One SGM step: cur[d] = c[d] + min(prev[d], prev[d+-1] + p1, min(prev) + p2) - min(prev).
inline void sgm_step(const std::uint16_t* c, const std::uint32_t* prev, std::uint32_t* cur, int n, std::uint32_t p1,
                     std::uint32_t p2) {
  std::uint32_t prev_min = prev[0];
  for (int d = 1; d < n; ++d) prev_min = std::min(prev_min, prev[d]);
  const std::uint32_t jump = prev_min + p2;
  for (int d = 0; d < n; ++d) {
    std::uint32_t best = std::min(prev[d], jump);
    if (d > 0) best = std::min(best, prev[d - 1] + p1);
    if (d + 1 < n) best = std::min(best, prev[d + 1] + p1);
    cur[d] = c[d] + best - prev_min;
  }
}

}  // namespace

void StereoConfig::validate() const {
  check_odd(census_width, "census_width", 1, 15);
  check_odd(census_height, "census_height", 1, 15);
  if (census_bits() < 1) throw ValidationError("stereo.census_width", "census window needs at least 3 pixels");
  check_odd(block_width, "block_width", 1, 15);
  check_odd(block_height, "block_height", 1, 15);
  if (static_cast<long>(block_area()) * census_bits() > 65535)
    throw ValidationError("stereo.block_width", "block cost exceeds 16 bits");
  if (min_disp < 0) throw ValidationError("stereo.min_disp", "must be >= 0");
  if (max_disp <= min_disp) throw ValidationError("stereo.max_disp", "must be > min_disp");
  const int a = penalty1(), b = penalty2();
  if (allow_zero_penalties && a == 0 && b == 0) {
    // Test-only configuration.
  } else {
    if (!(a > 0)) throw ValidationError("stereo.p1", "must be > 0");
    if (!(b > a)) throw ValidationError("stereo.p2", "must be > p1");
  }
  if (uniqueness_ratio < 0) throw ValidationError("stereo.uniqueness_ratio", "must be >= 0");
  if (!(lr_max_diff >= 0)) throw ValidationError("stereo.lr_max_diff", "must be >= 0");
  if (median_ksize != 0 && median_ksize != 3 && median_ksize != 5)
    throw ValidationError("stereo.median_ksize", "must be 0, 3 or 5");
}

CensusImage census(const Image8& img, const StereoConfig& cfg) {
  check_gray(img, "census");
  const int w = cfg.census_width, h = cfg.census_height;
  if (w > img.width || h > img.height) throw RuntimeError("census window larger than the image");
  const int rx = w / 2, ry = h / 2;
  const int bits = w * h / 2;
  if (bits > 128) throw ValidationError("stereo.census_width", "census window too large");

  // Offsets of p_a for each pair, in row-major order over the window.
  std::vector<std::pair<int, int>> pairs;
  for (int j = 0; j < bits; ++j) pairs.emplace_back(j % w - rx, j / w - ry);

  CensusImage out;
  out.width = img.width;
  out.height = img.height;
  out.bits = bits;
  out.data.assign(img.pixel_count(), {0, 0});
  out.valid.assign(img.pixel_count(), 0);
  parallel_for(static_cast<std::size_t>(img.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    if (y < ry || y >= img.height - ry) return;
    for (int x = rx; x < img.width - rx; ++x) {
      CensusImage::Bits b{0, 0};
      for (int j = 0; j < bits; ++j) {
        const auto [dx, dy] = pairs[j];
        if (img.at(x + dx, y + dy) > img.at(x - dx, y - dy)) b[j >> 6] |= std::uint64_t{1} << (j & 63);
      }
      const std::size_t i = static_cast<std::size_t>(y) * img.width + x;
      out.data[i] = b;
      out.valid[i] = 1;
    }
  });
  return out;
}

CostVolume matching_cost(const CensusImage& cl, const CensusImage& cr, const StereoConfig& cfg) {
  if (cl.width != cr.width || cl.height != cr.height || cl.bits != cr.bits)
    throw RuntimeError("matching_cost: census images differ in shape");
  const int W = cl.width, H = cl.height, D = cfg.disp_count();
  const auto pix_max = static_cast<std::uint16_t>(cl.bits);

  // Per-pixel hamming costs.
  CostVolume pix(W, H, D, cfg.min_disp, pix_max);
  pix.known.assign(pix.data.size(), 1);
  parallel_for(static_cast<std::size_t>(H), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < W; ++x) {
      std::uint16_t* c = pix.pixel(x, y);
      const bool lv = cl.is_valid_at(x, y);
      const auto& lb = cl.at(x, y);
      for (int d = 0; d < D; ++d) {
        const int xr = x - (cfg.min_disp + d);
        if (!lv || xr < 0 || !cr.is_valid_at(xr, y)) {
          c[d] = pix_max;
          pix.known[pix.index(x, y, d)] = 0;
        } else {
          c[d] = static_cast<std::uint16_t>(hamming(lb, cr.at(xr, y)));
        }
      }
    }
  });
  if (cfg.block_area() == 1) return pix;

  // Box sum over the block; cells outside the image count as max cost.
  const int bx = cfg.block_width / 2, by = cfg.block_height / 2;
  const auto block_max = static_cast<std::uint32_t>(pix_max) * cfg.block_area();
  CostVolume out(W, H, D, cfg.min_disp, block_max);
  out.known.assign(out.data.size(), 1);
  parallel_for(static_cast<std::size_t>(H), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    std::vector<std::uint32_t> acc(D);
    std::vector<std::uint8_t> known(D);
    for (int x = 0; x < W; ++x) {
      std::fill(acc.begin(), acc.end(), 0u);
      std::fill(known.begin(), known.end(), std::uint8_t{1});
      for (int dy = -by; dy <= by; ++dy) {
        for (int dx = -bx; dx <= bx; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (sx < 0 || sy < 0 || sx >= W || sy >= H) {
            for (int d = 0; d < D; ++d) acc[d] += pix_max;
            std::fill(known.begin(), known.end(), std::uint8_t{0});
            continue;
          }
          const std::uint16_t* c = pix.pixel(sx, sy);
          const std::uint8_t* k = pix.known.data() + pix.index(sx, sy, 0);
          for (int d = 0; d < D; ++d) {
            acc[d] += c[d];
            known[d] &= k[d];
          }
        }
      }
      std::uint16_t* o = out.pixel(x, y);
      std::uint8_t* ko = out.known.data() + out.index(x, y, 0);
      for (int d = 0; d < D; ++d) {
        o[d] = static_cast<std::uint16_t>(acc[d]);
        ko[d] = known[d];
      }
    }
  });
  return out;
}

CostVolume right_view_cost(const CostVolume& left) {
  CostVolume out(left.width, left.height, left.disp_count, left.min_disp, left.max_cost);
  out.known.assign(out.data.size(), 1);
  const auto max_c = static_cast<std::uint16_t>(left.max_cost);
  parallel_for(static_cast<std::size_t>(left.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < left.width; ++x) {
      std::uint16_t* o = out.pixel(x, y);
      for (int d = 0; d < left.disp_count; ++d) {
        const int xl = x + left.min_disp + d;
        const bool in = xl < left.width;
        o[d] = in ? left.at(xl, y, d) : max_c;
        out.known[out.index(x, y, d)] = in && (left.known.empty() || left.known[left.index(xl, y, d)]);
      }
    }
  });
  return out;
}

CostVolume neutralize_unknown(const CostVolume& cv) {
  CostVolume out = cv;
  if (cv.known.empty()) return out;
  const int D = cv.disp_count;
  parallel_for(static_cast<std::size_t>(cv.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < cv.width; ++x) {
      const std::size_t base = cv.index(x, y, 0);
      std::uint64_t sum = 0;
      int n = 0;
      for (int d = 0; d < D; ++d)
        if (cv.known[base + d]) {
          sum += cv.data[base + d];
          ++n;
        }
      if (n == D) continue;
      const auto fill = static_cast<std::uint16_t>(n == 0 ? 0 : (sum + n / 2) / n);
      for (int d = 0; d < D; ++d)
        if (!cv.known[base + d]) out.data[base + d] = fill;
    }
  });
  out.known.clear();
  return out;
}

AggregatedVolume widen(const CostVolume& raw) {
  const CostVolume cv = neutralize_unknown(raw);
  AggregatedVolume out(cv.width, cv.height, cv.disp_count, cv.min_disp, cv.max_cost);
  std::copy(cv.data.begin(), cv.data.end(), out.data.begin());
  return out;
}

AggregatedVolume sgm_aggregate(const CostVolume& raw, const StereoConfig& cfg) {
  const CostVolume cv = neutralize_unknown(raw);
  const int W = cv.width, H = cv.height, D = cv.disp_count;
  const auto p1 = static_cast<std::uint32_t>(cfg.penalty1());
  const auto p2 = static_cast<std::uint32_t>(cfg.penalty2());
  AggregatedVolume out(W, H, D, cv.min_disp, 4 * (cv.max_cost + p2));

  // Horizontal paths: one task per row, each owning its output row.
  parallel_for(static_cast<std::size_t>(H), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    std::vector<std::uint32_t> prev(D), cur(D);
    for (int dir = 0; dir < 2; ++dir) {
      const int x0 = dir == 0 ? 0 : W - 1;
      const int step = dir == 0 ? 1 : -1;
      for (int x = x0, i = 0; i < W; x += step, ++i) {
        const std::uint16_t* c = cv.pixel(x, y);
        if (i == 0) {
          for (int d = 0; d < D; ++d) cur[d] = c[d];
        } else {
          sgm_step(c, prev.data(), cur.data(), D, p1, p2);
        }
        std::uint32_t* o = out.pixel(x, y);
        for (int d = 0; d < D; ++d) o[d] += cur[d];
        std::swap(prev, cur);
      }
    }
  });

  // Vertical paths: one task per column chunk, each owning its columns.
  const int chunks = (W + kColumnChunk - 1) / kColumnChunk;
  parallel_for(static_cast<std::size_t>(chunks), [&](std::size_t chunk) {
    const int xa = static_cast<int>(chunk) * kColumnChunk;
    const int xb = std::min(W, xa + kColumnChunk);
    const int n = xb - xa;
    std::vector<std::uint32_t> prev(static_cast<std::size_t>(n) * D), cur(prev.size());
    for (int dir = 0; dir < 2; ++dir) {
      const int y0 = dir == 0 ? 0 : H - 1;
      const int step = dir == 0 ? 1 : -1;
      for (int y = y0, i = 0; i < H; y += step, ++i) {
        for (int k = 0; k < n; ++k) {
          const std::uint16_t* c = cv.pixel(xa + k, y);
          std::uint32_t* pc = cur.data() + static_cast<std::size_t>(k) * D;
          if (i == 0) {
            for (int d = 0; d < D; ++d) pc[d] = c[d];
          } else {
            sgm_step(c, prev.data() + static_cast<std::size_t>(k) * D, pc, D, p1, p2);
          }
          std::uint32_t* o = out.pixel(xa + k, y);
          for (int d = 0; d < D; ++d) o[d] += pc[d];
        }
        std::swap(prev, cur);
      }
    }
  });
  return out;
}

DisparityMap wta(const AggregatedVolume& cv, const StereoConfig& cfg) {
  DisparityMap out(cv.width, cv.height, 1, kInvalid);
  const auto ratio = static_cast<std::uint64_t>(cfg.uniqueness_ratio);
  parallel_for(static_cast<std::size_t>(cv.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < cv.width; ++x) {
      const std::uint32_t* c = cv.pixel(x, y);
      int best = 0;
      for (int d = 1; d < cv.disp_count; ++d)
        if (c[d] < c[best]) best = d;
      bool has_second = false;
      std::uint32_t second = 0;
      for (int d = 0; d < cv.disp_count; ++d) {
        if (d >= best - 1 && d <= best + 1) continue;
        if (!has_second || c[d] < second) {
          second = c[d];
          has_second = true;
        }
      }
      if (has_second && std::uint64_t{c[best]} * (100 + ratio) >= std::uint64_t{second} * 100) continue;
      out.at(x, y) = static_cast<float>(cv.min_disp + best);
    }
  });
  return out;
}

double subpixel_offset(double c_minus, double c0, double c_plus) {
  const double denom = c_minus - 2.0 * c0 + c_plus;
  if (!(denom > 0)) return 0.0;
  return std::clamp((c_minus - c_plus) / (2.0 * denom), -0.5, 0.5);
}

DisparityMap subpixel(const AggregatedVolume& cv, const DisparityMap& dmap) {
  DisparityMap out = dmap;
  parallel_for(static_cast<std::size_t>(cv.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < cv.width; ++x) {
      const float v = dmap.at(x, y);
      if (!is_valid(v)) continue;
      const int d = static_cast<int>(std::lround(v)) - cv.min_disp;
      if (d <= 0 || d >= cv.disp_count - 1) continue;
      const std::uint32_t* c = cv.pixel(x, y);
      out.at(x, y) = static_cast<float>(cv.min_disp + d + subpixel_offset(c[d - 1], c[d], c[d + 1]));
    }
  });
  return out;
}

DisparityMap lr_check(const DisparityMap& dl, const DisparityMap& dr, const StereoConfig& cfg) {
  if (!dl.same_shape(dr)) throw RuntimeError("lr_check: disparity maps differ in shape");
  DisparityMap out(dl.width, dl.height, 1, kInvalid);
  const bool unbounded = std::isinf(cfg.lr_max_diff);
  for (int y = 0; y < dl.height; ++y) {
    for (int x = 0; x < dl.width; ++x) {
      const float v = dl.at(x, y);
      if (!is_valid(v)) continue;
      const long xr = x - std::lround(v);
      if (xr < 0 || xr >= dl.width) continue;
      const float r = dr.at(static_cast<int>(xr), y);
      if (unbounded || (is_valid(r) && std::abs(v - r) <= cfg.lr_max_diff)) out.at(x, y) = v;
    }
  }
  return out;
}

DisparityMap median_filter(const DisparityMap& d, int ksize) {
  if (ksize == 0) return d;
  if (ksize != 3 && ksize != 5) throw ValidationError("stereo.median_ksize", "must be 0, 3 or 5");
  const int r = ksize / 2;
  DisparityMap out(d.width, d.height, 1, kInvalid);
  parallel_for(static_cast<std::size_t>(d.height), [&](std::size_t yy) {
    const int y = static_cast<int>(yy);
    std::vector<float> win;
    win.reserve(ksize * ksize);
    for (int x = 0; x < d.width; ++x) {
      if (!is_valid(d.at(x, y))) continue;
      win.clear();
      for (int dy = -r; dy <= r; ++dy)
        for (int dx = -r; dx <= r; ++dx) {
          const int sx = x + dx, sy = y + dy;
          if (!d.contains(sx, sy)) continue;
          const float v = d.at(sx, sy);
          if (is_valid(v)) win.push_back(v);
        }
      std::sort(win.begin(), win.end());
      const std::size_t n = win.size();
      out.at(x, y) = n % 2 == 1 ? win[n / 2] : 0.5f * (win[n / 2 - 1] + win[n / 2]);
    }
  });
  return out;
}

DepthMap disp_to_depth(const DisparityMap& d, double fx, double baseline) {
  if (!(fx > 0) || !(baseline > 0)) throw RuntimeError("disp_to_depth: fx and baseline must be > 0");
  constexpr double kEps = 1e-6;
  DepthMap z(d.width, d.height, 1, kInvalid);
  for (std::size_t i = 0; i < d.data.size(); ++i) {
    const float v = d.data[i];
    if (is_valid(v) && v > kEps) z.data[i] = static_cast<float>(fx * baseline / v);
  }
  return z;
}

DepthMap register_depth(const DepthMap& z, const CameraModel& ir_cam, const CameraModel& rgb_cam) {
  DepthMap out(rgb_cam.width, rgb_cam.height, 1, kInvalid);
  const Transform ir_to_rgb = rgb_cam.pose.inverse() * ir_cam.pose;
  for (int y = 0; y < z.height; ++y) {
    for (int x = 0; x < z.width; ++x) {
      const float depth = z.at(x, y);
      if (!is_valid(depth) || !(depth > 0)) continue;
      const Vec3 p{(x - ir_cam.cx) / ir_cam.fx * depth, (y - ir_cam.cy) / ir_cam.fy * depth, depth};
      const Vec3 q = ir_to_rgb.point(p);
      if (!(q.z > 0)) continue;
      const long u = std::lround(rgb_cam.fx * q.x / q.z + rgb_cam.cx);
      const long v = std::lround(rgb_cam.fy * q.y / q.z + rgb_cam.cy);
      if (u < 0 || v < 0 || u >= rgb_cam.width || v >= rgb_cam.height) continue;
      float& dst = out.at(static_cast<int>(u), static_cast<int>(v));
      const auto qz = static_cast<float>(q.z);
      if (!is_valid(dst) || qz < dst) dst = qz;
    }
  }
  return out;
}

Image8 warp_homography(const Image8& img, const Mat3& h) {
  if (std::abs(determinant(h)) < 1e-12) throw RuntimeError("rectify: singular homography");
  const Mat3 inv = inverse(h);
  Image8 out(img.width, img.height, img.channels, 0);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const Vec3 s = inv * Vec3{static_cast<double>(x), static_cast<double>(y), 1.0};
      if (!(std::abs(s.z) > 1e-15)) continue;
      const double sx = s.x / s.z, sy = s.y / s.z;
      if (!(sx >= 0 && sy >= 0 && sx <= img.width - 1 && sy <= img.height - 1)) continue;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const int x1 = std::min(x0 + 1, img.width - 1), y1 = std::min(y0 + 1, img.height - 1);
      const double tx = sx - x0, ty = sy - y0;
      for (int c = 0; c < img.channels; ++c) {
        const double v = (1 - ty) * ((1 - tx) * img.at(x0, y0, c) + tx * img.at(x1, y0, c)) +
                         ty * ((1 - tx) * img.at(x0, y1, c) + tx * img.at(x1, y1, c));
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

StereoPair rectify(const Image8& left, const Image8& right, const SensorRig& rig) {
  if (!left.same_shape(right)) throw RuntimeError("rectify: image sizes differ");
  // Simulated rigs are rectified by construction; validation enforces it.
  validate_rig(rig);
  return {left, right};
}

StereoPair rectify(const Image8& left, const Image8& right, const Mat3& h_left, const Mat3& h_right) {
  if (!left.same_shape(right)) throw RuntimeError("rectify: image sizes differ");
  return {warp_homography(left, h_left), warp_homography(right, h_right)};
}

DisparityMap compute_disparity(const Image8& left, const Image8& right, const StereoConfig& cfg) {
  cfg.validate();
  check_gray(left, "left");
  check_gray(right, "right");
  if (!left.same_shape(right)) throw RuntimeError("stereo images differ in size");

  const CensusImage cl = census(left, cfg);
  const CensusImage cr = census(right, cfg);
  const CostVolume raw = matching_cost(cl, cr, cfg);
  const auto aggregate = [&](const CostVolume& v) { return cfg.sgm ? sgm_aggregate(v, cfg) : widen(v); };

  DisparityMap dl;
  {
    const AggregatedVolume agg = aggregate(raw);
    dl = wta(agg, cfg);
    if (cfg.subpixel) dl = subpixel(agg, dl);
  }
  if (cfg.lr_check) {
    const AggregatedVolume agg_r = aggregate(right_view_cost(raw));
    DisparityMap dr = wta(agg_r, cfg);
    if (cfg.subpixel) dr = subpixel(agg_r, dr);
    dl = lr_check(dl, dr, cfg);
  }
  return median_filter(dl, cfg.median_ksize);
}

DepthOutput compute_depth(const Image8& left, const Image8& right, const StereoConfig& cfg, const SensorRig& rig) {
  StereoPair pair = cfg.rectify ? rectify(left, right, rig) : StereoPair{left, right};
  DepthOutput out;
  out.disparity = compute_disparity(pair.left, pair.right, cfg);
  out.depth = disp_to_depth(out.disparity, rig.ir_left.fx, rig.baseline);
  if (cfg.registration) out.registered_depth = register_depth(out.depth, rig.ir_left, rig.rgb);
  return out;
}

}  // namespace depthsim
