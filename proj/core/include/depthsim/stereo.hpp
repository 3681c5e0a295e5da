#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "depthsim/image.hpp"
#include "depthsim/math.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

// INVALID in float disparity/depth maps.
inline constexpr float kInvalid = std::numeric_limits<float>::quiet_NaN();
inline bool is_valid(float v) { return !std::isnan(v); }

struct StereoConfig {
  int census_width = 9;
  int census_height = 7;
  int block_width = 1;
  int block_height = 1;
  int min_disp = 0;
  int max_disp = 64;
  // Negative selects the defaults 8*block_area and 32*block_area.
  int p1 = -1;
  int p2 = -1;
  int uniqueness_ratio = 10;  // percent
  double lr_max_diff = 1.0;   // px; infinity keeps every in-bounds lookup
  int median_ksize = 3;       // 0, 3 or 5

  // Stage toggles for compute_depth.
  bool rectify = true;
  bool sgm = true;
  bool subpixel = true;
  bool lr_check = true;
  bool registration = true;

  // Lets p1 = p2 = 0 through validation; only for tests.
  bool allow_zero_penalties = false;

  int block_area() const { return block_width * block_height; }
  int census_bits() const { return census_width * census_height / 2; }
  int disp_count() const { return max_disp - min_disp; }
  int penalty1() const { return p1 < 0 ? 8 * block_area() : p1; }
  int penalty2() const { return p2 < 0 ? 32 * block_area() : p2; }

  // Throws ValidationError naming `stereo.<field>`.
  void validate() const;
};

// Center-symmetric census bitstrings, up to 112 bits in two words. Bit j is
// the j-th point-symmetric pair (p_a, mirror of p_a), with p_a running over
// the first half of the window in row-major order; the bit is 1 iff
// I(p_a) > I(mirror).
struct CensusImage {
  using Bits = std::array<std::uint64_t, 2>;
  int width = 0, height = 0;
  int bits = 0;
  std::vector<Bits> data;
  std::vector<std::uint8_t> valid;  // 0 where the window leaves the image

  const Bits& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
  bool is_valid_at(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
};

// Matching-cost tensor, layout ((y * width) + x) * disp_count + d, where
// slice d holds disparity min_disp + d.
template <typename T>
struct Volume {
  int width = 0, height = 0, disp_count = 0, min_disp = 0;
  std::uint32_t max_cost = 0;  // theoretical per-cell bound
  std::vector<T> data;
  // Same layout as data; 0 marks cells with no match evidence (out of range
  // or census border). Empty means every cell is known.
  std::vector<std::uint8_t> known;

  Volume() = default;
  Volume(int w, int h, int d, int min_d, std::uint32_t max_c)
      : width(w), height(h), disp_count(d), min_disp(min_d), max_cost(max_c),
        data(static_cast<std::size_t>(w) * h * d, 0) {}

  std::size_t index(int x, int y, int d) const {
    return (static_cast<std::size_t>(y) * width + x) * disp_count + d;
  }
  T& at(int x, int y, int d) { return data[index(x, y, d)]; }
  const T& at(int x, int y, int d) const { return data[index(x, y, d)]; }
  const T* pixel(int x, int y) const { return data.data() + index(x, y, 0); }
  T* pixel(int x, int y) { return data.data() + index(x, y, 0); }
};

using CostVolume = Volume<std::uint16_t>;
using AggregatedVolume = Volume<std::uint32_t>;

// Float disparity (px) or depth (m) maps; NaN marks INVALID.
using DisparityMap = ImageF;
using DepthMap = ImageF;

CensusImage census(const Image8& img, const StereoConfig& cfg);

// cost(x, y, d) = hamming(cl[x, y], cr[x - d, y]), box-summed over the block
// for block sizes above 1x1. Out-of-range or invalid entries hold the max
// and are flagged unknown.
CostVolume matching_cost(const CensusImage& cl, const CensusImage& cr, const StereoConfig& cfg);

// Right-view volume by re-indexing: right(x, y, d) = left(x + d, y, d).
CostVolume right_view_cost(const CostVolume& left);

// Copy where unknown cells take the rounded mean of the pixel's known costs
// (0 if none), so missing evidence favours no disparity.
CostVolume neutralize_unknown(const CostVolume& cv);

// Sum over the 4 axis-aligned SGM paths, run on neutralize_unknown(cv).
AggregatedVolume sgm_aggregate(const CostVolume& cv, const StereoConfig& cfg);

// Neutralized raw costs widened to the aggregated type (SGM stage disabled).
AggregatedVolume widen(const CostVolume& cv);

// Integer winner-take-all with the uniqueness test; INVALID where it fails.
DisparityMap wta(const AggregatedVolume& cv, const StereoConfig& cfg);

// Parabola-vertex refinement of integer disparities.
DisparityMap subpixel(const AggregatedVolume& cv, const DisparityMap& d);
double subpixel_offset(double c_minus, double c0, double c_plus);

DisparityMap lr_check(const DisparityMap& dl, const DisparityMap& dr, const StereoConfig& cfg);

// Median over the valid pixels of the ksize x ksize window; INVALID pixels
// stay INVALID; an even count averages the two middle values.
DisparityMap median_filter(const DisparityMap& d, int ksize);

DepthMap disp_to_depth(const DisparityMap& d, double fx, double baseline);

// Reprojects valid depth samples into rgb_cam; nearest sample wins.
DepthMap register_depth(const DepthMap& z, const CameraModel& ir_cam, const CameraModel& rgb_cam);

// Homographies map input pixel coordinates to output pixel coordinates.
struct StereoPair {
  Image8 left, right;
};
StereoPair rectify(const Image8& left, const Image8& right, const SensorRig& rig);
StereoPair rectify(const Image8& left, const Image8& right, const Mat3& h_left, const Mat3& h_right);
Image8 warp_homography(const Image8& img, const Mat3& h);

struct DepthOutput {
  DisparityMap disparity;
  DepthMap depth;
  DepthMap registered_depth;  // empty when registration is off
};

// Disparity only: census, cost, SGM, WTA, subpixel, LR check, median.
DisparityMap compute_disparity(const Image8& left, const Image8& right, const StereoConfig& cfg);

// Full chain: rectify -> disparity -> depth -> registration into rig.rgb.
DepthOutput compute_depth(const Image8& left, const Image8& right, const StereoConfig& cfg, const SensorRig& rig);

}  // namespace depthsim
