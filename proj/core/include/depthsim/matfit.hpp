#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "depthsim/image.hpp"
#include "depthsim/render.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

enum class CaptureTag { sim, real_target };

// Linear RGB (3 channels) and IR (1 channel) images of one viewpoint.
struct CapturePair {
  ImageF rgb;
  ImageF ir;
  CaptureTag tag = CaptureTag::sim;
};

// Pluggable perceptual term; must be >= 0, symmetric, and 0 on equal images.
using FeatureLoss = std::function<double(const ImageF&, const ImageF&)>;

double mse(const ImageF& a, const ImageF& b);

// Mean over pyramid levels 1..4 of the MSE between Gaussian-pyramid
// downsamplings of a and b, each level normalised per channel to zero mean
// and unit standard deviation.
double pyramid_feature_loss(const ImageF& a, const ImageF& b);

// L = [mse(rgb) + feat(rgb)] + lambda * [mse(ir) + feat(ir)].
double multispectral_loss(const CapturePair& sim, const CapturePair& target, double lambda,
                          const FeatureLoss& feat = pyramid_feature_loss);

enum MaterialParam { kRoughness = 0, kMetallic = 1, kSpecular = 2, kTransmission = 3 };
inline constexpr std::array<const char*, 4> kMaterialParamNames{"roughness", "metallic", "specular", "transmission"};

struct PartParams {
  std::array<double, 4> values{};  // indexed by MaterialParam
  friend bool operator==(const PartParams&, const PartParams&) = default;
};

struct ParamSet {
  std::map<std::string, PartParams> parts;  // keyed by object name
  std::vector<double> light_multipliers;    // one per scene light
  friend bool operator==(const ParamSet&, const ParamSet&) = default;
};

struct FitTarget {
  CapturePair capture;
  SensorRig rig;  // viewpoint the capture was taken from
};

enum class SearchMode { coord, full };

struct FitConfig {
  std::vector<std::string> parts;  // objects with unknown materials
  // Per-part mask of searched parameters; parts not listed search all four.
  std::map<std::string, std::array<bool, 4>> free_params;
  int samples_per_param = 10;
  double lambda = 1.0;
  int spp = 8;
  bool median = true;
  int max_bounces = 6;
  std::uint64_t seed = 0;
  SearchMode mode = SearchMode::coord;
  int rounds = 2;
  bool fit_lights = true;
  double light_min = 0.25, light_max = 4.0;
  FeatureLoss feature = pyramid_feature_loss;
};

struct FitCandidate {
  std::string phase;  // default, coarse, fine
  std::string part;
  std::string parameter;
  std::string value;
  double loss = 0;
};

struct FitResult {
  ParamSet initial, coarse, fine;
  double initial_loss = 0, coarse_loss = 0, fine_loss = 0;
  std::vector<FitCandidate> candidates;
};

// Renders the rgb (visible) and ir_left (IR) views of `rig`.
CapturePair render_capture(const Renderer& renderer, const SensorRig& rig, const TraceOptions& opt);

// Applies a ParamSet to a renderer built from `scene`.
void apply_params(Renderer& renderer, const Scene& scene, const ParamSet& params);

// Coarse grid {(i+0.5)/n} then a fine grid of n samples spanning one coarse
// step either side of the coarse optimum (plus the optimum itself), with the
// incumbent always kept, so fine_loss <= coarse_loss <= initial_loss.
// Light multipliers are searched on a log grid during the coarse phase only.
FitResult grid_search(const Scene& scene, const std::vector<FitTarget>& targets, const FitConfig& cfg);

std::vector<double> coarse_grid(int n);
std::vector<double> fine_grid(double center, int n);
std::vector<double> light_grid(int n, double lo, double hi);

// Targets directory: NNN_rgb.pfm and NNN_ir.pfm per viewpoint, plus an
// optional viewpoints.txt with one rig motion per line (12 numbers: row-major
// rotation then translation). Without it every target uses `rig`.
std::vector<FitTarget> load_targets(const std::filesystem::path& dir, const SensorRig& rig);

// Scene-file fragment ([overrides] section) and candidate CSV.
std::string params_to_toml(const ParamSet& params);
void write_candidates_csv(const std::filesystem::path& path, const std::vector<FitCandidate>& rows);

}  // namespace depthsim
