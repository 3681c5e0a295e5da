#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "depthsim/config.hpp"
#include "depthsim/image.hpp"
#include "depthsim/render.hpp"
#include "depthsim/scene.hpp"
#include "depthsim/stereo.hpp"

namespace depthsim {

struct SimOutput {
  Image8 ir_left, ir_right;
  Image8 ir_left_noisy, ir_right_noisy;
  DisparityMap disparity;
  DepthMap depth;
  DepthMap registered_depth;        // empty when registration is off
  DepthMap clean_depth;             // renderer z-buffer of ir_left
  DepthMap registered_clean_depth;  // empty when registration is off
};

// Converts radiance to 8-bit DN: optional noise is applied in DN units
// (radiance * exposure * 255) and the result rounded and clamped.
Image8 sense_ir(const RadianceImage& radiance, double exposure, const NoiseParams* noise, std::uint64_t seed);

// render_ir_pair -> noise per eye -> compute_depth, plus the clean depth.
SimOutput simulate(const Scene& scene, const RunConfig& cfg);
SimOutput simulate(const Renderer& renderer, const RunConfig& cfg);

// Writes the selected artifacts into `dir` and returns their file names.
// `stereo` supplies the disparity range for the visualisation.
std::vector<std::string> write_outputs(const SimOutput& out, const OutputSelection& sel, const StereoConfig& stereo,
                                       const std::filesystem::path& dir);

// 8-bit visualisation: disparity scaled over [min_disp, max_disp), INVALID = 0.
Image8 disparity_visualization(const DisparityMap& d, int min_disp, int max_disp);

std::string sha256_file(const std::filesystem::path& path);
std::string sha256_hex(const void* data, std::size_t size);

// Applies the batch jitter for sample `index` (deterministic in cfg.seed).
Scene jitter_scene(const Scene& scene, const RunConfig& cfg, std::size_t index);

struct BatchReport {
  std::size_t generated = 0;
  std::size_t skipped = 0;  // already complete according to the manifest
};

// n samples under <dir>/NNNNNN/ with sample seed cfg.seed + i and a
// manifest.jsonl of (id, seed, poses, files, sha256). Samples whose manifest
// entry matches the files on disk are skipped, so interrupted batches resume.
BatchReport generate_batch(const Scene& scene, const RunConfig& cfg, std::size_t n, const std::filesystem::path& dir);

}  // namespace depthsim
