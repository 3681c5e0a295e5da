#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "depthsim/math.hpp"
#include "depthsim/noise.hpp"
#include "depthsim/stereo.hpp"

namespace depthsim {

// Which SimOutput artifacts get written to disk.
struct OutputSelection {
  bool ir = true;             // ir_left.pgm, ir_right.pgm
  bool ir_noisy = true;       // ir_left_noisy.pgm, ir_right_noisy.pgm
  bool disparity = true;      // disparity.pfm
  bool depth = true;          // depth.pfm
  bool registered_depth = true;
  bool clean_depth = true;    // clean_depth.pfm (+ registered_clean_depth.pfm)
  bool visualization = false; // disparity_vis.pgm

  friend bool operator==(const OutputSelection&, const OutputSelection&) = default;
};

// Uniform pose jitter applied per batch sample: position offsets in
// [-position, position] metres per axis and XYZ Euler offsets in
// [-rotation, rotation] radians, about each object's own origin.
struct BatchJitter {
  Vec3 position;
  Vec3 rotation;
  std::vector<std::string> objects;  // empty: every object

  friend bool operator==(const BatchJitter&, const BatchJitter&) = default;
};

struct RunConfig {
  int spp = 8;
  std::uint64_t seed = 0;
  int max_bounces = 6;
  bool median_prefilter = false;
  double exposure = 1.0;  // radiance scale before 8-bit quantisation
  bool noise_enabled = true;
  NoiseParams noise;
  StereoConfig stereo;
  OutputSelection outputs;
  std::optional<BatchJitter> batch;

  // Throws ValidationError naming the field.
  void validate() const;
};

// Reads [run], [noise], [stereo], [outputs] and [batch] from TOML; other
// sections are ignored, so a scene file can carry its own run settings.
// Unknown keys inside those sections are errors.
RunConfig parse_run_config(const std::string& text, const std::string& source_name = "<config>",
                           const RunConfig& defaults = {});
RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& defaults = {});

}  // namespace depthsim
