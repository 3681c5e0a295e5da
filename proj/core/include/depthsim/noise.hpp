#pragma once

#include <cstdint>
#include <vector>

#include "depthsim/image.hpp"
#include "depthsim/scene.hpp"

namespace depthsim {

// Speckle/thermal model: out = gamma * in + n, gamma ~ Gamma(k, theta),
// n ~ N(mu_n, sigma^2). mu_n and sigma are in the units of the image the
// model is applied to; the defaults are calibrated for 8-bit DN (0..255).
struct NoiseParams {
  double k = 3.98;
  double theta = 0.254;
  double mu_n = -0.231;
  double sigma = 0.83;
  double scale = 1.0;

  // Throws ValidationError naming `<prefix>.<field>`.
  void validate(const std::string& prefix = "noise") const;
  friend bool operator==(const NoiseParams&, const NoiseParams&) = default;
};

// Per-pixel i.i.d. noise with RNG streams derived from (seed, pixel index).
// With scale s: gamma' = k*theta + s*(gamma - k*theta), n' = s*n. Output is
// clamped at 0 from below only.
ImageF apply_noise(const ImageF& img, const NoiseParams& p, std::uint64_t seed);

// Gamma(k, theta) variate (Marsaglia-Tsang, shape boost for k < 1).
double sample_gamma(double k, double theta, class Pcg32& rng);

// N >= 2 single-channel frames of one static scene.
using FrameStack = std::vector<ImageF>;

struct NoiseEstimateOptions {
  // Pixels whose stack mean exceeds max(bright_fraction * max mean,
  // min_bright) feed the gamma fit; the rest are treated as zero-signal and
  // feed the Gaussian fit.
  double bright_fraction = 0.1;
  double min_bright = 4.0;
  std::size_t min_frames = 10;
};

// Gamma shape/scale are only identifiable up to their product, so the fit
// uses the convention k*theta = 1 and absorbs the gain into the clean image
// estimate. Gaussian parameters come from a zero-censored EM fit; gamma
// parameters from maximum likelihood started at the method of moments.
NoiseParams estimate_noise_params(const std::vector<FrameStack>& stacks, const NoiseEstimateOptions& opt = {});

ImageF stack_mean(const FrameStack& stack);

// Binary {0,1} pattern: mean(stack) > threshold.
Texture extract_pattern(const FrameStack& stack, double threshold);

// Otsu's threshold over a 256-bin histogram of the image's value range.
double otsu_threshold(const ImageF& img);

// Fits used by estimate_noise_params, exposed for testing.
struct GaussianFit {
  double mu = 0, sigma = 0;
};
GaussianFit fit_censored_gaussian(const std::vector<double>& samples);
struct GammaFit {
  double k = 0, theta = 0;
};
GammaFit fit_gamma_mle(const std::vector<double>& samples);

}  // namespace depthsim
