#include "depthsim/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "depthsim/error.hpp"
#include "depthsim/parallel.hpp"
#include "depthsim/rng.hpp"

namespace depthsim {

namespace {
constexpr double kMaxShape = 1e6;
}

void NoiseParams::validate(const std::string& prefix) const {
  if (!(k > 0) || !std::isfinite(k)) throw ValidationError(prefix + ".k", "must be > 0");
  if (!(theta > 0) || !std::isfinite(theta)) throw ValidationError(prefix + ".theta", "must be > 0");
  if (!std::isfinite(mu_n)) throw ValidationError(prefix + ".mu_n", "must be finite");
  if (!(sigma >= 0) || !std::isfinite(sigma)) throw ValidationError(prefix + ".sigma", "must be >= 0");
  if (!(scale >= 0) || !std::isfinite(scale)) throw ValidationError(prefix + ".scale", "must be >= 0");
}

double sample_gamma(double k, double theta, Pcg32& rng) {
  if (k < 1.0) {
    const double u = rng.uniform();
    return sample_gamma(k + 1.0, theta, rng) * std::pow(u, 1.0 / k);
  }
  const double d = k - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double x = rng.normal();
    double v = 1.0 + c * x;
    if (v <= 0) continue;
    v = v * v * v;
    const double u = rng.uniform();
    const double x2 = x * x;
    if (u < 1.0 - 0.0331 * x2 * x2) return d * v * theta;
    if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return d * v * theta;
  }
}

ImageF apply_noise(const ImageF& img, const NoiseParams& p, std::uint64_t seed) {
  p.validate();
  ImageF out(img.width, img.height, img.channels);
  const double mean_gamma = p.k * p.theta;
  const std::size_t n = img.data.size();
  constexpr std::size_t kChunk = 4096;
  parallel_for((n + kChunk - 1) / kChunk, [&](std::size_t chunk) {
    const std::size_t end = std::min(n, (chunk + 1) * kChunk);
    for (std::size_t i = chunk * kChunk; i < end; ++i) {
      Pcg32 rng(derive_seed(seed, i));
      const double g = sample_gamma(p.k, p.theta, rng);
      const double nz = p.mu_n + p.sigma * rng.normal();
      const double g2 = mean_gamma + p.scale * (g - mean_gamma);
      const double v = g2 * img.data[i] + p.scale * nz;
      out.data[i] = static_cast<float>(std::max(0.0, v));
    }
  });
  return out;
}

ImageF stack_mean(const FrameStack& stack) {
  if (stack.empty()) throw RuntimeError("empty frame stack");
  const ImageF& first = stack.front();
  for (const auto& f : stack)
    if (!f.same_shape(first)) throw RuntimeError("frame stack images differ in size");
  std::vector<double> acc(first.data.size(), 0.0);
  for (const auto& f : stack)
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f.data[i];
  ImageF mean(first.width, first.height, first.channels);
  for (std::size_t i = 0; i < acc.size(); ++i) mean.data[i] = static_cast<float>(acc[i] / stack.size());
  return mean;
}

GaussianFit fit_censored_gaussian(const std::vector<double>& samples) {
  // Values at exactly 0 are treated as censored draws (n <= 0).
  double sum = 0, sum2 = 0;
  std::size_t observed = 0;
  for (double v : samples) {
    if (v > 0) {
      sum += v;
      sum2 += v * v;
      ++observed;
    }
  }
  const double n = static_cast<double>(samples.size());
  const double censored = n - observed;
  if (observed == 0 || n == 0) return {0.0, 0.0};

  // Method-of-moments start from the clamped data.
  double mu = sum / n;
  double var = std::max(sum2 / n - mu * mu, 1e-12);
  if (censored == 0) return {mu, std::sqrt(var)};
  for (int it = 0; it < 500; ++it) {
    const double sigma = std::sqrt(var);
    const double beta = -mu / sigma;
    const double cdf = 0.5 * std::erfc(-beta / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * beta * beta) / std::sqrt(2.0 * kPi);
    const double lam = cdf > 1e-300 ? pdf / cdf : -beta;
    // Moments of N(mu, sigma^2) truncated to (-inf, 0].
    const double e1 = mu - sigma * lam;
    const double tvar = var * std::max(0.0, 1.0 - beta * lam - lam * lam);
    const double e2 = tvar + e1 * e1;
    const double mu_new = (sum + censored * e1) / n;
    const double var_new = std::max((sum2 + censored * e2) / n - mu_new * mu_new, 1e-12);
    const bool done = std::abs(mu_new - mu) < 1e-10 && std::abs(var_new - var) < 1e-10;
    mu = mu_new;
    var = var_new;
    if (done) break;
  }
  return {mu, std::sqrt(var)};
}

GammaFit fit_gamma_mle(const std::vector<double>& samples) {
  double sum = 0, sum_log = 0;
  std::size_t n = 0;
  for (double g : samples) {
    if (g > 0) {
      sum += g;
      sum_log += std::log(g);
      ++n;
    }
  }
  if (n == 0) throw RuntimeError("gamma fit: no positive samples");
  const double mean = sum / n;
  double var = 0;
  for (double g : samples)
    if (g > 0) var += (g - mean) * (g - mean);
  var /= n;
  const double s = std::log(mean) - sum_log / n;
  if (var <= 1e-14 * mean * mean || s <= 1e-14) return {kMaxShape, mean / kMaxShape};

  double k = mean * mean / var;
  // Newton on log k - digamma(k) = s, kept in the positive half-line.
  for (int it = 0; it < 100; ++it) {
    const double f = std::log(k) - boost::math::digamma(k) - s;
    const double df = 1.0 / k - boost::math::trigamma(k);
    double next = k - f / df;
    if (!(next > 0)) next = 0.5 * k;
    const bool done = std::abs(next - k) < 1e-12 * k;
    k = std::min(next, kMaxShape);
    if (done) break;
  }
  return {k, mean / k};
}

NoiseParams estimate_noise_params(const std::vector<FrameStack>& stacks, const NoiseEstimateOptions& opt) {
  if (stacks.empty()) throw RuntimeError("no frame stacks");
  std::vector<ImageF> means;
  means.reserve(stacks.size());
  double max_mean = 0;
  for (const auto& st : stacks) {
    means.push_back(stack_mean(st));
    for (float v : means.back().data) max_mean = std::max(max_mean, static_cast<double>(v));
  }
  const double threshold = std::max(opt.bright_fraction * max_mean, opt.min_bright);
  std::size_t bright = 0;
  for (const auto& m : means)
    for (float v : m.data) bright += v > threshold;
  if (bright == 0) throw RuntimeError("insufficient bright pixels");
  for (const auto& st : stacks)
    if (st.size() < opt.min_frames)
      throw RuntimeError("insufficient frames: need >= " + std::to_string(opt.min_frames) + ", got " +
                         std::to_string(st.size()));

  // Additive part from dark pixels.
  std::vector<double> dark;
  for (std::size_t s = 0; s < stacks.size(); ++s)
    for (std::size_t i = 0; i < means[s].data.size(); ++i)
      if (!(means[s].data[i] > threshold))
        for (const auto& f : stacks[s]) dark.push_back(f.data[i]);
  const GaussianFit gauss = fit_censored_gaussian(dark);

  // Multiplicative part: g = (x - mu) / (m - mu) where m - mu estimates the
  // gain-scaled clean signal.
  std::vector<double> ratios;
  for (std::size_t s = 0; s < stacks.size(); ++s) {
    for (std::size_t i = 0; i < means[s].data.size(); ++i) {
      const double m = means[s].data[i];
      if (!(m > threshold)) continue;
      const double signal = m - gauss.mu;
      if (!(signal > 0)) continue;
      for (const auto& f : stacks[s]) {
        const double g = (f.data[i] - gauss.mu) / signal;
        if (g > 0) ratios.push_back(g);
      }
    }
  }
  if (ratios.empty()) throw RuntimeError("insufficient bright pixels");
  const GammaFit gamma = fit_gamma_mle(ratios);

  NoiseParams p;
  p.k = gamma.k;
  p.theta = gamma.theta;
  p.mu_n = gauss.mu;
  p.sigma = gauss.sigma;
  p.scale = 1.0;
  return p;
}

Texture extract_pattern(const FrameStack& stack, double threshold) {
  if (stack.size() < 2) throw RuntimeError("extract_pattern needs at least 2 frames");
  const ImageF mean = stack_mean(stack);
  Texture tex;
  tex.image = ImageF(mean.width, mean.height, 1);
  for (int y = 0; y < mean.height; ++y)
    for (int x = 0; x < mean.width; ++x) tex.image.at(x, y) = mean.at(x, y, 0) > threshold ? 1.0f : 0.0f;
  return tex;
}

double otsu_threshold(const ImageF& img) {
  if (img.empty()) throw RuntimeError("otsu_threshold: empty image");
  const auto [lo_it, hi_it] = std::minmax_element(img.data.begin(), img.data.end());
  const double lo = *lo_it, hi = *hi_it;
  if (hi <= lo) return lo;
  constexpr int kBins = 256;
  std::vector<double> hist(kBins, 0.0);
  const double width = (hi - lo) / kBins;
  for (float v : img.data) hist[std::min(kBins - 1, static_cast<int>((v - lo) / width))] += 1;
  const double total = static_cast<double>(img.data.size());
  double sum_all = 0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[b];
  double w0 = 0, sum0 = 0, best = -1;
  int best_bin = 0;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    sum0 += b * hist[b];
    const double w1 = total - w0;
    if (w0 == 0 || w1 == 0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = b;
    }
  }
  return lo + (best_bin + 1) * width;
}

}  // namespace depthsim
