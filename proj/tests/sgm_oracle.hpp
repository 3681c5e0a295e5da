#pragma once
// Exhaustive per-path SGM oracle shared by the unit and acceptance tests.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "depthsim/stereo.hpp"

namespace depthsim::fixtures {

// Path energy oracle by exhaustive enumeration. For a line of costs c[0..n),
// E(p, d) is the minimum over all label sequences l[0..p] with l[p] = d of
// sum c[q][l[q]] + sum pen(l[q-1], l[q]). The SGM recurrence with the
// min-subtraction telescopes to L(0, d) = c[0][d] and
// L(p, d) = E(p, d) - min_k E(p-1, k).
inline std::vector<std::vector<std::int64_t>> oracle_path(const std::vector<std::vector<std::int64_t>>& c, std::int64_t p1,
                                                    std::int64_t p2) {
  const std::size_t n = c.size(), D = c[0].size();
  auto pen = [&](std::size_t a, std::size_t b) -> std::int64_t {
    const std::size_t diff = a > b ? a - b : b - a;
    return diff == 0 ? 0 : (diff == 1 ? p1 : p2);
  };
  std::vector<std::vector<std::int64_t>> E(n, std::vector<std::int64_t>(D, std::numeric_limits<std::int64_t>::max()));
  for (std::size_t p = 0; p < n; ++p) {
    std::size_t total = 1;
    for (std::size_t i = 0; i <= p; ++i) total *= D;
    std::vector<std::size_t> labels(p + 1);
    for (std::size_t code = 0; code < total; ++code) {
      std::size_t r = code;
      for (std::size_t i = 0; i <= p; ++i) {
        labels[i] = r % D;
        r /= D;
      }
      std::int64_t e = 0;
      for (std::size_t i = 0; i <= p; ++i) {
        e += c[i][labels[i]];
        if (i > 0) e += pen(labels[i - 1], labels[i]);
      }
      E[p][labels[p]] = std::min(E[p][labels[p]], e);
    }
  }
  std::vector<std::vector<std::int64_t>> L(n, std::vector<std::int64_t>(D));
  for (std::size_t p = 0; p < n; ++p) {
    const std::int64_t prev_min = p == 0 ? 0 : *std::min_element(E[p - 1].begin(), E[p - 1].end());
    for (std::size_t d = 0; d < D; ++d) L[p][d] = E[p][d] - prev_min;
  }
  return L;
}

// Sum of the four oracle paths over a whole volume.
inline std::vector<std::int64_t> oracle_sgm(const CostVolume& cv, std::int64_t p1, std::int64_t p2) {
  const int W = cv.width, H = cv.height, D = cv.disp_count;
  std::vector<std::int64_t> out(cv.data.size(), 0);
  auto run = [&](std::vector<std::pair<int, int>> line) {
    std::vector<std::vector<std::int64_t>> c;
    for (auto [x, y] : line) {
      std::vector<std::int64_t> row(D);
      for (int d = 0; d < D; ++d) row[d] = cv.at(x, y, d);
      c.push_back(row);
    }
    const auto L = oracle_path(c, p1, p2);
    for (std::size_t i = 0; i < line.size(); ++i)
      for (int d = 0; d < D; ++d) out[cv.index(line[i].first, line[i].second, d)] += L[i][d];
  };
  for (int y = 0; y < H; ++y) {
    std::vector<std::pair<int, int>> line;
    for (int x = 0; x < W; ++x) line.emplace_back(x, y);
    run(line);
    std::reverse(line.begin(), line.end());
    run(line);
  }
  for (int x = 0; x < W; ++x) {
    std::vector<std::pair<int, int>> line;
    for (int y = 0; y < H; ++y) line.emplace_back(x, y);
    run(line);
    std::reverse(line.begin(), line.end());
    run(line);
  }
  return out;
}

inline CostVolume random_volume(int w, int h, int d, std::mt19937& rng, int max_cost) {
  CostVolume v(w, h, d, 0, static_cast<std::uint32_t>(max_cost));
  std::uniform_int_distribution<int> dist(0, max_cost);
  for (auto& c : v.data) c = static_cast<std::uint16_t>(dist(rng));
  return v;
}

}  // namespace depthsim::fixtures
