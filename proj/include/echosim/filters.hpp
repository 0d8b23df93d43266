#pragma once

#include <cmath>
#include <vector>

namespace echosim {

/// Sampled Gaussian with unit sum, truncated at `truncate` sigmas; the side
/// length is always odd (2 * ceil(truncate * sigma) + 1). sigma <= 0 yields
/// the identity kernel {1}.
inline std::vector<float> gaussian_kernel(double sigma, double truncate = 3.0) {
  if (!(sigma > 0.0)) return {1.0f};
  const int radius = static_cast<int>(std::ceil(truncate * sigma));
  std::vector<double> w(2 * radius + 1);
  double sum = 0.0;
  for (int k = -radius; k <= radius; ++k) {
    w[k + radius] = std::exp(-0.5 * (k * k) / (sigma * sigma));
    sum += w[k + radius];
  }
  std::vector<float> out(w.size());
  for (std::size_t i = 0; i < w.size(); ++i) out[i] = static_cast<float>(w[i] / sum);
  return out;
}

inline int kernel_radius(const std::vector<float>& k) { return static_cast<int>(k.size() / 2); }

}  // namespace echosim
