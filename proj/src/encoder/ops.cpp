#include "mgcs/encoder/ops.hpp"

#include <algorithm>
#include <cmath>

#include "mgcs/simd/kernels.hpp"

namespace mgcs::ops {

void mean_rows(std::span<const std::span<const double>> rows, std::span<double> out) {
  std::ranges::fill(out, 0.0);
  for (const auto& r : rows) simd::axpy(1.0, r, out);
  simd::scale(1.0 / static_cast<double>(rows.size()), out);
}

void matvec(std::span<const double> W, std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  simd::kernels().dot_rows(x.data(), W.data(), out.size(), n, out.data());
}

void layer_norm(std::span<const double> x, std::span<const double> gain, std::span<const double> bias, double eps,
                std::span<double> out, LayerNormCache* cache) {
  const std::size_t d = x.size();
  const double mean = simd::sum(x) / static_cast<double>(d);
  std::vector<double> centered(x.begin(), x.end());
  for (double& v : centered) v -= mean;
  const double var = simd::dot(centered, centered) / static_cast<double>(d);
  const double inv_std = 1.0 / std::sqrt(var + eps);
  for (std::size_t i = 0; i < d; ++i) {
    const double xhat = centered[i] * inv_std;
    out[i] = gain[i] * xhat + bias[i];
    centered[i] = xhat;
  }
  if (cache) {
    cache->xhat = std::move(centered);
    cache->inv_std = inv_std;
  }
}

double info_nce(double pos, std::span<const double> negs, double tau, std::vector<double>* probs) {
  const double z0 = pos / tau;
  double m = z0;
  for (double s : negs) m = std::max(m, s / tau);
  double total = std::exp(z0 - m);
  for (double s : negs) total += std::exp(s / tau - m);
  if (probs) {
    probs->resize(negs.size() + 1);
    (*probs)[0] = std::exp(z0 - m) / total;
    for (std::size_t j = 0; j < negs.size(); ++j) (*probs)[j + 1] = std::exp(negs[j] / tau - m) / total;
  }
  return std::log(total) + m - z0;
}

}  // namespace mgcs::ops
