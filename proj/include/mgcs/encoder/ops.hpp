#pragma once

// Numeric building blocks shared by the plain forward pass and the autodiff
// tape, so both produce bit-identical values.

#include <span>
#include <vector>

#include "mgcs/common/types.hpp"

namespace mgcs::ops {

/// out = mean of rows (left-to-right accumulation). Rows must be non-empty.
void mean_rows(std::span<const std::span<const double>> rows, std::span<double> out);

/// out = W x for row-major W of shape out.size() x x.size().
void matvec(std::span<const double> W, std::span<const double> x, std::span<double> out);

struct LayerNormCache {
  std::vector<double> xhat;
  double inv_std = 0.0;
};

/// out = gain * (x - mean) / sqrt(var + eps) + bias over all entries of x.
void layer_norm(std::span<const double> x, std::span<const double> gain, std::span<const double> bias, double eps,
                std::span<double> out, LayerNormCache* cache = nullptr);

/// -log softmax(pos/tau | pos, negs...)[0] with max subtraction. `probs`
/// (optional) receives the softmax over [pos, negs...].
double info_nce(double pos, std::span<const double> negs, double tau, std::vector<double>* probs = nullptr);

}  // namespace mgcs::ops
