#pragma once

#include <cstddef>

#include "vlqa/autodiff.h"
#include "vlqa/tensor.h"
#include "vlqa/visual_encoder.h"

namespace vlqa {

// Baseline: visual features followed by language features.
Var FuseConcat(Var v, Var l);
Tensor FuseConcat(const Tensor& v, const Tensor& l);

struct ScalarFusion {
  Var fused;  // same shape as v
  Var alpha;  // [1] for a vector v, [M x 1] for a matrix v
};

// out = a*v + (1-a)*l with a = sigmoid(w . [v; l] + b). v may be a single
// [D] vector or an [M x D] stack, each row gated independently against l [D].
// w is [2D], b is [1].
ScalarFusion FuseScalarAttn(Var v, Var l, Var w, Var b);

// A[m, n] = softmax_n(v_m^T W_a l_n + beta[m, n]).
// v [M x dv], l [N x D], w_a [dv x D], beta [M x N].
Var CrossAttend(Var v, Var l, Var w_a, Var beta);

// f_m = sum_n A[m, n] l_n.
Var AttendFeatures(Var attention, Var l);

// sum_{m,n} lambda[m,n] <f_m, g_n> / (sqrt(sum_m |f_m|^2) sqrt(sum_n |g_n|^2)).
// Degenerate-input error when either norm sum is zero.
Var GlobalScore(Var f, Var g, Var lambda);
double GlobalScore(const Tensor& f, const Tensor& g, const Tensor& lambda);

// sigmoid(mu_v . vbar + mu_l . lbar + mu_t . sbar) as a [1] tensor.
Var AdaptiveCoeff(Var vbar, Var lbar, Var sbar, Var mu_v, Var mu_l, Var mu_t);

// Positional prior buckets: distance of the box center from the image
// center in 4 equal bins over [0, sqrt(2)/2], crossed with node depth
// capped at kMaxPriorDepth.
inline constexpr std::size_t kDistanceBins = 4;
inline constexpr std::size_t kMaxPriorDepth = 4;
inline constexpr std::size_t kDepthLevels = kMaxPriorDepth + 1;
inline constexpr std::size_t kPositionBuckets = kDistanceBins * kDepthLevels;

std::size_t DistanceBin(const BBox& box);
std::size_t CappedDepth(std::size_t depth);
std::size_t PositionBucket(const BBox& box, std::size_t depth);

}  // namespace vlqa
