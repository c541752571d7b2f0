#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "vlqa/autodiff.h"
#include "vlqa/rng.h"
#include "vlqa/tensor.h"

namespace vlqa {

struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  double cx() const { return 0.5 * (x0 + x1); }
  double cy() const { return 0.5 * (y0 + y1); }
  double area() const { return (x1 - x0) * (y1 - y0); }
  bool operator==(const BBox&) const = default;
};

// One detected region: raw features per scale (length K_s) and its box.
struct RegionInput {
  std::size_t region_id = 0;
  std::vector<std::vector<double>> scale_features;
  BBox bbox;
};

// v holds v[i,c,s] as [M x C x S]; flat holds the per-region embeddings
// [M x (C*S)], scales ascending and channels contiguous within a scale.
struct SceneEncoding {
  Tensor v;
  Tensor flat;
};

// Throws on feature width mismatch (naming region and scale) or a bad bbox.
void ValidateRegions(std::span<const RegionInput> regions, std::span<const std::size_t> scale_widths);

// Stacks the scale-s features of every region into an [M x K_s] matrix.
std::vector<Tensor> ScaleFeatureMatrices(std::span<const RegionInput> regions,
                                         std::span<const std::size_t> scale_widths);

// Differentiable projection: block s = F_s W_s^T, blocks concatenated along
// columns. Disabled scales contribute a zero block of the same width.
Var EncodeScene(Tape& tape, std::span<const Tensor> feature_mats, std::span<const Var> weights,
                const std::vector<bool>& scale_enabled = {});

SceneEncoding EncodeScene(std::span<const RegionInput> regions, std::span<const Tensor> weights);

// Mean over regions of the flattened embeddings.
Tensor PoolVisual(const SceneEncoding& encoding);
Var PoolVisual(Var flat);

std::string VisualWeightName(std::size_t scale);
// Uniform in +-sqrt(6 / (K_s + C)).
void InitVisualParams(ParameterStore& params, std::span<const std::size_t> scale_widths, std::size_t channels,
                      Rng& rng);

}  // namespace vlqa
