#include "vlqa/visual_encoder.h"

#include <cmath>

#include "vlqa/errors.h"
#include "vlqa/ops.h"

namespace vlqa {

void ValidateRegions(std::span<const RegionInput> regions, std::span<const std::size_t> scale_widths) {
  if (regions.empty()) throw Error(ErrorKind::kPrecondition, "scene has no regions");
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const RegionInput& r = regions[i];
    if (r.scale_features.size() != scale_widths.size()) {
      throw Error(ErrorKind::kDimension, "region " + std::to_string(r.region_id) + " has " +
                                             std::to_string(r.scale_features.size()) + " scales, expected " +
                                             std::to_string(scale_widths.size()));
    }
    for (std::size_t s = 0; s < scale_widths.size(); ++s) {
      if (r.scale_features[s].size() != scale_widths[s]) {
        throw Error(ErrorKind::kDimension, "region " + std::to_string(r.region_id) + " scale " +
                                               std::to_string(s + 1) + " has " +
                                               std::to_string(r.scale_features[s].size()) +
                                               " features, expected " + std::to_string(scale_widths[s]));
      }
    }
    const BBox& b = r.bbox;
    const bool in_unit = b.x0 >= 0 && b.y0 >= 0 && b.x1 <= 1 && b.y1 <= 1;
    if (!in_unit || b.x0 > b.x1 || b.y0 > b.y1) {
      throw Error(ErrorKind::kSchema, "region " + std::to_string(r.region_id) + " has a malformed bbox");
    }
  }
}

std::vector<Tensor> ScaleFeatureMatrices(std::span<const RegionInput> regions,
                                         std::span<const std::size_t> scale_widths) {
  ValidateRegions(regions, scale_widths);
  std::vector<Tensor> mats;
  for (std::size_t s = 0; s < scale_widths.size(); ++s) {
    Tensor f({regions.size(), scale_widths[s]});
    for (std::size_t i = 0; i < regions.size(); ++i)
      for (std::size_t k = 0; k < scale_widths[s]; ++k) f.at(i, k) = regions[i].scale_features[s][k];
    mats.push_back(std::move(f));
  }
  return mats;
}

Var EncodeScene(Tape& tape, std::span<const Tensor> feature_mats, std::span<const Var> weights,
                const std::vector<bool>& scale_enabled) {
  if (feature_mats.size() != weights.size() || feature_mats.empty()) {
    throw Error(ErrorKind::kDimension, std::to_string(feature_mats.size()) + " feature scales but " +
                                           std::to_string(weights.size()) + " projection weights");
  }
  std::vector<Var> blocks;
  for (std::size_t s = 0; s < feature_mats.size(); ++s) {
    const Tensor& f = feature_mats[s];
    const Tensor& w = weights[s].value();
    if (w.rank() != 2 || f.rank() != 2 || w.dim(1) != f.dim(1)) {
      throw Error(ErrorKind::kDimension, "scale " + std::to_string(s + 1) + ": features " +
                                             ShapeString(f.shape()) + " against weights " + ShapeString(w.shape()));
    }
    const bool enabled = scale_enabled.empty() || scale_enabled[s];
    if (enabled) {
      blocks.push_back(MatMul(tape.Constant(f), Transpose(weights[s])));
    } else {
      blocks.push_back(tape.Constant(Tensor({f.dim(0), w.dim(0)})));
    }
  }
  return blocks.size() == 1 ? blocks[0] : Concat(blocks, 1);
}

SceneEncoding EncodeScene(std::span<const RegionInput> regions, std::span<const Tensor> weights) {
  std::vector<std::size_t> widths;
  for (const Tensor& w : weights) {
    if (w.rank() != 2) throw Error(ErrorKind::kDimension, "projection weight " + ShapeString(w.shape()));
    widths.push_back(w.dim(1));
  }
  const std::vector<Tensor> mats = ScaleFeatureMatrices(regions, widths);
  Tape tape;
  std::vector<Var> wvars;
  for (const Tensor& w : weights) wvars.push_back(tape.Constant(w));
  const std::size_t channels = weights[0].dim(0);
  for (const Tensor& w : weights) {
    if (w.dim(0) != channels) throw Error(ErrorKind::kDimension, "scales disagree on channel count");
  }
  SceneEncoding enc;
  enc.flat = EncodeScene(tape, mats, wvars).value();
  const std::size_t m = regions.size(), scales = weights.size();
  enc.v = Tensor({m, channels, scales});
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t s = 0; s < scales; ++s)
      for (std::size_t c = 0; c < channels; ++c)
        enc.v[(i * channels + c) * scales + s] = enc.flat.at(i, s * channels + c);
  return enc;
}

Tensor PoolVisual(const SceneEncoding& encoding) {
  Tape tape;
  return PoolVisual(tape.Constant(encoding.flat)).value();
}

Var PoolVisual(Var flat) { return MeanRows(flat); }

std::string VisualWeightName(std::size_t scale) { return "visual/W_s" + std::to_string(scale + 1); }

void InitVisualParams(ParameterStore& params, std::span<const std::size_t> scale_widths, std::size_t channels,
                      Rng& rng) {
  for (std::size_t s = 0; s < scale_widths.size(); ++s) {
    const double bound = std::sqrt(6.0 / static_cast<double>(scale_widths[s] + channels));
    Tensor w({channels, scale_widths[s]});
    for (double& x : w.mutable_data()) x = rng.Uniform(-bound, bound);
    params.Add(VisualWeightName(s), std::move(w));
  }
}

}  // namespace vlqa
