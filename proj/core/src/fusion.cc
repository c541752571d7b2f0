#include "vlqa/fusion.h"

#include <algorithm>
#include <cmath>

#include "vlqa/errors.h"
#include "vlqa/ops.h"

namespace vlqa {

Var FuseConcat(Var v, Var l) {
  if (v.value().size() == 0 || l.value().size() == 0) {
    throw Error(ErrorKind::kPrecondition, "concat fusion needs non-empty visual and language vectors");
  }
  if (v.value().rank() != 1 || l.value().rank() != 1) {
    throw Error(ErrorKind::kDimension,
                "concat fusion of " + ShapeString(v.shape()) + " and " + ShapeString(l.shape()));
  }
  return Concat({v, l}, 0);
}

Tensor FuseConcat(const Tensor& v, const Tensor& l) {
  Tape tape;
  return FuseConcat(tape.Constant(v), tape.Constant(l)).value();
}

ScalarFusion FuseScalarAttn(Var v, Var l, Var w, Var b) {
  const bool single = v.value().rank() == 1;
  Var rows = single ? Reshape(v, {1, v.value().size()}) : v;
  const std::size_t m = rows.value().dim(0), d = rows.value().dim(1);
  if (l.value().rank() != 1 || l.value().size() != d) {
    throw Error(ErrorKind::kDimension,
                "scalar fusion of visual " + ShapeString(v.shape()) + " and language " + ShapeString(l.shape()));
  }
  if (w.value().size() != 2 * d || b.value().size() != 1) {
    throw Error(ErrorKind::kDimension, "context network " + ShapeString(w.shape()) + " / " +
                                           ShapeString(b.shape()) + " for width " + std::to_string(d));
  }
  Tape& tape = *v.tape();
  Var l_row = Reshape(l, {1, d});
  Var context = PairConcat(rows, l_row);                               // [M x 2D]
  Var logits = AddRowVector(MatMul(context, Reshape(w, {2 * d, 1})), Reshape(b, {1}));
  Var alpha = Sigmoid(logits);                                         // [M x 1]
  Var alpha_wide = MatMul(alpha, tape.Constant(Tensor::Full({1, d}, 1.0)));
  Var l_wide = MatMul(tape.Constant(Tensor::Full({m, 1}, 1.0)), l_row);
  Var fused = Add(l_wide, Mul(alpha_wide, Sub(rows, l_wide)));
  if (single) return {Reshape(fused, {d}), Reshape(alpha, {1})};
  return {fused, alpha};
}

Var CrossAttend(Var v, Var l, Var w_a, Var beta) {
  const Tensor& vv = v.value();
  const Tensor& lv = l.value();
  const Tensor& wv = w_a.value();
  if (vv.rank() != 2 || lv.rank() != 2 || wv.rank() != 2 || wv.dim(0) != vv.dim(1) || wv.dim(1) != lv.dim(1) ||
      beta.shape() != Shape{vv.dim(0), lv.dim(0)}) {
    throw Error(ErrorKind::kDimension, "cross attention of v " + ShapeString(vv.shape()) + ", l " +
                                           ShapeString(lv.shape()) + ", W_a " + ShapeString(wv.shape()) +
                                           ", beta " + ShapeString(beta.shape()));
  }
  Var logits = Add(MatMul(MatMul(v, w_a), Transpose(l)), beta);
  return Softmax(logits, 1);
}

Var AttendFeatures(Var attention, Var l) { return MatMul(attention, l); }

Var GlobalScore(Var f, Var g, Var lambda) {
  const Tensor& fv = f.value();
  const Tensor& gv = g.value();
  if (fv.rank() != 2 || gv.rank() != 2 || fv.dim(1) != gv.dim(1) ||
      lambda.shape() != Shape{fv.dim(0), gv.dim(0)}) {
    throw Error(ErrorKind::kDimension, "global score of f " + ShapeString(fv.shape()) + ", g " +
                                           ShapeString(gv.shape()) + ", lambda " + ShapeString(lambda.shape()));
  }
  Var f_sq = SumAll(Mul(f, f));
  Var g_sq = SumAll(Mul(g, g));
  if (f_sq.value()[0] <= 0.0 || g_sq.value()[0] <= 0.0) {
    throw Error(ErrorKind::kDegenerateInput, "global score with an all-zero feature set");
  }
  Var numerator = SumAll(Mul(lambda, MatMul(f, Transpose(g))));
  return Div(numerator, Mul(Sqrt(f_sq), Sqrt(g_sq)));
}

double GlobalScore(const Tensor& f, const Tensor& g, const Tensor& lambda) {
  Tape tape;
  return GlobalScore(tape.Constant(f), tape.Constant(g), tape.Constant(lambda)).value().item();
}

Var AdaptiveCoeff(Var vbar, Var lbar, Var sbar, Var mu_v, Var mu_l, Var mu_t) {
  Var logit = Add(Add(Dot(mu_v, vbar), Dot(mu_l, lbar)), Dot(mu_t, sbar));
  return Sigmoid(logit);
}

std::size_t DistanceBin(const BBox& box) {
  const double dx = box.cx() - 0.5, dy = box.cy() - 0.5;
  const double dist = std::sqrt(dx * dx + dy * dy);
  const double width = std::sqrt(2.0) / 2.0 / static_cast<double>(kDistanceBins);
  return std::min(kDistanceBins - 1, static_cast<std::size_t>(dist / width));
}

std::size_t CappedDepth(std::size_t depth) { return std::min(depth, kMaxPriorDepth); }

std::size_t PositionBucket(const BBox& box, std::size_t depth) {
  return DistanceBin(box) * kDepthLevels + CappedDepth(depth);
}

}  // namespace vlqa
