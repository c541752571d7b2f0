#include "vlqa/task_head.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vlqa/errors.h"
#include "vlqa/ops.h"

namespace vlqa {

Var SemanticAttention(Var q, Var v, Var l, Var w_s, Var xi) {
  if (v.value().rank() != 2 || l.value().rank() != 2) {
    throw Error(ErrorKind::kDimension,
                "semantic attention over v " + ShapeString(v.shape()) + " and l " + ShapeString(l.shape()));
  }
  return SemanticAttention(q, PairConcat(v, l), v.value().dim(0), l.value().dim(0), w_s, xi);
}

Var SemanticAttention(Var q, Var pairs, std::size_t m, std::size_t n, Var w_s, Var xi) {
  const Tensor& qv = q.value();
  const Tensor& wv = w_s.value();
  const Tensor& pv = pairs.value();
  if (m == 0 || n == 0 || qv.rank() != 1 || wv.rank() != 2 || wv.dim(0) != qv.size() || pv.rank() != 2 ||
      pv.dim(0) != m * n || pv.dim(1) != wv.dim(1) || xi.shape() != Shape{m, n}) {
    throw Error(ErrorKind::kDimension, "semantic attention with q " + ShapeString(qv.shape()) + ", W_s " +
                                           ShapeString(wv.shape()) + ", pairs " + ShapeString(pv.shape()) +
                                           ", xi " + ShapeString(xi.shape()));
  }
  const std::size_t d = qv.size(), dz = wv.dim(1);
  Var direction = Reshape(MatMul(Reshape(q, {1, d}), w_s), {dz, 1});
  Var logits = Add(Reshape(MatMul(pairs, direction), {m, n}), xi);
  return SoftmaxAll(logits);
}

GatedReadout GatedReadoutOp(Var alpha, Var pairs, const GateParams& params, std::size_t category, bool gates_open) {
  const Tensor& av = alpha.value();
  const Tensor& pv = pairs.value();
  if (av.rank() != 2 || pv.rank() != 2 || pv.dim(0) != av.size()) {
    throw Error(ErrorKind::kDimension,
                "gated readout of alpha " + ShapeString(av.shape()) + " over pairs " + ShapeString(pv.shape()));
  }
  const std::size_t categories = params.u_table.value().dim(0);
  if (category >= categories) {
    throw Error(ErrorKind::kCategory,
                "question category " + std::to_string(category) + " unknown; model has " + std::to_string(categories));
  }
  const std::size_t m = av.dim(0), n = av.dim(1), dz = pv.dim(1);
  Tape& tape = *alpha.tape();

  Var gates;
  if (gates_open) {
    gates = tape.Constant(Tensor::Full({m, n}, 1.0));
  } else {
    const std::size_t row[] = {category};
    Var u = Reshape(GatherRows(params.u_table, row), {dz, 1});
    const std::vector<std::size_t> c_index(m * n, category);
    Var c = Reshape(GatherFlat(params.c_table, c_index), {m * n, 1});
    gates = Reshape(Sigmoid(Add(MatMul(pairs, u), c)), {m, n});
  }
  Var weights = Reshape(Mul(alpha, gates), {1, m * n});
  Var pooled = Reshape(MatMul(weights, pairs), {dz});
  Var standardized = Standardize(pooled, kStandardizeEps);
  Var z = Relu(Add(Mul(standardized, params.rho_gain), params.rho_bias));
  return {z, gates, standardized};
}

Var AnswerLogits(Var features, Var w_out, Var b_out) {
  const Tensor& fv = features.value();
  const Tensor& wv = w_out.value();
  if (fv.rank() != 1 || wv.rank() != 2 || wv.dim(1) != fv.size() || b_out.shape() != Shape{wv.dim(0)}) {
    throw Error(ErrorKind::kDimension, "classifier " + ShapeString(wv.shape()) + " on features " +
                                           ShapeString(fv.shape()));
  }
  if (wv.dim(0) == 0) throw Error(ErrorKind::kPrecondition, "answer vocabulary is empty");
  Var col = Reshape(features, {fv.size(), 1});
  return Add(Reshape(MatMul(w_out, col), {wv.dim(0)}), b_out);
}

AnswerDistribution MakeDistribution(const Tensor& logits) {
  if (logits.rank() != 1 || logits.size() == 0) {
    throw Error(ErrorKind::kPrecondition, "answer distribution needs a non-empty logit vector");
  }
  AnswerDistribution dist;
  dist.logits = logits;
  Tape tape;
  dist.log_probabilities = LogSoftmax(tape.Constant(logits)).value();
  dist.probabilities = Softmax(logits, 0);
  dist.ranking.resize(logits.size());
  std::iota(dist.ranking.begin(), dist.ranking.end(), 0);
  const Tensor& p = dist.probabilities;
  std::stable_sort(dist.ranking.begin(), dist.ranking.end(),
                   [&p](std::size_t a, std::size_t b) { return p[a] > p[b]; });
  return dist;
}

Var AnswerNll(Var logits, std::size_t gold) {
  if (gold >= logits.value().size()) {
    throw Error(ErrorKind::kVocabulary, "gold answer " + std::to_string(gold) + " outside vocabulary of " +
                                            std::to_string(logits.value().size()));
  }
  const std::size_t index[] = {gold};
  return Scale(GatherFlat(LogSoftmax(logits), index), -1.0);
}

double Loss(const AnswerDistribution& dist, std::size_t gold) {
  if (gold >= dist.log_probabilities.size()) {
    throw Error(ErrorKind::kVocabulary, "gold answer " + std::to_string(gold) + " outside vocabulary of " +
                                            std::to_string(dist.log_probabilities.size()));
  }
  return -dist.log_probabilities[gold];
}

}  // namespace vlqa
