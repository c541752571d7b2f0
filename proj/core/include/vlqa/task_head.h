#pragma once

#include <cstddef>
#include <vector>

#include "vlqa/autodiff.h"
#include "vlqa/tensor.h"

namespace vlqa {

// Joint softmax over every (region, node) pair:
//   alpha[i, j] = softmax_{i,j}(q^T W_s [v_i; l_j] + xi[i, j])
// q [D], v [M x dv], l [N x D], w_s [D x (dv+D)], xi [M x N]. Result [M x N].
Var SemanticAttention(Var q, Var v, Var l, Var w_s, Var xi);
// Same with the pair matrix from PairConcat(v, l) already built.
Var SemanticAttention(Var q, Var pairs, std::size_t m, std::size_t n, Var w_s, Var xi);

struct GateParams {
  Var u_table;   // [categories x Dz]
  Var c_table;   // [categories]
  Var rho_gain;  // [Dz]
  Var rho_bias;  // [Dz]
};

struct GatedReadout {
  Var z_final;       // [Dz]
  Var gates;         // [M x N]
  Var standardized;  // rho's normalization stage, before gain/bias/ReLU
};

inline constexpr double kStandardizeEps = 1e-10;

// zeta[i,j] = sigmoid(u_cat . [v_i; l_j] + c_cat)
// z_final  = relu(gain * standardize(sum_{i,j} alpha[i,j] zeta[i,j] [v_i; l_j]) + bias)
// With gates_open every zeta is exactly 1. Category error for an unknown category.
GatedReadout GatedReadoutOp(Var alpha, Var pairs, const GateParams& params, std::size_t category,
                            bool gates_open = false);

// logits = W_out features + b_out.
Var AnswerLogits(Var features, Var w_out, Var b_out);

struct AnswerDistribution {
  Tensor logits;
  Tensor probabilities;
  Tensor log_probabilities;
  // Answer indices by descending probability, ties to the lower index.
  std::vector<std::size_t> ranking;
};

AnswerDistribution MakeDistribution(const Tensor& logits);

// -log p(gold); vocabulary error when gold is out of range.
Var AnswerNll(Var logits, std::size_t gold);
double Loss(const AnswerDistribution& dist, std::size_t gold);

}  // namespace vlqa
