#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vlqa/autodiff.h"
#include "vlqa/rng.h"
#include "vlqa/tensor.h"

namespace vlqa {

struct TreeNode {
  int id = 0;
  std::vector<int> children;
  // Attention score of each child, aligned with `children`.
  std::vector<double> scores;
  // Present iff the node is a leaf.
  std::optional<std::size_t> token;
};

struct SyntaxTree {
  std::vector<TreeNode> nodes;
  int root = 0;
};

// Throws a structure error for cycles, orphans or multiple parents and a
// schema error for score/child mismatches or misplaced tokens.
void ValidateTree(const SyntaxTree& tree);

// Index form of a validated tree. Positions refer to tree.nodes order.
struct TreePlan {
  std::size_t num_nodes = 0;
  std::size_t root = 0;
  std::vector<std::size_t> post_order;
  std::vector<std::vector<std::size_t>> children;
  std::vector<std::vector<double>> weights;
  std::vector<std::size_t> leaves;       // positions, in tree.nodes order
  std::vector<std::size_t> leaf_tokens;  // aligned with leaves
  std::vector<std::size_t> depth;        // root depth 0
};

TreePlan PlanTree(const SyntaxTree& tree);
// Same nodes, but every internal node is the uniform mean of all leaves.
TreePlan FlattenPlan(const TreePlan& plan);

// Leaves copy their input row; an internal node is the score-weighted sum of
// its children's rows, evaluated bottom-up in one pass.
// leaf_rows is [L x D] aligned with plan.leaves; result is [N x D].
Var TreeCompose(Var leaf_rows, const TreePlan& plan);

Var EmbedTokens(Tape& tape, Var table, std::span<const std::size_t> ids);

struct TreeParams {
  Var table;  // [V x D]
  Var w_tau;  // [D x D]
  Var b_tau;  // [D]
};

// tau(x) = tanh(W x + b) on leaf token embeddings, then TreeCompose.
Var EncodeTree(Tape& tape, const TreePlan& plan, const TreeParams& params);
Var QuestionIntent(Var node_embeddings, const TreePlan& plan);

struct LanguageEncoding {
  Tensor node_embeddings;  // [N x D]
  Tensor q;                // root row
};

LanguageEncoding EncodeTree(const SyntaxTree& tree, const Tensor& table, const Tensor& w_tau, const Tensor& b_tau);

// Fallback parse for free text: token k hangs off a chain of binary nodes,
// both children weighted 1/2.
SyntaxTree RightBranchingTree(std::span<const std::size_t> tokens);

inline constexpr const char* kTokenTableName = "language/tokens";
inline constexpr const char* kTauWeightName = "language/tau_W";
inline constexpr const char* kTauBiasName = "language/tau_b";

void InitLanguageParams(ParameterStore& params, std::size_t vocab_size, std::size_t dim, Rng& rng);

}  // namespace vlqa
