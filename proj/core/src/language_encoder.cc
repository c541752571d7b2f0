#include "vlqa/language_encoder.h"

#include <cmath>
#include <map>

#include "vlqa/errors.h"
#include "vlqa/ops.h"

namespace vlqa {
namespace {

std::map<int, std::size_t> IndexById(const SyntaxTree& tree) {
  std::map<int, std::size_t> index;
  for (std::size_t p = 0; p < tree.nodes.size(); ++p) {
    if (!index.emplace(tree.nodes[p].id, p).second) {
      throw Error(ErrorKind::kStructure, "duplicate node id " + std::to_string(tree.nodes[p].id));
    }
  }
  return index;
}

}  // namespace

void ValidateTree(const SyntaxTree& tree) { PlanTree(tree); }

TreePlan PlanTree(const SyntaxTree& tree) {
  if (tree.nodes.empty()) throw Error(ErrorKind::kStructure, "tree has no nodes");
  const std::map<int, std::size_t> index = IndexById(tree);
  const std::size_t n = tree.nodes.size();

  TreePlan plan;
  plan.num_nodes = n;
  plan.children.resize(n);
  plan.weights.resize(n);
  plan.depth.assign(n, 0);

  auto root_it = index.find(tree.root);
  if (root_it == index.end()) throw Error(ErrorKind::kStructure, "root id " + std::to_string(tree.root) + " missing");
  plan.root = root_it->second;

  std::vector<int> parents(n, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const TreeNode& node = tree.nodes[p];
    if (node.scores.size() != node.children.size()) {
      throw Error(ErrorKind::kSchema, "node " + std::to_string(node.id) + " has " +
                                          std::to_string(node.children.size()) + " children but " +
                                          std::to_string(node.scores.size()) + " scores");
    }
    const bool leaf = node.children.empty();
    if (leaf != node.token.has_value()) {
      throw Error(ErrorKind::kSchema, "node " + std::to_string(node.id) +
                                          (leaf ? " is a leaf without a token" : " is internal but carries a token"));
    }
    double total = 0.0;
    for (std::size_t c = 0; c < node.children.size(); ++c) {
      auto it = index.find(node.children[c]);
      if (it == index.end()) {
        throw Error(ErrorKind::kStructure, "node " + std::to_string(node.id) + " references missing child " +
                                               std::to_string(node.children[c]));
      }
      if (node.scores[c] < 0.0 || !std::isfinite(node.scores[c])) {
        throw Error(ErrorKind::kSchema, "node " + std::to_string(node.id) + " has a negative child score");
      }
      total += node.scores[c];
      plan.children[p].push_back(it->second);
      plan.weights[p].push_back(node.scores[c]);
      ++parents[it->second];
    }
    if (!leaf && std::abs(total - 1.0) > 1e-9) {
      throw Error(ErrorKind::kSchema, "child scores of node " + std::to_string(node.id) + " sum to " +
                                          std::to_string(total));
    }
  }
  for (std::size_t p = 0; p < n; ++p) {
    const int expected = p == plan.root ? 0 : 1;
    if (parents[p] != expected) {
      throw Error(ErrorKind::kStructure, "node " + std::to_string(tree.nodes[p].id) + " has " +
                                             std::to_string(parents[p]) + " parents");
    }
  }

  // Iterative post-order from the root; a revisit on the active path is a cycle.
  std::vector<int> state(n, 0);  // 0 new, 1 on stack, 2 done
  std::vector<std::pair<std::size_t, std::size_t>> stack{{plan.root, 0}};
  state[plan.root] = 1;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < plan.children[node].size()) {
      const std::size_t child = plan.children[node][next++];
      if (state[child] != 0) {
        throw Error(ErrorKind::kStructure, "cycle through node " + std::to_string(tree.nodes[child].id));
      }
      state[child] = 1;
      plan.depth[child] = plan.depth[node] + 1;
      stack.emplace_back(child, 0);
    } else {
      state[node] = 2;
      plan.post_order.push_back(node);
      stack.pop_back();
    }
  }
  if (plan.post_order.size() != n) throw Error(ErrorKind::kStructure, "tree has nodes unreachable from the root");

  for (std::size_t p = 0; p < n; ++p) {
    if (plan.children[p].empty()) {
      plan.leaves.push_back(p);
      plan.leaf_tokens.push_back(*tree.nodes[p].token);
    }
  }
  return plan;
}

TreePlan FlattenPlan(const TreePlan& plan) {
  TreePlan flat = plan;
  const double w = 1.0 / static_cast<double>(plan.leaves.size());
  for (std::size_t p = 0; p < plan.num_nodes; ++p) {
    if (plan.children[p].empty()) continue;
    flat.children[p] = plan.leaves;
    flat.weights[p].assign(plan.leaves.size(), w);
  }
  // Leaves first, then internal nodes: every child precedes its parent.
  flat.post_order = plan.leaves;
  for (std::size_t p : plan.post_order)
    if (!plan.children[p].empty()) flat.post_order.push_back(p);
  return flat;
}

Var TreeCompose(Var leaf_rows, const TreePlan& plan) {
  const Tensor& in = leaf_rows.value();
  if (in.rank() != 2 || in.dim(0) != plan.leaves.size()) {
    throw Error(ErrorKind::kDimension, "tree has " + std::to_string(plan.leaves.size()) + " leaves but got rows " +
                                           ShapeString(in.shape()));
  }
  const std::size_t d = in.dim(1);
  std::vector<std::size_t> leaf_row(plan.num_nodes, 0);
  for (std::size_t r = 0; r < plan.leaves.size(); ++r) leaf_row[plan.leaves[r]] = r;

  Tensor out({plan.num_nodes, d});
  for (std::size_t p : plan.post_order) {
    double* dst = out.mutable_data().data() + p * d;
    if (plan.children[p].empty()) {
      for (std::size_t c = 0; c < d; ++c) dst[c] = in.at(leaf_row[p], c);
      continue;
    }
    for (std::size_t k = 0; k < plan.children[p].size(); ++k) {
      const double w = plan.weights[p][k];
      const double* src = out.data().data() + plan.children[p][k] * d;
      for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
    }
  }
  return leaf_rows.tape()->Record(std::move(out), {leaf_rows}, [leaf_rows, plan, leaf_row, d](Tape& t, const Tensor& g) {
    // Top-down: reverse post-order pushes each node's gradient to its children.
    Tensor acc = g;
    Tensor& gin = t.GradBuffer(leaf_rows);
    for (auto it = plan.post_order.rbegin(); it != plan.post_order.rend(); ++it) {
      const std::size_t p = *it;
      const double* src = acc.data().data() + p * d;
      if (plan.children[p].empty()) {
        for (std::size_t c = 0; c < d; ++c) gin[leaf_row[p] * d + c] += src[c];
        continue;
      }
      for (std::size_t k = 0; k < plan.children[p].size(); ++k) {
        const double w = plan.weights[p][k];
        double* dst = acc.mutable_data().data() + plan.children[p][k] * d;
        for (std::size_t c = 0; c < d; ++c) dst[c] += w * src[c];
      }
    }
  });
}

Var EmbedTokens(Tape& tape, Var table, std::span<const std::size_t> ids) {
  (void)tape;
  const std::size_t vocab = table.value().dim(0);
  for (std::size_t id : ids) {
    if (id >= vocab) {
      throw Error(ErrorKind::kVocabulary,
                  "token id " + std::to_string(id) + " outside vocabulary of " + std::to_string(vocab));
    }
  }
  return GatherRows(table, ids);
}

Var EncodeTree(Tape& tape, const TreePlan& plan, const TreeParams& params) {
  Var tokens = EmbedTokens(tape, params.table, plan.leaf_tokens);
  Var tau = Tanh(AddRowVector(MatMul(tokens, Transpose(params.w_tau)), params.b_tau));
  return TreeCompose(tau, plan);
}

Var QuestionIntent(Var node_embeddings, const TreePlan& plan) {
  const std::size_t d = node_embeddings.value().dim(1);
  return Reshape(Slice(node_embeddings, 0, plan.root, 1), {d});
}

LanguageEncoding EncodeTree(const SyntaxTree& tree, const Tensor& table, const Tensor& w_tau, const Tensor& b_tau) {
  const TreePlan plan = PlanTree(tree);
  Tape tape;
  Var nodes = EncodeTree(tape, plan, {tape.Constant(table), tape.Constant(w_tau), tape.Constant(b_tau)});
  return {nodes.value(), QuestionIntent(nodes, plan).value()};
}

SyntaxTree RightBranchingTree(std::span<const std::size_t> tokens) {
  if (tokens.empty()) throw Error(ErrorKind::kPrecondition, "cannot parse an empty question");
  SyntaxTree tree;
  const int n = static_cast<int>(tokens.size());
  for (int k = 0; k < n; ++k) tree.nodes.push_back({k, {}, {}, tokens[k]});
  if (n == 1) {
    tree.root = 0;
    return tree;
  }
  // Internal node n + k joins leaf k with the chain to its right.
  for (int k = n - 2; k >= 0; --k) {
    const int right = k == n - 2 ? n - 1 : n + k + 1;
    tree.nodes.push_back({n + k, {k, right}, {0.5, 0.5}, std::nullopt});
  }
  tree.root = n;
  return tree;
}

void InitLanguageParams(ParameterStore& params, std::size_t vocab_size, std::size_t dim, Rng& rng) {
  Tensor table({vocab_size, dim});
  for (double& x : table.mutable_data()) x = 0.5 * rng.Normal();
  params.Add(kTokenTableName, std::move(table));
  const double bound = std::sqrt(6.0 / static_cast<double>(2 * dim));
  Tensor w({dim, dim});
  for (double& x : w.mutable_data()) x = rng.Uniform(-bound, bound);
  params.Add(kTauWeightName, std::move(w));
  params.Add(kTauBiasName, Tensor({dim}));
}

}  // namespace vlqa
