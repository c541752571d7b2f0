#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "vlqa/tensor.h"

namespace vlqa {

// Named trainable tensors. Iteration order is the lexicographic order of the
// names, which is also the checkpoint order.
class ParameterStore {
 public:
  struct Entry {
    Tensor value;
    Tensor grad;
  };

  Tensor& Add(const std::string& name, Tensor init);
  bool Contains(const std::string& name) const { return entries_.count(name) != 0; }
  const Tensor& Value(const std::string& name) const { return Get(name).value; }
  Tensor& MutableValue(const std::string& name) { return Get(name).value; }
  const Tensor& Grad(const std::string& name) const { return Get(name).grad; }
  Tensor& MutableGrad(const std::string& name) { return Get(name).grad; }

  void ZeroGrad();
  std::vector<std::string> Names() const;
  std::size_t size() const { return entries_.size(); }
  std::size_t NumScalars() const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  // Values only; gradients are ignored.
  bool SameValues(const ParameterStore& other) const;

 private:
  Entry& Get(const std::string& name);
  const Entry& Get(const std::string& name) const;

  std::map<std::string, Entry> entries_;
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Records primitive ops in execution order and replays them backwards.
// Single writer: one tape per forward/backward pass.
class Tape {
 public:
  // Receives the gradient flowing into the node's output and pushes
  // contributions to its inputs through Tape::AccumulateGrad.
  using BackwardFn = std::function<void(Tape&, const Tensor& out_grad)>;

  explicit Tape(ParameterStore* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var Constant(Tensor value);
  // Leaf bound to a registered parameter; repeated calls return the same node.
  Var Param(const std::string& name);

  // Appends an op node. `inputs` decides whether the node needs a gradient.
  Var Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
  Var Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

  // Seeds d(root)/d(root) = 1 and walks the nodes in exact reverse recording
  // order. Parameter leaf gradients are added into the ParameterStore.
  void Backward(Var root);

  const Tensor& Value(std::size_t id) const { return nodes_[id].value; }
  // Zero tensor if nothing reached the node.
  Tensor Grad(Var v) const;
  bool NeedsGrad(Var v) const { return nodes_[v.id()].needs_grad; }
  void AccumulateGrad(Var v, const Tensor& g);
  // Mutable buffer for in-place accumulation by backward kernels.
  Tensor& GradBuffer(Var v);

  std::size_t size() const { return nodes_.size(); }
  ParameterStore* params() const { return params_; }

  // Called with each node id as Backward visits it.
  void SetVisitObserver(std::function<void(std::size_t)> observer) { observer_ = std::move(observer); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    bool needs_grad = false;
    std::string param_name;
  };

  ParameterStore* params_;
  std::deque<Node> nodes_;  // stable addresses: ops hold references across Record
  std::map<std::string, std::size_t> param_nodes_;
  std::function<void(std::size_t)> observer_;
};

}  // namespace vlqa
