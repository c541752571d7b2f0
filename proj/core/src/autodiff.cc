#include "vlqa/autodiff.h"

#include "vlqa/errors.h"

namespace vlqa {

Tensor& ParameterStore::Add(const std::string& name, Tensor init) {
  if (entries_.count(name)) throw Error(ErrorKind::kConfiguration, "duplicate parameter " + name);
  Tensor grad(init.shape());
  auto [it, inserted] = entries_.emplace(name, Entry{std::move(init), std::move(grad)});
  return it->second.value;
}

ParameterStore::Entry& ParameterStore::Get(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorKind::kConfiguration, "unknown parameter " + name);
  return it->second;
}

const ParameterStore::Entry& ParameterStore::Get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error(ErrorKind::kConfiguration, "unknown parameter " + name);
  return it->second;
}

void ParameterStore::ZeroGrad() {
  for (auto& [name, entry] : entries_) entry.grad = Tensor(entry.value.shape());
}

std::vector<std::string> ParameterStore::Names() const {
  std::vector<std::string> names;
  names.reserve(entries_.size());
  for (const auto& [name, entry] : entries_) names.push_back(name);
  return names;
}

std::size_t ParameterStore::NumScalars() const {
  std::size_t n = 0;
  for (const auto& [name, entry] : entries_) n += entry.value.size();
  return n;
}

bool ParameterStore::SameValues(const ParameterStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  auto it = other.entries_.begin();
  for (const auto& [name, entry] : entries_) {
    if (name != it->first || !(entry.value == it->second.value)) return false;
    ++it;
  }
  return true;
}

const Tensor& Var::value() const { return tape_->Value(id_); }

Var Tape::Constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Param(const std::string& name) {
  if (params_ == nullptr) throw Error(ErrorKind::kConfiguration, "tape has no parameter store");
  auto it = param_nodes_.find(name);
  if (it != param_nodes_.end()) return Var(this, it->second);
  nodes_.push_back(Node{params_->Value(name), {}, {}, true, name});
  param_nodes_[name] = nodes_.size() - 1;
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, needs, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::Record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
  bool needs = false;
  for (const Var& v : inputs) needs = needs || nodes_[v.id()].needs_grad;
  nodes_.push_back(Node{std::move(value), {}, needs ? std::move(backward) : BackwardFn{}, needs, {}});
  return Var(this, nodes_.size() - 1);
}

Tensor Tape::Grad(Var v) const {
  const Node& node = nodes_[v.id()];
  if (node.grad.shape().empty() && !node.value.shape().empty()) return Tensor(node.value.shape());
  return node.grad;
}

Tensor& Tape::GradBuffer(Var v) {
  Node& node = nodes_[v.id()];
  if (node.grad.shape() != node.value.shape()) node.grad = Tensor(node.value.shape());
  return node.grad;
}

void Tape::AccumulateGrad(Var v, const Tensor& g) {
  if (!nodes_[v.id()].needs_grad) return;
  Tensor& buf = GradBuffer(v);
  if (buf.shape() != g.shape()) {
    throw Error(ErrorKind::kDimension,
                "gradient " + ShapeString(g.shape()) + " for node of shape " + ShapeString(buf.shape()));
  }
  auto dst = buf.mutable_data();
  auto src = g.data();
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
}

void Tape::Backward(Var root) {
  if (root.tape() != this) throw Error(ErrorKind::kConfiguration, "Backward on a foreign tape");
  if (nodes_[root.id()].value.size() != 1) {
    throw Error(ErrorKind::kDimension,
                "Backward needs a scalar root, got " + ShapeString(nodes_[root.id()].value.shape()));
  }
  GradBuffer(root)[0] = 1.0;
  for (std::size_t id = nodes_.size(); id-- > 0;) {
    if (observer_) observer_(id);
    Node& node = nodes_[id];
    if (!node.needs_grad || node.grad.shape() != node.value.shape()) continue;
    if (node.backward) {
      // Inputs always have smaller ids, so node.grad is never written here.
      node.backward(*this, node.grad);
    } else if (!node.param_name.empty() && params_ != nullptr) {
      Tensor& dst = params_->MutableGrad(node.param_name);
      auto d = dst.mutable_data();
      auto s = node.grad.data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
    }
  }
}

}  // namespace vlqa
