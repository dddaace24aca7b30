// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode automatic differentiation over a small fixed set of tensor
// operations: gather, 1-D convolution, ReLU, abs, max-over-time, affine,
// softmax, softmax cross-entropy, elementwise arithmetic and sum.
//
// A Graph is built node by node. Every node's inputs are created before it,
// so insertion order is a topological order and backward simply walks the
// node list in reverse. Graphs are single-threaded; several graphs may read
// the same bound parameter tensors concurrently.

#ifndef CERTFAIR_AUTODIFF_HPP_
#define CERTFAIR_AUTODIFF_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "certfair/tensor.hpp"

namespace certfair {

struct NodeId {
  std::size_t index = 0;
  friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

enum class OpKind {
  kVariable,
  kConstant,
  kGather,
  kConv1d,
  kRelu,
  kAbs,
  kMaxOverTime,
  kAffine,
  kSoftmax,
  kSoftmaxCrossEntropy,
  kAdd,
  kSub,
  kMul,
  kScale,
  kSum,
};

// Name -> tensor lookup for the free variables of a graph. Bound tensors are
// referenced, not copied, and must outlive evaluate() and backward().
class Bindings {
 public:
  Bindings() = default;
  Bindings(std::initializer_list<std::pair<const std::string, const Tensor*>> init)
      : table_(init) {}

  void bind(std::string name, const Tensor& value) {
    table_.insert_or_assign(std::move(name), &value);
  }
  const Tensor* find(const std::string& name) const;

 private:
  std::map<std::string, const Tensor*> table_;
};

using Gradients = std::map<std::string, Tensor>;

class Graph {
 public:
  NodeId variable(std::string name);
  NodeId constant(Tensor value);

  // Rows of `table` ([V, d]) selected by `ids`; output [len(ids), d].
  NodeId gather(NodeId table, std::vector<std::uint32_t> ids);
  // input [L, d], weight [H, k, d], optional bias [H]; output [L - k + 1, H].
  NodeId conv1d(NodeId input, NodeId weight, std::optional<NodeId> bias);
  NodeId relu(NodeId x);
  NodeId abs(NodeId x);
  // [T, H] -> [H].
  NodeId max_over_time(NodeId x);
  // weight [C, H] applied to x [H], optional bias [C]; output [C].
  NodeId affine(NodeId weight, std::optional<NodeId> bias, NodeId x);
  NodeId softmax(NodeId logits);
  // Scalar cross-entropy of softmax(logits) against class `gold`.
  NodeId softmax_cross_entropy(NodeId logits, std::size_t gold);
  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId scale(NodeId x, double factor);
  NodeId sum(NodeId x);

  std::size_t size() const { return nodes_.size(); }
  OpKind kind(NodeId node) const { return nodes_.at(node.index).kind; }
  NodeId root() const;

  // Evaluates every node and returns the root (last node) value.
  const Tensor& evaluate(const Bindings& bindings);
  const Tensor& value(NodeId node) const;

  // Reverse-mode pass from the root. Returns d(root . seed)/d(variable) for
  // every variable node, keyed by name; repeated variables accumulate.
  Gradients backward(const Tensor& seed);
  // Adjoint of an arbitrary node after backward(); zero if unreachable.
  Tensor adjoint(NodeId node) const;

 private:
  struct Node {
    Node(OpKind k, std::vector<NodeId> in) : kind(k), inputs(std::move(in)) {}
    OpKind kind;
    std::vector<NodeId> inputs;
    std::string name;                 // kVariable
    std::vector<std::uint32_t> ids;   // kGather
    std::size_t gold = 0;             // kSoftmaxCrossEntropy
    double factor = 1.0;              // kScale
    bool has_bias = false;            // kConv1d, kAffine
    bool needs_grad = false;
  };

  NodeId push(Node node);
  const Tensor& input_value(const Node& node, std::size_t i) const;
  void compute(std::size_t index);
  void propagate(std::size_t index);
  Tensor& adjoint_slot(NodeId node);

  std::vector<Node> nodes_;
  std::vector<Tensor> values_;
  std::vector<const Tensor*> bound_;     // variable nodes only
  std::vector<Tensor> aux_;              // per-node cache (softmax, argmax)
  std::vector<Tensor> adjoints_;
  std::vector<bool> has_adjoint_;
  bool evaluated_ = false;
  bool backpropagated_ = false;
};

// Value and analytic gradient of a scalar function at a point.
using GradientFunction = std::function<std::pair<double, Tensor>(const Tensor&)>;

// Maximum over coordinates of |analytic - numeric| / max(|analytic|,
// |numeric|, abs_floor), with the numeric gradient from central differences.
double finite_diff_check(const GradientFunction& fn, const Tensor& point,
                         double step, double abs_floor = 1e-6);

}  // namespace certfair

#endif  // CERTFAIR_AUTODIFF_HPP_
