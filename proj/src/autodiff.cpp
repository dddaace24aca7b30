// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace certfair {

namespace {

const char* op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kVariable: return "variable";
    case OpKind::kConstant: return "constant";
    case OpKind::kGather: return "gather";
    case OpKind::kConv1d: return "conv1d";
    case OpKind::kRelu: return "relu";
    case OpKind::kAbs: return "abs";
    case OpKind::kMaxOverTime: return "max_over_time";
    case OpKind::kAffine: return "affine";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kSum: return "sum";
  }
  return "?";
}

void require_rank(const Tensor& t, std::size_t rank, OpKind kind, const char* what) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op_name(kind)) + ": " + what + " must have rank " +
                     std::to_string(rank) + ", got " + shape_to_string(t.shape()));
  }
}

// Numerically stable softmax into `out`.
void softmax_into(std::span<const double> logits, std::span<double> out) {
  double m = -std::numeric_limits<double>::infinity();
  for (double z : logits) m = std::max(m, z);
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - m);
    total += out[i];
  }
  for (double& p : out) p /= total;
}

}  // namespace

const Tensor* Bindings::find(const std::string& name) const {
  auto it = table_.find(name);
  return it == table_.end() ? nullptr : it->second;
}

NodeId Graph::push(Node node) {
  for (NodeId in : node.inputs) {
    if (in.index >= nodes_.size()) {
      throw std::invalid_argument("graph input refers to a node not yet created");
    }
    node.needs_grad = node.needs_grad || nodes_[in.index].needs_grad;
  }
  nodes_.push_back(std::move(node));
  evaluated_ = false;
  backpropagated_ = false;
  return NodeId{nodes_.size() - 1};
}

NodeId Graph::variable(std::string name) {
  Node n{OpKind::kVariable, {}};
  n.name = std::move(name);
  n.needs_grad = true;
  return push(std::move(n));
}

NodeId Graph::constant(Tensor value) {
  NodeId id = push(Node{OpKind::kConstant, {}});
  if (values_.size() < nodes_.size()) values_.resize(nodes_.size());
  values_[id.index] = std::move(value);
  return id;
}

NodeId Graph::gather(NodeId table, std::vector<std::uint32_t> ids) {
  Node n{OpKind::kGather, {table}};
  n.ids = std::move(ids);
  return push(std::move(n));
}

NodeId Graph::conv1d(NodeId input, NodeId weight, std::optional<NodeId> bias) {
  Node n{OpKind::kConv1d, {input, weight}};
  if (bias) {
    n.inputs.push_back(*bias);
    n.has_bias = true;
  }
  return push(std::move(n));
}

NodeId Graph::relu(NodeId x) { return push(Node{OpKind::kRelu, {x}}); }
NodeId Graph::abs(NodeId x) { return push(Node{OpKind::kAbs, {x}}); }
NodeId Graph::max_over_time(NodeId x) { return push(Node{OpKind::kMaxOverTime, {x}}); }

NodeId Graph::affine(NodeId weight, std::optional<NodeId> bias, NodeId x) {
  Node n{OpKind::kAffine, {weight, x}};
  if (bias) {
    n.inputs.push_back(*bias);
    n.has_bias = true;
  }
  return push(std::move(n));
}

NodeId Graph::softmax(NodeId logits) { return push(Node{OpKind::kSoftmax, {logits}}); }

NodeId Graph::softmax_cross_entropy(NodeId logits, std::size_t gold) {
  Node n{OpKind::kSoftmaxCrossEntropy, {logits}};
  n.gold = gold;
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) { return push(Node{OpKind::kAdd, {a, b}}); }
NodeId Graph::sub(NodeId a, NodeId b) { return push(Node{OpKind::kSub, {a, b}}); }
NodeId Graph::mul(NodeId a, NodeId b) { return push(Node{OpKind::kMul, {a, b}}); }

NodeId Graph::scale(NodeId x, double factor) {
  Node n{OpKind::kScale, {x}};
  n.factor = factor;
  return push(std::move(n));
}

NodeId Graph::sum(NodeId x) { return push(Node{OpKind::kSum, {x}}); }

NodeId Graph::root() const {
  if (nodes_.empty()) throw std::logic_error("empty graph has no root");
  return NodeId{nodes_.size() - 1};
}

const Tensor& Graph::value(NodeId node) const {
  if (!evaluated_) throw std::logic_error("graph value requested before evaluate");
  const std::size_t i = node.index;
  if (nodes_.at(i).kind == OpKind::kVariable) return *bound_[i];
  return values_[i];
}

const Tensor& Graph::input_value(const Node& node, std::size_t i) const {
  const std::size_t j = node.inputs[i].index;
  if (nodes_[j].kind == OpKind::kVariable) return *bound_[j];
  return values_[j];
}

const Tensor& Graph::evaluate(const Bindings& bindings) {
  if (nodes_.empty()) throw std::logic_error("evaluate on empty graph");
  values_.resize(nodes_.size());
  bound_.assign(nodes_.size(), nullptr);
  aux_.assign(nodes_.size(), Tensor());
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind == OpKind::kVariable) {
      const Tensor* t = bindings.find(n.name);
      if (t == nullptr) throw std::invalid_argument("unbound variable '" + n.name + "'");
      bound_[i] = t;
      continue;
    }
    if (n.kind == OpKind::kConstant) continue;
    compute(i);
    if (!values_[i].all_finite()) {
      throw NonFiniteError(std::string("non-finite result in ") + op_name(n.kind) +
                           " node " + std::to_string(i));
    }
  }
  evaluated_ = true;
  backpropagated_ = false;
  return value(root());
}

void Graph::compute(std::size_t index) {
  const Node& n = nodes_[index];
  Tensor& out = values_[index];
  switch (n.kind) {
    case OpKind::kGather: {
      const Tensor& table = input_value(n, 0);
      require_rank(table, 2, n.kind, "table");
      const std::size_t d = table.dim(1);
      out = Tensor(Shape{n.ids.size(), d});
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        if (n.ids[r] >= table.dim(0)) {
          throw std::out_of_range("gather: id " + std::to_string(n.ids[r]) +
                                  " outside table of " + std::to_string(table.dim(0)) +
                                  " rows");
        }
        std::copy_n(table.data().begin() + n.ids[r] * d, d, out.data().begin() + r * d);
      }
      break;
    }
    case OpKind::kConv1d: {
      const Tensor& x = input_value(n, 0);
      const Tensor& w = input_value(n, 1);
      require_rank(x, 2, n.kind, "input");
      require_rank(w, 3, n.kind, "weight");
      const std::size_t len = x.dim(0), d = x.dim(1);
      const std::size_t h = w.dim(0), k = w.dim(1);
      if (w.dim(2) != d) {
        throw ShapeError("conv1d: weight width " + std::to_string(w.dim(2)) +
                         " does not match input width " + std::to_string(d));
      }
      if (len < k) {
        throw ShapeError("conv1d: input length " + std::to_string(len) +
                         " shorter than kernel " + std::to_string(k));
      }
      const Tensor* b = nullptr;
      if (n.has_bias) {
        b = &input_value(n, 2);
        if (b->shape() != Shape{h}) throw ShapeError("conv1d: bias shape mismatch");
      }
      const std::size_t steps = len - k + 1, window = k * d;
      out = Tensor(Shape{steps, h});
      const double* xp = x.data().data();
      const double* wp = w.data().data();
      for (std::size_t t = 0; t < steps; ++t) {
        const double* xw = xp + t * d;
        for (std::size_t f = 0; f < h; ++f) {
          const double* wf = wp + f * window;
          double s = b ? (*b)[f] : 0.0;
          for (std::size_t j = 0; j < window; ++j) s += wf[j] * xw[j];
          out[t * h + f] = s;
        }
      }
      break;
    }
    case OpKind::kRelu: {
      out = input_value(n, 0);
      for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
      break;
    }
    case OpKind::kAbs: {
      out = input_value(n, 0);
      for (double& v : out.data()) v = std::fabs(v);
      break;
    }
    case OpKind::kMaxOverTime: {
      const Tensor& x = input_value(n, 0);
      require_rank(x, 2, n.kind, "input");
      const std::size_t steps = x.dim(0), h = x.dim(1);
      if (steps == 0) throw ShapeError("max_over_time: empty time axis");
      out = Tensor(Shape{h});
      Tensor arg(Shape{h});
      for (std::size_t f = 0; f < h; ++f) {
        std::size_t best = 0;
        for (std::size_t t = 1; t < steps; ++t) {
          if (x[t * h + f] > x[best * h + f]) best = t;
        }
        out[f] = x[best * h + f];
        arg[f] = static_cast<double>(best);
      }
      aux_[index] = std::move(arg);
      break;
    }
    case OpKind::kAffine: {
      const Tensor& w = input_value(n, 0);
      const Tensor& x = input_value(n, 1);
      require_rank(w, 2, n.kind, "weight");
      require_rank(x, 1, n.kind, "input");
      const std::size_t c = w.dim(0), h = w.dim(1);
      if (x.dim(0) != h) {
        throw ShapeError("affine: weight " + shape_to_string(w.shape()) +
                         " incompatible with input " + shape_to_string(x.shape()));
      }
      const Tensor* b = nullptr;
      if (n.has_bias) {
        b = &input_value(n, 2);
        if (b->shape() != Shape{c}) throw ShapeError("affine: bias shape mismatch");
      }
      out = Tensor(Shape{c});
      for (std::size_t r = 0; r < c; ++r) {
        out[r] = (b ? (*b)[r] : 0.0) + dot(w.data().subspan(r * h, h), x.data());
      }
      break;
    }
    case OpKind::kSoftmax: {
      const Tensor& z = input_value(n, 0);
      require_rank(z, 1, n.kind, "logits");
      out = Tensor(z.shape());
      softmax_into(z.data(), out.data());
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      const Tensor& z = input_value(n, 0);
      require_rank(z, 1, n.kind, "logits");
      if (n.gold >= z.size()) {
        throw std::out_of_range("softmax_cross_entropy: gold class " +
                                std::to_string(n.gold) + " out of range");
      }
      double m = -std::numeric_limits<double>::infinity();
      for (double v : z.data()) m = std::max(m, v);
      double total = 0.0;
      for (double v : z.data()) total += std::exp(v - m);
      out = Tensor::scalar(m + std::log(total) - z[n.gold]);
      Tensor p(z.shape());
      softmax_into(z.data(), p.data());
      aux_[index] = std::move(p);
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub:
    case OpKind::kMul: {
      const Tensor& a = input_value(n, 0);
      const Tensor& b = input_value(n, 1);
      require_same_shape(a, b, op_name(n.kind));
      out = a;
      auto o = out.data();
      auto bd = b.data();
      if (n.kind == OpKind::kAdd) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
      } else if (n.kind == OpKind::kSub) {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
      } else {
        for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
      }
      break;
    }
    case OpKind::kScale: {
      out = input_value(n, 0);
      out *= n.factor;
      break;
    }
    case OpKind::kSum: {
      double s = 0.0;
      for (double v : input_value(n, 0).data()) s += v;
      out = Tensor::scalar(s);
      break;
    }
    case OpKind::kVariable:
    case OpKind::kConstant:
      break;
  }
}

Tensor& Graph::adjoint_slot(NodeId node) {
  const std::size_t i = node.index;
  if (!has_adjoint_[i]) {
    const Tensor& v = value(node);
    adjoints_[i] = Tensor(v.shape());
    has_adjoint_[i] = true;
  }
  return adjoints_[i];
}

Gradients Graph::backward(const Tensor& seed) {
  if (!evaluated_) throw std::logic_error("backward called before evaluate");
  const NodeId top = root();
  if (seed.shape() != value(top).shape()) {
    throw ShapeError("backward: seed shape " + shape_to_string(seed.shape()) +
                     " does not match root shape " +
                     shape_to_string(value(top).shape()));
  }
  adjoints_.assign(nodes_.size(), Tensor());
  has_adjoint_.assign(nodes_.size(), false);
  adjoints_[top.index] = seed;
  has_adjoint_[top.index] = true;

  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (!has_adjoint_[i] || !nodes_[i].needs_grad) continue;
    propagate(i);
  }
  backpropagated_ = true;

  Gradients grads;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind != OpKind::kVariable) continue;
    Tensor g = has_adjoint_[i] ? adjoints_[i] : Tensor(bound_[i]->shape());
    auto it = grads.find(nodes_[i].name);
    if (it == grads.end()) {
      grads.emplace(nodes_[i].name, std::move(g));
    } else {
      it->second += g;
    }
  }
  return grads;
}

Tensor Graph::adjoint(NodeId node) const {
  if (!backpropagated_) throw std::logic_error("adjoint requested before backward");
  if (has_adjoint_.at(node.index)) return adjoints_[node.index];
  return Tensor(value(node).shape());
}

void Graph::propagate(std::size_t index) {
  const Node& n = nodes_[index];
  const Tensor& g = adjoints_[index];
  auto needs = [&](std::size_t input) { return nodes_[n.inputs[input].index].needs_grad; };

  switch (n.kind) {
    case OpKind::kVariable:
    case OpKind::kConstant:
      break;
    case OpKind::kGather: {
      if (!needs(0)) break;
      Tensor& gt = adjoint_slot(n.inputs[0]);
      const std::size_t d = gt.dim(1);
      for (std::size_t r = 0; r < n.ids.size(); ++r) {
        for (std::size_t c = 0; c < d; ++c) gt[n.ids[r] * d + c] += g[r * d + c];
      }
      break;
    }
    case OpKind::kConv1d: {
      const Tensor& x = input_value(n, 0);
      const Tensor& w = input_value(n, 1);
      const std::size_t d = x.dim(1), h = w.dim(0), k = w.dim(1);
      const std::size_t steps = x.dim(0) - k + 1, window = k * d;
      if (needs(0)) {
        Tensor& gx = adjoint_slot(n.inputs[0]);
        for (std::size_t t = 0; t < steps; ++t) {
          double* gxw = gx.data().data() + t * d;
          for (std::size_t f = 0; f < h; ++f) {
            const double go = g[t * h + f];
            if (go == 0.0) continue;
            const double* wf = w.data().data() + f * window;
            for (std::size_t j = 0; j < window; ++j) gxw[j] += go * wf[j];
          }
        }
      }
      if (needs(1)) {
        Tensor& gw = adjoint_slot(n.inputs[1]);
        for (std::size_t t = 0; t < steps; ++t) {
          const double* xw = x.data().data() + t * d;
          for (std::size_t f = 0; f < h; ++f) {
            const double go = g[t * h + f];
            if (go == 0.0) continue;
            double* gwf = gw.data().data() + f * window;
            for (std::size_t j = 0; j < window; ++j) gwf[j] += go * xw[j];
          }
        }
      }
      if (n.has_bias && needs(2)) {
        Tensor& gb = adjoint_slot(n.inputs[2]);
        for (std::size_t t = 0; t < steps; ++t) {
          for (std::size_t f = 0; f < h; ++f) gb[f] += g[t * h + f];
        }
      }
      break;
    }
    case OpKind::kRelu: {
      if (!needs(0)) break;
      const Tensor& x = input_value(n, 0);
      Tensor& gx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) gx[i] += g[i];
      }
      break;
    }
    case OpKind::kAbs: {
      if (!needs(0)) break;
      const Tensor& x = input_value(n, 0);
      Tensor& gx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < x.size(); ++i) {
        if (x[i] > 0.0) {
          gx[i] += g[i];
        } else if (x[i] < 0.0) {
          gx[i] -= g[i];
        }
      }
      break;
    }
    case OpKind::kMaxOverTime: {
      if (!needs(0)) break;
      const Tensor& arg = aux_[index];
      Tensor& gx = adjoint_slot(n.inputs[0]);
      const std::size_t h = arg.size();
      for (std::size_t f = 0; f < h; ++f) {
        gx[static_cast<std::size_t>(arg[f]) * h + f] += g[f];
      }
      break;
    }
    case OpKind::kAffine: {
      const Tensor& w = input_value(n, 0);
      const Tensor& x = input_value(n, 1);
      const std::size_t c = w.dim(0), h = w.dim(1);
      if (needs(0)) {
        Tensor& gw = adjoint_slot(n.inputs[0]);
        for (std::size_t r = 0; r < c; ++r) {
          for (std::size_t j = 0; j < h; ++j) gw[r * h + j] += g[r] * x[j];
        }
      }
      if (needs(1)) {
        Tensor& gx = adjoint_slot(n.inputs[1]);
        for (std::size_t r = 0; r < c; ++r) {
          for (std::size_t j = 0; j < h; ++j) gx[j] += g[r] * w[r * h + j];
        }
      }
      if (n.has_bias && needs(2)) {
        Tensor& gb = adjoint_slot(n.inputs[2]);
        for (std::size_t r = 0; r < c; ++r) gb[r] += g[r];
      }
      break;
    }
    case OpKind::kSoftmax: {
      if (!needs(0)) break;
      const Tensor& p = values_[index];
      const double inner = dot(p.data(), g.data());
      Tensor& gz = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < p.size(); ++i) gz[i] += p[i] * (g[i] - inner);
      break;
    }
    case OpKind::kSoftmaxCrossEntropy: {
      if (!needs(0)) break;
      const Tensor& p = aux_[index];
      const double go = g[0];
      Tensor& gz = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < p.size(); ++i) {
        gz[i] += go * (p[i] - (i == n.gold ? 1.0 : 0.0));
      }
      break;
    }
    case OpKind::kAdd:
    case OpKind::kSub: {
      if (needs(0)) adjoint_slot(n.inputs[0]) += g;
      if (needs(1)) {
        Tensor& gb = adjoint_slot(n.inputs[1]);
        if (n.kind == OpKind::kAdd) {
          gb += g;
        } else {
          for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
        }
      }
      break;
    }
    case OpKind::kMul: {
      const Tensor& a = input_value(n, 0);
      const Tensor& b = input_value(n, 1);
      if (needs(0)) {
        Tensor& ga = adjoint_slot(n.inputs[0]);
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * b[i];
      }
      if (needs(1)) {
        Tensor& gb = adjoint_slot(n.inputs[1]);
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * a[i];
      }
      break;
    }
    case OpKind::kScale: {
      if (!needs(0)) break;
      Tensor& gx = adjoint_slot(n.inputs[0]);
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += n.factor * g[i];
      break;
    }
    case OpKind::kSum: {
      if (!needs(0)) break;
      Tensor& gx = adjoint_slot(n.inputs[0]);
      for (double& v : gx.data()) v += g[0];
      break;
    }
  }
}

double finite_diff_check(const GradientFunction& fn, const Tensor& point, double step,
                         double abs_floor) {
  if (!(step > 0.0) || !std::isfinite(step)) {
    throw std::invalid_argument("finite_diff_check: step must be positive, got " +
                                std::to_string(step));
  }
  auto [value, analytic] = fn(point);
  if (!std::isfinite(value)) throw NonFiniteError("finite_diff_check: non-finite value");
  require_same_shape(analytic, point, "finite_diff_check");

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = probe[i];
    probe[i] = original + step;
    const double up = fn(probe).first;
    probe[i] = original - step;
    const double down = fn(probe).first;
    probe[i] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("finite_diff_check: non-finite value at coordinate " +
                           std::to_string(i));
    }
    const double numeric = (up - down) / (2.0 * step);
    const double denom =
        std::max({std::fabs(analytic[i]), std::fabs(numeric), abs_floor});
    worst = std::max(worst, std::fabs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace certfair
