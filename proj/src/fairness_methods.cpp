// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/fairness_methods.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <random>

namespace certfair {

namespace {

void normalize(std::span<double> v) {
  const double n = l2_norm(v);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

double dot_span(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

GenderSubspace gender_direction(const EmbeddingMatrix& embeddings, const Vocabulary& vocab,
                                const GenderPairList& pairs) {
  const std::size_t d = embeddings.dim();
  GenderSubspace out;
  Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d),
                                                  static_cast<Eigen::Index>(d));
  for (const auto& pair : pairs) {
    const auto a = vocab.find(pair.first);
    const auto b = vocab.find(pair.second);
    if (!a || !b || *a == *b) continue;
    Eigen::Map<const Eigen::VectorXd> va(embeddings.row(*a).data(), static_cast<Eigen::Index>(d));
    Eigen::Map<const Eigen::VectorXd> vb(embeddings.row(*b).data(), static_cast<Eigen::Index>(d));
    const Eigen::VectorXd mean = 0.5 * (va + vb);
    scatter += (va - mean) * (va - mean).transpose();
    scatter += (vb - mean) * (vb - mean).transpose();
    out.definitional_pairs.push_back(pair);
  }
  if (out.definitional_pairs.empty()) {
    throw std::invalid_argument("gender_direction: no pair has both words in the vocabulary");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(scatter);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("gender_direction: eigen decomposition failed");
  }
  Eigen::VectorXd g = solver.eigenvectors().col(static_cast<Eigen::Index>(d) - 1);
  if (g.norm() == 0.0) throw std::runtime_error("gender_direction: degenerate pairs");
  g.normalize();
  const auto& first = out.definitional_pairs.front();
  auto a0 = embeddings.row(*vocab.find(first.first));
  auto b0 = embeddings.row(*vocab.find(first.second));
  double orient = 0.0;
  for (std::size_t i = 0; i < d; ++i) orient += g[static_cast<Eigen::Index>(i)] * (a0[i] - b0[i]);
  if (orient < 0.0) g = -g;
  out.direction.assign(g.data(), g.data() + d);
  return out;
}

HardDebiasResult hard_debias(const EmbeddingMatrix& embeddings, const Vocabulary& vocab,
                             const GenderSubspace& subspace,
                             const GenderPairList& equalize_pairs,
                             const std::set<std::string>& gendered_lexicon) {
  const std::size_t d = embeddings.dim();
  const std::vector<double>& g = subspace.direction;
  if (g.size() != d) throw ShapeError("hard_debias: direction width does not match embeddings");
  if (std::fabs(l2_norm(g) - 1.0) > 1e-9) {
    throw std::invalid_argument("hard_debias: direction must have unit norm");
  }
  HardDebiasResult out{embeddings, {}, {}};
  EmbeddingMatrix& e = out.embeddings;

  std::set<std::string> keep = gendered_lexicon;
  for (const auto& [a, b] : equalize_pairs) {
    keep.insert(a);
    keep.insert(b);
  }
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (id == kPadId) continue;
    auto row = e.row(id);
    normalize(row);
    if (vocab.is_special(id) || keep.count(vocab.token(id)) != 0) continue;
    const double along = dot_span(row, g);
    for (std::size_t i = 0; i < d; ++i) row[i] -= along * g[i];
    normalize(row);
    out.neutralized.push_back(id);
  }

  for (const auto& [wa, wb] : equalize_pairs) {
    const auto a = vocab.find(wa);
    const auto b = vocab.find(wb);
    if (!a || !b || *a == *b) continue;
    auto ra = e.row(*a);
    auto rb = e.row(*b);
    std::vector<double> mu(d), nu(d);
    for (std::size_t i = 0; i < d; ++i) mu[i] = 0.5 * (ra[i] + rb[i]);
    const double mu_g = dot_span(mu, g);
    for (std::size_t i = 0; i < d; ++i) nu[i] = mu[i] - mu_g * g[i];
    const double scale = std::sqrt(std::max(0.0, 1.0 - dot_span(nu, nu)));
    // Sign of each word's offset from the pair mean along g. Coinciding
    // projections fall back to the pair order.
    double sa = dot_span(ra, g) - mu_g;
    if (sa == 0.0) sa = 1.0;
    const double side_a = sa > 0.0 ? 1.0 : -1.0;
    for (std::size_t i = 0; i < d; ++i) {
      ra[i] = nu[i] + side_a * scale * g[i];
      rb[i] = nu[i] - side_a * scale * g[i];
    }
    out.equalized.emplace_back(*a, *b);
  }
  return out;
}

InstanceWeightTable instance_weights(const Dataset& dataset,
                                     const std::vector<std::string>& identity_lexicon,
                                     const InstanceWeightOptions& options) {
  if (identity_lexicon.empty()) {
    throw std::invalid_argument("instance_weights: identity lexicon is empty");
  }
  if (!(options.clip_min > 0.0 && options.clip_min <= options.clip_max)) {
    throw std::invalid_argument("instance_weights: invalid clip range");
  }
  InstanceWeightTable table;
  const std::size_t classes = std::max<std::size_t>(class_count(dataset), 2);
  const std::set<std::string> lexicon(identity_lexicon.begin(), identity_lexicon.end());

  std::vector<std::size_t> label_counts(classes, 0);
  std::map<std::string, std::vector<std::size_t>> term_counts;
  std::vector<std::set<std::string>> present(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const Example& ex = dataset[i];
    ++label_counts[ex.label];
    for (const auto& tok : ex.tokens) {
      if (lexicon.count(tok) != 0) present[i].insert(tok);
    }
    for (const auto& z : present[i]) {
      auto& counts = term_counts[z];
      counts.resize(classes, 0);
      ++counts[ex.label];
    }
  }
  const double n = static_cast<double>(dataset.size());
  table.label_prior.resize(classes, 0.0);
  for (std::size_t y = 0; y < classes; ++y) {
    table.label_prior[y] = n > 0 ? static_cast<double>(label_counts[y]) / n : 0.0;
  }
  for (const auto& z : lexicon) {
    auto it = term_counts.find(z);
    if (it == term_counts.end()) {
      table.skipped_terms.push_back(z);
      continue;
    }
    std::size_t total = 0;
    for (std::size_t c : it->second) total += c;
    std::vector<double> p(classes);
    for (std::size_t y = 0; y < classes; ++y) {
      p[y] = options.add_one_smoothing
                 ? (static_cast<double>(it->second[y]) + 1.0) /
                       (static_cast<double>(total) + static_cast<double>(classes))
                 : static_cast<double>(it->second[y]) / static_cast<double>(total);
    }
    table.conditional.emplace(z, std::move(p));
  }

  table.weights.assign(dataset.size(), 1.0);
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (present[i].empty()) continue;
    const std::size_t y = dataset[i].label;
    double log_sum = 0.0;
    for (const auto& z : present[i]) {
      const double p = table.conditional.at(z)[y];
      const double w = p > 0.0 ? std::min(table.label_prior[y] / p, options.clip_max)
                               : options.clip_max;
      log_sum += std::log(std::max(w, options.clip_min));
    }
    const double w = std::exp(log_sum / static_cast<double>(present[i].size()));
    table.weights[i] = std::clamp(w, options.clip_min, options.clip_max);
  }
  return table;
}

Tensor debias_gradient(const Tensor& grad_lp, const Tensor& grad_la, double alpha) {
  require_same_shape(grad_lp, grad_la, "debias_gradient");
  if (!(alpha >= 0.0)) throw std::invalid_argument("debias_gradient: alpha must be >= 0");
  const double aa = dot(grad_la.data(), grad_la.data());
  const double coeff = aa > 0.0 ? dot(grad_lp.data(), grad_la.data()) / aa : 0.0;
  Tensor out(grad_lp.shape());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = grad_lp[i] - coeff * grad_la[i] - alpha * grad_la[i];
  }
  return out;
}

Adversary::Adversary(std::string axis_name, std::vector<std::string> group_names,
                     std::size_t num_classes, std::uint64_t seed)
    : axis(std::move(axis_name)), groups(std::move(group_names)) {
  if (groups.size() < 2) throw std::invalid_argument("Adversary: need at least 2 groups");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  pred_weight = Tensor(Shape{groups.size(), num_classes});
  gold_weight = Tensor(Shape{groups.size(), num_classes});
  bias = Tensor(Shape{groups.size()});
  for (double& v : pred_weight.data()) v = init(rng);
  for (double& v : gold_weight.data()) v = init(rng);
}

std::optional<std::size_t> Adversary::target(const Example& example) const {
  auto it = example.groups.find(axis);
  if (it == example.groups.end()) return std::nullopt;
  for (const auto& g : it->second) {
    auto pos = std::find(groups.begin(), groups.end(), g);
    if (pos != groups.end()) return static_cast<std::size_t>(pos - groups.begin());
  }
  return std::nullopt;
}

NodeId Adversary::build_loss(Graph& graph, NodeId predictor_logits, std::size_t gold,
                             std::size_t target_group) const {
  const std::size_t classes = pred_weight.dim(1);
  Tensor onehot(Shape{classes});
  onehot.data()[gold] = 1.0;
  NodeId probs = graph.softmax(predictor_logits);
  NodeId from_pred = graph.affine(graph.variable(kPredWeight), graph.variable(kBias), probs);
  NodeId from_gold =
      graph.affine(graph.variable(kGoldWeight), std::nullopt, graph.constant(onehot));
  return graph.softmax_cross_entropy(graph.add(from_pred, from_gold), target_group);
}

void Adversary::bind(Bindings& bindings) const {
  bindings.bind(kPredWeight, pred_weight);
  bindings.bind(kGoldWeight, gold_weight);
  bindings.bind(kBias, bias);
}

std::vector<std::pair<const char*, Tensor*>> Adversary::named() {
  return {{kPredWeight, &pred_weight}, {kGoldWeight, &gold_weight}, {kBias, &bias}};
}

}  // namespace certfair
