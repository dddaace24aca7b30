// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/ibp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace certfair {

IbpLossResult ibp_loss_with_candidates(const TextCnn& model,
                                       std::span<const TokenId> token_ids,
                                       const CandidateLists& candidates, std::size_t gold,
                                       double lambda, const IbpLossOptions& options) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) {
    throw std::invalid_argument("ibp_loss: lambda must lie in [0, 1]");
  }
  if (gold >= model.num_classes()) throw std::out_of_range("ibp_loss: gold class out of range");
  const auto ids = model.prepare(token_ids);
  const auto cands = model.prepare_candidates(token_ids, candidates);
  const IntervalTensor box = interval_from_substitutions(model.embeddings(), ids, cands);

  Graph graph;
  const ParameterNodes params = model.add_parameters(graph);
  NodeId input = graph.constant(model.embed(ids));
  NodeId logits = model.build_logits(graph, params, input, options.dropout_mask);
  NodeId plain = graph.softmax_cross_entropy(logits, gold);

  auto [lower, upper] = model.build_logit_bounds(graph, params, box.center(), box.radius());
  Tensor gold_mask(Shape{model.num_classes()});
  gold_mask[gold] = 1.0;
  Tensor other_mask(Shape{model.num_classes()}, 1.0);
  other_mask[gold] = 0.0;
  NodeId corner = graph.add(graph.mul(lower, graph.constant(gold_mask)),
                            graph.mul(upper, graph.constant(other_mask)));
  NodeId worst = graph.softmax_cross_entropy(corner, gold);
  NodeId total = graph.add(graph.scale(plain, 1.0 - lambda), graph.scale(worst, lambda));
  graph.scale(total, options.weight);

  Bindings bindings;
  model.bind_parameters(bindings);
  graph.evaluate(bindings);

  IbpLossResult result;
  result.breakdown.plain_loss = graph.value(plain).item();
  result.breakdown.worst_case_loss = graph.value(worst).item();
  result.breakdown.lambda = lambda;
  result.breakdown.total = graph.value(total).item();
  if (options.compute_gradients) result.gradients = graph.backward(Tensor::scalar(1.0));
  return result;
}

IbpLossResult ibp_loss(const TextCnn& model, std::span<const TokenId> token_ids,
                       std::size_t gold, const ResolvedTable& table, double lambda,
                       const IbpLossOptions& options) {
  const CandidateLists cands =
      table.size() == 0 ? CandidateLists{} : table.candidates_for(token_ids);
  return ibp_loss_with_candidates(model, token_ids, cands, gold, lambda, options);
}

IbpLossResult ibp_loss(const TextCnn& model, const Example& example,
                       const ResolvedTable& table, double lambda,
                       const IbpLossOptions& options) {
  const auto ids = model.encode(example);
  return ibp_loss(model, ids, example.label, table, lambda, options);
}

CertificationResult certify_ibp_with_candidates(const TextCnn& model,
                                                std::span<const TokenId> token_ids,
                                                const CandidateLists& candidates,
                                                std::size_t gold) {
  if (gold >= model.num_classes()) {
    throw std::out_of_range("certify_ibp: gold class out of range");
  }
  CertificationResult result;
  result.method = CertifyMethod::kIbp;
  result.point_correct = model.predict(token_ids) == gold;
  const IntervalTensor z = model.forward_interval(token_ids, candidates);
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < z.lower.size(); ++c) {
    if (c != gold) best_other = std::max(best_other, z.upper[c]);
  }
  result.margin = z.lower[gold] - best_other;
  result.certified = result.point_correct && result.margin > 0.0;
  return result;
}

CertificationResult certify_ibp(const TextCnn& model, std::span<const TokenId> token_ids,
                                std::size_t gold, const ResolvedTable& table) {
  const CandidateLists cands =
      table.size() == 0 ? CandidateLists{} : table.candidates_for(token_ids);
  return certify_ibp_with_candidates(model, token_ids, cands, gold);
}

CertificationResult certify_ibp(const TextCnn& model, const Example& example,
                                const ResolvedTable& table) {
  const auto ids = model.encode(example);
  return certify_ibp(model, ids, example.label, table);
}

}  // namespace certfair
