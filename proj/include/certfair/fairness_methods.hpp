// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Bias mitigation: gender-subspace debiasing of embeddings, label/identity
// instance weights, and the projected gradient used by adversarial
// debiasing together with its small adversary head.

#ifndef CERTFAIR_FAIRNESS_METHODS_HPP_
#define CERTFAIR_FAIRNESS_METHODS_HPP_

#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "certfair/autodiff.hpp"
#include "certfair/data_io.hpp"
#include "certfair/embedding.hpp"
#include "certfair/perturbation.hpp"

namespace certfair {

struct GenderSubspace {
  std::vector<double> direction;  // unit norm
  GenderPairList definitional_pairs;  // the pairs actually used
};

// Top principal component of the per-pair centered vectors. The sign makes
// direction . (a0 - b0) >= 0 for the first usable pair.
GenderSubspace gender_direction(const EmbeddingMatrix& embeddings, const Vocabulary& vocab,
                                const GenderPairList& pairs);

struct HardDebiasResult {
  EmbeddingMatrix embeddings;
  std::vector<TokenId> neutralized;
  std::vector<std::pair<TokenId, TokenId>> equalized;
};

// Every non-zero row is scaled to unit norm. Words outside the gendered
// lexicon and the equalize pairs lose their component along the direction
// and are renormalized; each equalize pair is then placed symmetrically about
// the orthogonal complement.
HardDebiasResult hard_debias(const EmbeddingMatrix& embeddings, const Vocabulary& vocab,
                             const GenderSubspace& subspace,
                             const GenderPairList& equalize_pairs,
                             const std::set<std::string>& gendered_lexicon);

struct InstanceWeightOptions {
  double clip_min = 0.1;
  double clip_max = 10.0;
  bool add_one_smoothing = false;
};

struct InstanceWeightTable {
  std::vector<double> weights;      // one per example
  std::vector<double> label_prior;  // Q(y)
  std::map<std::string, std::vector<double>> conditional;  // z -> P(y | z)
  std::vector<std::string> skipped_terms;  // lexicon terms absent from the data
};

// w = Q(y) / P(y | z); several identity terms combine by geometric mean,
// examples without one get 1, and the result is clipped.
InstanceWeightTable instance_weights(const Dataset& dataset,
                                     const std::vector<std::string>& identity_lexicon,
                                     const InstanceWeightOptions& options = {});

// g = grad_lp - proj_{grad_la}(grad_lp) - alpha * grad_la, with the
// projection onto a zero vector taken as zero.
Tensor debias_gradient(const Tensor& grad_lp, const Tensor& grad_la, double alpha);

// Adversary for one protected axis. It sees the predictor's class
// distribution and the one-hot gold label:
//   logits = w_pred . softmax(z) + w_gold . onehot(y) + bias.
struct Adversary {
  static constexpr const char* kPredWeight = "adversary.pred_weight";
  static constexpr const char* kGoldWeight = "adversary.gold_weight";
  static constexpr const char* kBias = "adversary.bias";

  std::string axis;
  std::vector<std::string> groups;
  Tensor pred_weight;  // [groups, classes]
  Tensor gold_weight;  // [groups, classes]
  Tensor bias;         // [groups]

  Adversary() = default;
  Adversary(std::string axis, std::vector<std::string> groups, std::size_t num_classes,
            std::uint64_t seed);

  // Index of the example's first group on this axis, if it has one.
  std::optional<std::size_t> target(const Example& example) const;

  // Appends the adversary head to `graph` and returns its cross-entropy node.
  NodeId build_loss(Graph& graph, NodeId predictor_logits, std::size_t gold,
                    std::size_t target_group) const;
  void bind(Bindings& bindings) const;
  std::vector<std::pair<const char*, Tensor*>> named();
};

}  // namespace certfair

#endif  // CERTFAIR_FAIRNESS_METHODS_HPP_
