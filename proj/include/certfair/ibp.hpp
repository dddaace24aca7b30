// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interval-bound training loss and IBP certification for TextCnn.

#ifndef CERTFAIR_IBP_HPP_
#define CERTFAIR_IBP_HPP_

#include <span>

#include "certfair/autodiff.hpp"
#include "certfair/interval.hpp"
#include "certfair/perturbation.hpp"
#include "certfair/text_model.hpp"

namespace certfair {

struct IbpLossBreakdown {
  double plain_loss = 0.0;
  double worst_case_loss = 0.0;
  double lambda = 0.0;
  double total = 0.0;  // (1 - lambda) * plain_loss + lambda * worst_case_loss
};

struct IbpLossOptions {
  // Multiplies the total before differentiation (instance weighting). The
  // breakdown itself is unweighted.
  double weight = 1.0;
  // Pooled-feature mask on the plain path only; bounds never see dropout.
  const Tensor* dropout_mask = nullptr;
  bool compute_gradients = true;
};

struct IbpLossResult {
  IbpLossBreakdown breakdown;
  Gradients gradients;  // d(weight * total)/d(parameter), keyed by parameter name
};

// `token_ids` is the raw encoded example; candidates come from `table`.
IbpLossResult ibp_loss(const TextCnn& model, std::span<const TokenId> token_ids,
                       std::size_t gold, const ResolvedTable& table, double lambda,
                       const IbpLossOptions& options = {});
IbpLossResult ibp_loss(const TextCnn& model, const Example& example,
                       const ResolvedTable& table, double lambda,
                       const IbpLossOptions& options = {});

// Same value with explicit per-position candidates (used by tests).
IbpLossResult ibp_loss_with_candidates(const TextCnn& model,
                                       std::span<const TokenId> token_ids,
                                       const CandidateLists& candidates, std::size_t gold,
                                       double lambda, const IbpLossOptions& options = {});

CertificationResult certify_ibp(const TextCnn& model, std::span<const TokenId> token_ids,
                                std::size_t gold, const ResolvedTable& table);
CertificationResult certify_ibp(const TextCnn& model, const Example& example,
                                const ResolvedTable& table);
CertificationResult certify_ibp_with_candidates(const TextCnn& model,
                                                std::span<const TokenId> token_ids,
                                                const CandidateLists& candidates,
                                                std::size_t gold);

}  // namespace certfair

#endif  // CERTFAIR_IBP_HPP_
