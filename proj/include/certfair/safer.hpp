// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Randomized-smoothing certification over within-cluster word substitutions.
//
// The smoothed score of class c is the mean softmax score over uniform,
// independent per-position draws from each position's cluster. When the
// support of that distribution is small it is enumerated exactly; otherwise
// scores are estimated from samples and the certificate uses Hoeffding's
// inequality.

#ifndef CERTFAIR_SAFER_HPP_
#define CERTFAIR_SAFER_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "certfair/interval.hpp"
#include "certfair/perturbation.hpp"
#include "certfair/text_model.hpp"

namespace certfair {

struct SaferOptions {
  std::size_t exact_cap = 4096;  // largest support enumerated exactly
  std::size_t n_samples = 0;     // Monte Carlo draws; 0 forbids sampling
  double confidence = 0.95;
};

struct SmoothedScores {
  std::vector<double> scores;
  bool exact = false;
  std::size_t samples = 0;  // support size (exact) or draws
};

// Deviation of a mean of n draws in [0, 1] at two-sided confidence `confidence`:
// sqrt(ln(2 / (1 - confidence)) / (2 n)).
double hoeffding_epsilon(std::size_t n, double confidence);

// `sample_seed` drives the Monte Carlo draws, so results do not depend on
// evaluation order.
SmoothedScores smoothed_scores(const TextCnn& model, std::span<const TokenId> token_ids,
                               const ResolvedTable& clusters, const SaferOptions& options,
                               std::uint64_t sample_seed);

CertificationResult safer_certify(const TextCnn& model, std::span<const TokenId> token_ids,
                                  std::size_t gold, const ResolvedTable& clusters,
                                  const SaferOptions& options, std::uint64_t sample_seed);
CertificationResult safer_certify(const TextCnn& model, const Example& example,
                                  const ResolvedTable& clusters, const SaferOptions& options,
                                  std::uint64_t sample_seed);

// Prediction of the smoothed classifier: first argmax of the smoothed scores.
std::size_t smoothed_prediction(const SmoothedScores& scores);

}  // namespace certfair

#endif  // CERTFAIR_SAFER_HPP_
