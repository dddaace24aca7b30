// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Interval arithmetic over tensors. Boxes are carried as elementwise lower
// and upper bounds; linear layers use the center/radius rule
//   center' = W center + b,  radius' = |W| radius,
// which is exact for a single affine map over a box.

#ifndef CERTFAIR_INTERVAL_HPP_
#define CERTFAIR_INTERVAL_HPP_

#include <span>
#include <vector>

#include "certfair/embedding.hpp"
#include "certfair/tensor.hpp"

namespace certfair {

struct IntervalTensor {
  Tensor lower;
  Tensor upper;

  IntervalTensor() = default;
  IntervalTensor(Tensor lo, Tensor hi);
  static IntervalTensor point(const Tensor& value) { return IntervalTensor(value, value); }

  const Shape& shape() const { return lower.shape(); }
  Tensor center() const;
  Tensor radius() const;
  bool contains(const Tensor& x, double tolerance = 0.0) const;
  // True when every bound of `other` lies within this interval.
  bool encloses(const IntervalTensor& other) const;
};

// Per-position candidate ids (original token excluded or included; both work).
using CandidateLists = std::vector<std::vector<TokenId>>;

// [len, dim] box spanned by each position's original vector and its candidates.
IntervalTensor interval_from_substitutions(const EmbeddingMatrix& embeddings,
                                           std::span<const TokenId> token_ids,
                                           const CandidateLists& candidates);

// weight [C, H], bias [C] (or empty), x [H].
IntervalTensor interval_affine(const Tensor& weight, const Tensor& bias,
                               const IntervalTensor& x);
// weight [H, k, d], bias [H] (or empty), x [L, d] -> [L - k + 1, H].
IntervalTensor interval_conv1d(const Tensor& weight, const Tensor& bias,
                               const IntervalTensor& x);

enum class MonotoneKind {
  kRelu,
  kMaxPool,  // max over axis 0 of a [T, H] interval
};
IntervalTensor interval_monotone(MonotoneKind kind, const IntervalTensor& x);
// Elementwise max of two same-shaped intervals.
IntervalTensor interval_max(const IntervalTensor& a, const IntervalTensor& b);

// Worst corner for cross-entropy: gold logit at its lower bound, every other
// logit at its upper bound.
Tensor adversarial_logits(const IntervalTensor& logit_bounds, std::size_t gold);
double worst_case_loss(const IntervalTensor& logit_bounds, std::size_t gold);

double cross_entropy(std::span<const double> logits, std::size_t gold);
std::vector<double> softmax(std::span<const double> logits);

enum class CertifyMethod { kIbp, kSafer };

struct CertificationResult {
  bool certified = false;
  bool point_correct = false;
  // ibp: gold lower bound minus the largest other upper bound.
  // safer: smoothed gold score minus the best other smoothed score.
  double margin = 0.0;
  CertifyMethod method = CertifyMethod::kIbp;
  std::size_t samples_used = 0;
};

}  // namespace certfair

#endif  // CERTFAIR_INTERVAL_HPP_
