// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/interval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace certfair {

IntervalTensor::IntervalTensor(Tensor lo, Tensor hi) : lower(std::move(lo)), upper(std::move(hi)) {
  require_same_shape(lower, upper, "IntervalTensor");
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i])) {
      throw NonFiniteError("IntervalTensor: non-finite bound");
    }
    if (lower[i] > upper[i]) {
      throw std::invalid_argument("IntervalTensor: lower bound exceeds upper bound at " +
                                  std::to_string(i));
    }
  }
}

Tensor IntervalTensor::center() const {
  Tensor c(lower.shape());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = 0.5 * (lower[i] + upper[i]);
  return c;
}

Tensor IntervalTensor::radius() const {
  Tensor r(lower.shape());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = 0.5 * (upper[i] - lower[i]);
  return r;
}

bool IntervalTensor::contains(const Tensor& x, double tolerance) const {
  if (x.shape() != lower.shape()) return false;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < lower[i] - tolerance || x[i] > upper[i] + tolerance) return false;
  }
  return true;
}

bool IntervalTensor::encloses(const IntervalTensor& other) const {
  if (other.shape() != shape()) return false;
  for (std::size_t i = 0; i < lower.size(); ++i) {
    if (other.lower[i] < lower[i] || other.upper[i] > upper[i]) return false;
  }
  return true;
}

IntervalTensor interval_from_substitutions(const EmbeddingMatrix& embeddings,
                                           std::span<const TokenId> token_ids,
                                           const CandidateLists& candidates) {
  if (!candidates.empty() && candidates.size() != token_ids.size()) {
    throw ShapeError("interval_from_substitutions: " + std::to_string(candidates.size()) +
                     " candidate lists for " + std::to_string(token_ids.size()) +
                     " positions");
  }
  const std::size_t d = embeddings.dim();
  Tensor lo(Shape{token_ids.size(), d});
  Tensor hi(Shape{token_ids.size(), d});
  auto check = [&](TokenId id) {
    if (id >= embeddings.rows()) {
      throw std::out_of_range("interval_from_substitutions: token id " + std::to_string(id) +
                              " outside vocabulary of " + std::to_string(embeddings.rows()));
    }
  };
  for (std::size_t p = 0; p < token_ids.size(); ++p) {
    check(token_ids[p]);
    auto base = embeddings.row(token_ids[p]);
    for (std::size_t c = 0; c < d; ++c) {
      lo[p * d + c] = base[c];
      hi[p * d + c] = base[c];
    }
    if (candidates.empty()) continue;
    for (TokenId cand : candidates[p]) {
      check(cand);
      auto v = embeddings.row(cand);
      for (std::size_t c = 0; c < d; ++c) {
        lo[p * d + c] = std::min(lo[p * d + c], v[c]);
        hi[p * d + c] = std::max(hi[p * d + c], v[c]);
      }
    }
  }
  return IntervalTensor(std::move(lo), std::move(hi));
}

namespace {

IntervalTensor from_center_radius(const Tensor& center, const Tensor& radius) {
  Tensor lo(center.shape()), hi(center.shape());
  for (std::size_t i = 0; i < center.size(); ++i) {
    lo[i] = center[i] - radius[i];
    hi[i] = center[i] + radius[i];
  }
  return IntervalTensor(std::move(lo), std::move(hi));
}

}  // namespace

IntervalTensor interval_affine(const Tensor& weight, const Tensor& bias,
                               const IntervalTensor& x) {
  if (weight.rank() != 2 || x.lower.rank() != 1 || weight.dim(1) != x.lower.dim(0)) {
    throw ShapeError("interval_affine: weight " + shape_to_string(weight.shape()) +
                     " incompatible with input " + shape_to_string(x.shape()));
  }
  const std::size_t rows = weight.dim(0), cols = weight.dim(1);
  if (bias.size() != 0 && bias.shape() != Shape{rows}) {
    throw ShapeError("interval_affine: bias shape " + shape_to_string(bias.shape()));
  }
  const Tensor c = x.center(), r = x.radius();
  Tensor oc(Shape{rows}), orad(Shape{rows});
  for (std::size_t i = 0; i < rows; ++i) {
    double sc = bias.size() != 0 ? bias[i] : 0.0, sr = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      const double w = weight[i * cols + j];
      sc += w * c[j];
      sr += std::fabs(w) * r[j];
    }
    oc[i] = sc;
    orad[i] = sr;
  }
  return from_center_radius(oc, orad);
}

IntervalTensor interval_conv1d(const Tensor& weight, const Tensor& bias,
                               const IntervalTensor& x) {
  if (weight.rank() != 3 || x.lower.rank() != 2 || weight.dim(2) != x.lower.dim(1)) {
    throw ShapeError("interval_conv1d: weight " + shape_to_string(weight.shape()) +
                     " incompatible with input " + shape_to_string(x.shape()));
  }
  const std::size_t h = weight.dim(0), k = weight.dim(1), d = weight.dim(2);
  const std::size_t len = x.lower.dim(0);
  if (len < k) throw ShapeError("interval_conv1d: input shorter than kernel");
  if (bias.size() != 0 && bias.shape() != Shape{h}) {
    throw ShapeError("interval_conv1d: bias shape " + shape_to_string(bias.shape()));
  }
  const Tensor c = x.center(), r = x.radius();
  const std::size_t steps = len - k + 1, window = k * d;
  Tensor oc(Shape{steps, h}), orad(Shape{steps, h});
  for (std::size_t t = 0; t < steps; ++t) {
    const double* cw = c.data().data() + t * d;
    const double* rw = r.data().data() + t * d;
    for (std::size_t f = 0; f < h; ++f) {
      const double* wf = weight.data().data() + f * window;
      double sc = bias.size() != 0 ? bias[f] : 0.0, sr = 0.0;
      for (std::size_t j = 0; j < window; ++j) {
        sc += wf[j] * cw[j];
        sr += std::fabs(wf[j]) * rw[j];
      }
      oc[t * h + f] = sc;
      orad[t * h + f] = sr;
    }
  }
  return from_center_radius(oc, orad);
}

IntervalTensor interval_monotone(MonotoneKind kind, const IntervalTensor& x) {
  switch (kind) {
    case MonotoneKind::kRelu: {
      Tensor lo = x.lower, hi = x.upper;
      for (double& v : lo.data()) v = std::max(v, 0.0);
      for (double& v : hi.data()) v = std::max(v, 0.0);
      return IntervalTensor(std::move(lo), std::move(hi));
    }
    case MonotoneKind::kMaxPool: {
      if (x.lower.rank() != 2 || x.lower.dim(0) == 0) {
        throw ShapeError("interval_monotone(max_pool): expected non-empty [T, H] interval");
      }
      const std::size_t steps = x.lower.dim(0), h = x.lower.dim(1);
      Tensor lo(Shape{h}, -std::numeric_limits<double>::infinity());
      Tensor hi(Shape{h}, -std::numeric_limits<double>::infinity());
      for (std::size_t t = 0; t < steps; ++t) {
        for (std::size_t f = 0; f < h; ++f) {
          lo[f] = std::max(lo[f], x.lower[t * h + f]);
          hi[f] = std::max(hi[f], x.upper[t * h + f]);
        }
      }
      return IntervalTensor(std::move(lo), std::move(hi));
    }
  }
  throw std::invalid_argument("interval_monotone: unknown kind");
}

IntervalTensor interval_max(const IntervalTensor& a, const IntervalTensor& b) {
  require_same_shape(a.lower, b.lower, "interval_max");
  Tensor lo(a.shape()), hi(a.shape());
  for (std::size_t i = 0; i < lo.size(); ++i) {
    lo[i] = std::max(a.lower[i], b.lower[i]);
    hi[i] = std::max(a.upper[i], b.upper[i]);
  }
  return IntervalTensor(std::move(lo), std::move(hi));
}

Tensor adversarial_logits(const IntervalTensor& logit_bounds, std::size_t gold) {
  if (logit_bounds.lower.rank() != 1) {
    throw ShapeError("adversarial_logits: logit bounds must be 1-D");
  }
  if (gold >= logit_bounds.lower.size()) {
    throw std::out_of_range("adversarial_logits: gold class " + std::to_string(gold) +
                            " out of range");
  }
  Tensor z = logit_bounds.upper;
  z[gold] = logit_bounds.lower[gold];
  return z;
}

double worst_case_loss(const IntervalTensor& logit_bounds, std::size_t gold) {
  return cross_entropy(adversarial_logits(logit_bounds, gold).data(), gold);
}

double cross_entropy(std::span<const double> logits, std::size_t gold) {
  if (gold >= logits.size()) throw std::out_of_range("cross_entropy: gold out of range");
  double m = -std::numeric_limits<double>::infinity();
  for (double z : logits) m = std::max(m, z);
  double total = 0.0;
  for (double z : logits) total += std::exp(z - m);
  return m + std::log(total) - logits[gold];
}

std::vector<double> softmax(std::span<const double> logits) {
  double m = -std::numeric_limits<double>::infinity();
  for (double z : logits) m = std::max(m, z);
  std::vector<double> p(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    total += p[i];
  }
  for (double& v : p) v /= total;
  return p;
}

}  // namespace certfair
