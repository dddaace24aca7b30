// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/safer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace certfair {

double hoeffding_epsilon(std::size_t n, double confidence) {
  if (n == 0) throw std::invalid_argument("hoeffding_epsilon: need at least one sample");
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("hoeffding_epsilon: confidence must lie in (0, 1)");
  }
  return std::sqrt(std::log(2.0 / (1.0 - confidence)) / (2.0 * static_cast<double>(n)));
}

SmoothedScores smoothed_scores(const TextCnn& model, std::span<const TokenId> token_ids,
                               const ResolvedTable& clusters, const SaferOptions& options,
                               std::uint64_t sample_seed) {
  const auto ids = model.prepare(token_ids);
  const CandidateLists cands = model.prepare_candidates(
      token_ids, clusters.size() == 0 ? CandidateLists{} : clusters.candidates_for(token_ids));
  // Pad positions and positions without a cluster keep their token.
  CandidateLists lists(ids.size());
  for (std::size_t p = 0; p < ids.size(); ++p) {
    lists[p] = cands[p].empty() ? std::vector<TokenId>{ids[p]} : cands[p];
  }

  SmoothedScores out;
  out.scores.assign(model.num_classes(), 0.0);
  const std::size_t support = perturbation_count(lists);
  if (support <= options.exact_cap) {
    out.exact = true;
    out.samples = support;
    for (const auto& seq : enumerate_perturbations(ids, lists, options.exact_cap)) {
      const auto p = model.probabilities(seq);
      for (std::size_t c = 0; c < p.size(); ++c) out.scores[c] += p[c];
    }
  } else {
    if (options.n_samples == 0) {
      throw EnumerationError("smoothing support of " +
                             (support == std::numeric_limits<std::size_t>::max()
                                  ? std::string("overflowing size")
                                  : std::to_string(support)) +
                             " exceeds exact cap " + std::to_string(options.exact_cap) +
                             " and no sample count was given");
    }
    out.samples = options.n_samples;
    std::mt19937_64 rng(sample_seed);
    for (std::size_t s = 0; s < options.n_samples; ++s) {
      const auto p = model.probabilities(sample_perturbation(ids, lists, rng));
      for (std::size_t c = 0; c < p.size(); ++c) out.scores[c] += p[c];
    }
  }
  for (double& v : out.scores) v /= static_cast<double>(out.samples);
  return out;
}

std::size_t smoothed_prediction(const SmoothedScores& scores) {
  return static_cast<std::size_t>(
      std::max_element(scores.scores.begin(), scores.scores.end()) - scores.scores.begin());
}

CertificationResult safer_certify(const TextCnn& model, std::span<const TokenId> token_ids,
                                  std::size_t gold, const ResolvedTable& clusters,
                                  const SaferOptions& options, std::uint64_t sample_seed) {
  if (gold >= model.num_classes()) {
    throw std::out_of_range("safer_certify: gold class out of range");
  }
  if (clusters.size() != 0 && clusters.mode() != TableMode::kClustered) {
    throw std::invalid_argument("safer_certify: substitution table must be clustered");
  }
  const SmoothedScores s = smoothed_scores(model, token_ids, clusters, options, sample_seed);
  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < s.scores.size(); ++c) {
    if (c != gold) best_other = std::max(best_other, s.scores[c]);
  }
  CertificationResult r;
  r.method = CertifyMethod::kSafer;
  r.point_correct = model.predict(token_ids) == gold;
  r.margin = s.scores[gold] - best_other;
  r.samples_used = s.samples;
  const double threshold = s.exact ? 0.0 : 2.0 * hoeffding_epsilon(s.samples, options.confidence);
  r.certified = r.point_correct && r.margin > threshold;
  return r;
}

CertificationResult safer_certify(const TextCnn& model, const Example& example,
                                  const ResolvedTable& clusters, const SaferOptions& options,
                                  std::uint64_t sample_seed) {
  const auto ids = model.encode(example);
  return safer_certify(model, ids, example.label, clusters, options, sample_seed);
}

}  // namespace certfair
