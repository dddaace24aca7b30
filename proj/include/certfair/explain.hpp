// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Local surrogate explanations and gender-token counting over them.

#ifndef CERTFAIR_EXPLAIN_HPP_
#define CERTFAIR_EXPLAIN_HPP_

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "certfair/data_io.hpp"
#include "certfair/text_model.hpp"

namespace certfair {

// Class probabilities for a token-id sequence.
using ProbabilityFn = std::function<std::vector<double>(std::span<const TokenId>)>;

struct TokenFeature {
  TokenId id = kPadId;
  std::string token;
  double weight = 0.0;
};

struct Explanation {
  std::size_t example_id = 0;
  std::size_t explained_class = 0;
  std::vector<TokenFeature> features;  // top-k by |weight|, descending
  std::vector<TokenFeature> all_features;  // every distinct token, input order
  double intercept = 0.0;
  double r_squared = 0.0;
  // Model probability minus surrogate value on the unmasked input.
  double unmasked_residual = 0.0;
  double unmasked_probability = 0.0;
  bool degenerate = false;  // every sampled prediction identical
};

struct LimeOptions {
  std::size_t n_samples = 500;
  std::size_t k = 5;
  double kernel_width = 0.25;
  double ridge = 1e-3;
  std::optional<std::size_t> target_class;  // default: predicted class
};

// Features are the distinct non-padding tokens. The first sample is the
// unmasked input; every other sample masks a uniformly sized random subset
// of features by replacing them with padding.
Explanation lime_explain(const ProbabilityFn& model, const Vocabulary& vocab,
                         std::span<const TokenId> token_ids, const LimeOptions& options,
                         std::mt19937_64& rng);
Explanation lime_explain(const TextCnn& model, const Example& example,
                         const LimeOptions& options, std::mt19937_64& rng);

struct DisagreementOptions {
  // Keep only examples that model_a assigns to this class (e.g. the toxic
  // class for "misclassified as toxic").
  std::optional<std::size_t> a_predicted_class;
};

// Indices of examples that model_a gets wrong and model_b gets right.
std::vector<std::size_t> disagreement_set(const TextCnn& model_a, const TextCnn& model_b,
                                          const Dataset& dataset,
                                          const DisagreementOptions& options = {});

struct ModelTokenCounts {
  std::size_t gender_tokens = 0;          // gender tokens across all top-k lists
  std::size_t examples_with_gender = 0;   // examples with at least one
  std::map<std::string, std::size_t> per_token;
};

struct GenderTokenReport {
  std::size_t example_count = 0;  // examples explained
  std::size_t source_count = 0;   // examples offered before subsampling
  std::size_t k = 0;
  std::vector<std::string> lexicon;
  ModelTokenCounts model_a;
  ModelTokenCounts model_b;
};

struct GenderReportOptions {
  std::size_t k = 5;
  std::size_t n_samples = 500;
  std::size_t sample_cap = 500;
  std::uint64_t seed = 1;
  std::size_t jobs = 1;
};

// Both models are explained on the same (seeded, possibly subsampled)
// examples with the same per-example sampling streams.
GenderTokenReport gender_token_report(const TextCnn& model_a, const TextCnn& model_b,
                                      const Dataset& examples,
                                      const std::vector<std::string>& lexicon,
                                      const GenderReportOptions& options);

std::string format_gender_report(const GenderTokenReport& report, const std::string& name_a,
                                 const std::string& name_b);
// Plain-text horizontal bars of per-token counts.
std::string format_gender_bars(const GenderTokenReport& report, const std::string& name_a,
                               const std::string& name_b);

}  // namespace certfair

#endif  // CERTFAIR_EXPLAIN_HPP_
