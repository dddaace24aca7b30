// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/explain.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "certfair/parallel.hpp"

namespace certfair {

Explanation lime_explain(const ProbabilityFn& model, const Vocabulary& vocab,
                         std::span<const TokenId> token_ids, const LimeOptions& options,
                         std::mt19937_64& rng) {
  if (options.k == 0) throw std::invalid_argument("lime_explain: k must be positive");
  if (options.n_samples < 10 * options.k) {
    throw std::invalid_argument("lime_explain: n_samples must be at least 10 * k");
  }
  if (!(options.kernel_width > 0.0)) {
    throw std::invalid_argument("lime_explain: kernel width must be positive");
  }
  Explanation out;
  std::vector<TokenId> features;
  for (TokenId id : token_ids) {
    if (id != kPadId && std::find(features.begin(), features.end(), id) == features.end()) {
      features.push_back(id);
    }
  }
  const std::vector<double> base = model(token_ids);
  out.explained_class = options.target_class.value_or(
      base.size() == 2 ? (base[1] >= base[0] ? 1 : 0)
                       : static_cast<std::size_t>(std::max_element(base.begin(), base.end()) -
                                                  base.begin()));
  if (out.explained_class >= base.size()) {
    throw std::out_of_range("lime_explain: target class out of range");
  }
  out.unmasked_probability = base[out.explained_class];
  const std::size_t f = features.size();
  for (TokenId id : features) out.all_features.push_back(TokenFeature{id, vocab.token(id), 0.0});
  if (f == 0) {
    out.intercept = out.unmasked_probability;
    out.degenerate = true;
    return out;
  }

  const std::size_t n = options.n_samples;
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(n),
                                            static_cast<Eigen::Index>(f + 1));
  Eigen::VectorXd y(static_cast<Eigen::Index>(n)), w(static_cast<Eigen::Index>(n));
  std::vector<std::size_t> order(f);
  std::uniform_int_distribution<std::size_t> how_many(1, f);
  std::vector<TokenId> masked(token_ids.begin(), token_ids.end());
  for (std::size_t s = 0; s < n; ++s) {
    const auto row = static_cast<Eigen::Index>(s);
    std::size_t removed = 0;
    if (s > 0) {
      removed = how_many(rng);
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t j = 0; j < removed; ++j) x(row, static_cast<Eigen::Index>(order[j])) = 0.0;
    }
    for (std::size_t p = 0; p < masked.size(); ++p) {
      const auto it = std::find(features.begin(), features.end(), token_ids[p]);
      masked[p] = (it != features.end() &&
                   x(row, static_cast<Eigen::Index>(it - features.begin())) == 0.0)
                      ? kPadId
                      : token_ids[p];
    }
    y[row] = s == 0 ? out.unmasked_probability : model(masked)[out.explained_class];
    const double d = static_cast<double>(removed) / static_cast<double>(f);
    w[row] = std::exp(-(d * d) / (options.kernel_width * options.kernel_width));
  }

  if (y.maxCoeff() == y.minCoeff()) {
    out.intercept = y[0];
    out.degenerate = true;
    out.features.assign(out.all_features.begin(),
                        out.all_features.begin() + std::min(options.k, f));
    return out;
  }

  Eigen::MatrixXd gram = x.transpose() * w.asDiagonal() * x;
  for (std::size_t j = 0; j < f; ++j) {
    gram(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) += options.ridge;
  }
  const Eigen::VectorXd rhs = x.transpose() * w.asDiagonal() * y;
  const Eigen::VectorXd beta = gram.ldlt().solve(rhs);
  const Eigen::VectorXd fitted = x * beta;

  const double wsum = w.sum();
  const double ymean = w.dot(y) / wsum;
  double ss_res = 0.0, ss_tot = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    ss_res += w[i] * (y[i] - fitted[i]) * (y[i] - fitted[i]);
    ss_tot += w[i] * (y[i] - ymean) * (y[i] - ymean);
  }
  out.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  out.intercept = beta[static_cast<Eigen::Index>(f)];
  out.unmasked_residual = y[0] - fitted[0];
  for (std::size_t j = 0; j < f; ++j) out.all_features[j].weight = beta[static_cast<Eigen::Index>(j)];

  std::vector<std::size_t> rank(f);
  std::iota(rank.begin(), rank.end(), 0);
  std::stable_sort(rank.begin(), rank.end(), [&](std::size_t a, std::size_t b) {
    return std::fabs(out.all_features[a].weight) > std::fabs(out.all_features[b].weight);
  });
  for (std::size_t j = 0; j < std::min(options.k, f); ++j) {
    out.features.push_back(out.all_features[rank[j]]);
  }
  return out;
}

Explanation lime_explain(const TextCnn& model, const Example& example,
                         const LimeOptions& options, std::mt19937_64& rng) {
  const auto ids = model.encode(example);
  const std::span<const TokenId> kept(ids.data(), std::min(ids.size(), model.config().max_len));
  return lime_explain([&](std::span<const TokenId> x) { return model.probabilities(x); },
                      model.vocab(), kept, options, rng);
}

std::vector<std::size_t> disagreement_set(const TextCnn& model_a, const TextCnn& model_b,
                                          const Dataset& dataset,
                                          const DisagreementOptions& options) {
  if (!(model_a.vocab() == model_b.vocab())) {
    throw std::invalid_argument("disagreement_set: models must share a vocabulary");
  }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const auto ids = model_a.encode(dataset[i]);
    const std::size_t pa = model_a.predict(ids);
    const std::size_t pb = model_b.predict(ids);
    if (pa == dataset[i].label || pb != dataset[i].label) continue;
    if (options.a_predicted_class && pa != *options.a_predicted_class) continue;
    out.push_back(i);
  }
  return out;
}

GenderTokenReport gender_token_report(const TextCnn& model_a, const TextCnn& model_b,
                                      const Dataset& examples,
                                      const std::vector<std::string>& lexicon,
                                      const GenderReportOptions& options) {
  if (lexicon.empty()) throw std::invalid_argument("gender_token_report: lexicon is empty");
  GenderTokenReport report;
  report.k = options.k;
  report.lexicon = lexicon;
  std::sort(report.lexicon.begin(), report.lexicon.end());
  report.lexicon.erase(std::unique(report.lexicon.begin(), report.lexicon.end()),
                       report.lexicon.end());
  report.source_count = examples.size();

  std::vector<std::size_t> chosen(examples.size());
  std::iota(chosen.begin(), chosen.end(), 0);
  if (chosen.size() > options.sample_cap) {
    std::mt19937_64 rng(mix_seed(options.seed, 0));
    std::shuffle(chosen.begin(), chosen.end(), rng);
    chosen.resize(options.sample_cap);
    std::sort(chosen.begin(), chosen.end());
  }
  report.example_count = chosen.size();

  LimeOptions lo;
  lo.k = options.k;
  lo.n_samples = options.n_samples;
  const std::set<std::string> words(report.lexicon.begin(), report.lexicon.end());
  std::vector<std::vector<std::string>> hits_a(chosen.size()), hits_b(chosen.size());
  auto gender_hits = [&](const Explanation& e) {
    std::vector<std::string> hits;
    for (const auto& f : e.features) {
      if (f.weight != 0.0 && words.count(f.token) != 0) hits.push_back(f.token);
    }
    return hits;
  };
  parallel_for(chosen.size(), options.jobs, [&](std::size_t j) {
    const Example& ex = examples[chosen[j]];
    std::mt19937_64 rng_a(mix_seed(options.seed, chosen[j] + 1));
    std::mt19937_64 rng_b(mix_seed(options.seed, chosen[j] + 1));
    hits_a[j] = gender_hits(lime_explain(model_a, ex, lo, rng_a));
    hits_b[j] = gender_hits(lime_explain(model_b, ex, lo, rng_b));
  });
  auto tally = [](ModelTokenCounts& counts, const std::vector<std::vector<std::string>>& hits) {
    for (const auto& h : hits) {
      counts.gender_tokens += h.size();
      counts.examples_with_gender += h.empty() ? 0 : 1;
      for (const auto& t : h) ++counts.per_token[t];
    }
  };
  tally(report.model_a, hits_a);
  tally(report.model_b, hits_b);
  return report;
}

std::string format_gender_report(const GenderTokenReport& r, const std::string& name_a,
                                 const std::string& name_b) {
  std::ostringstream out;
  out << "# certfair-gender-tokens v1\n";
  out << "k = " << r.k << '\n';
  out << "examples = " << r.example_count << '\n';
  out << "source_examples = " << r.source_count << '\n';
  out << "lexicon_size = " << r.lexicon.size() << '\n';
  auto section = [&](const std::string& name, const ModelTokenCounts& c) {
    out << '[' << name << "]\n";
    out << "gender_tokens = " << c.gender_tokens << '\n';
    out << "examples_with_gender = " << c.examples_with_gender << '\n';
    for (const auto& [token, count] : c.per_token) out << "token." << token << " = " << count << '\n';
  };
  section(name_a, r.model_a);
  section(name_b, r.model_b);
  return out.str();
}

std::string format_gender_bars(const GenderTokenReport& r, const std::string& name_a,
                               const std::string& name_b) {
  std::set<std::string> tokens;
  std::size_t widest = std::max<std::size_t>({1, r.model_a.gender_tokens, r.model_b.gender_tokens});
  for (const auto& [t, c] : r.model_a.per_token) tokens.insert(t);
  for (const auto& [t, c] : r.model_b.per_token) tokens.insert(t);
  std::size_t pad = std::max(name_a.size(), name_b.size());
  for (const auto& t : tokens) pad = std::max(pad, t.size());
  const std::size_t width = 40;
  std::ostringstream out;
  out << "Gender tokens in top-" << r.k << " features over " << r.example_count << " examples\n";
  auto bar = [&](const std::string& label, std::size_t count) {
    const std::size_t len = (count * width + widest - 1) / widest;
    out << "  " << label << std::string(pad + 1 - label.size(), ' ') << '|'
        << std::string(len, '#') << ' ' << count << '\n';
  };
  for (const auto& t : tokens) {
    out << t << '\n';
    auto ca = r.model_a.per_token.find(t);
    auto cb = r.model_b.per_token.find(t);
    bar(name_a, ca == r.model_a.per_token.end() ? 0 : ca->second);
    bar(name_b, cb == r.model_b.per_token.end() ? 0 : cb->second);
  }
  out << "total\n";
  bar(name_a, r.model_a.gender_tokens);
  bar(name_b, r.model_b.gender_tokens);
  return out.str();
}

}  // namespace certfair
