// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "certfair/explain.hpp"
#include "certfair/lexicons.hpp"
#include "test_util.hpp"

namespace certfair {
namespace {

// Class-1 probability is an additive function of which tokens are present.
ProbabilityFn additive_model(std::map<TokenId, double> effect, double base) {
  return [effect = std::move(effect), base](std::span<const TokenId> ids) {
    double p = base;
    std::set<TokenId> seen;
    for (TokenId id : ids) {
      if (id == kPadId || !seen.insert(id).second) continue;
      auto it = effect.find(id);
      if (it != effect.end()) p += it->second;
    }
    return std::vector<double>{1.0 - p, p};
  };
}

TEST(Lime, RecoversAdditiveEffects) {
  const Vocabulary v = testing::numbered_vocab(8);
  const std::map<TokenId, double> effect = {{2, 0.3}, {3, -0.2}, {4, 0.05}, {5, 0.0}, {6, 0.1}};
  const ProbabilityFn f = additive_model(effect, 0.3);
  const std::vector<TokenId> ids = {2, 3, 4, 5, 6, 3};
  LimeOptions o;
  o.k = 3;
  std::mt19937_64 rng(1);
  const Explanation e = lime_explain(f, v, ids, o, rng);
  EXPECT_EQ(e.explained_class, 1u);
  ASSERT_EQ(e.all_features.size(), 5u);
  for (const auto& feat : e.all_features) {
    EXPECT_NEAR(feat.weight, effect.at(feat.id), 1e-3) << feat.token;
  }
  EXPECT_NEAR(e.intercept, 0.3, 1e-3);
  EXPECT_GT(e.r_squared, 0.999);
  ASSERT_EQ(e.features.size(), 3u);
  EXPECT_EQ(e.features[0].token, "w0");
  EXPECT_EQ(e.features[1].token, "w1");
  EXPECT_EQ(e.features[2].token, "w4");
  EXPECT_FALSE(e.degenerate);
}

TEST(Lime, TargetClassFlipsSigns) {
  const Vocabulary v = testing::numbered_vocab(4);
  const ProbabilityFn f = additive_model({{2, 0.4}, {3, -0.1}}, 0.2);
  const std::vector<TokenId> ids = {2, 3};
  LimeOptions o;
  o.k = 1;
  o.target_class = 0;
  std::mt19937_64 rng(2);
  const Explanation e = lime_explain(f, v, ids, o, rng);
  EXPECT_EQ(e.explained_class, 0u);
  EXPECT_NEAR(e.all_features[0].weight, -0.4, 1e-3);
  EXPECT_NEAR(e.all_features[1].weight, 0.1, 1e-3);
  EXPECT_NEAR(e.unmasked_probability, 0.5, 1e-15);
}

TEST(Lime, ValidatesOptions) {
  const Vocabulary v = testing::numbered_vocab(4);
  const ProbabilityFn f = additive_model({}, 0.5);
  const std::vector<TokenId> ids = {2, 3};
  std::mt19937_64 rng(3);
  LimeOptions o;
  EXPECT_EQ(o.k, 5u);
  o.n_samples = 49;
  EXPECT_THROW(lime_explain(f, v, ids, o, rng), std::invalid_argument);
  o.n_samples = 50;
  EXPECT_NO_THROW(lime_explain(f, v, ids, o, rng));
  o.k = 0;
  EXPECT_THROW(lime_explain(f, v, ids, o, rng), std::invalid_argument);
  o = LimeOptions{};
  o.kernel_width = 0.0;
  EXPECT_THROW(lime_explain(f, v, ids, o, rng), std::invalid_argument);
  o = LimeOptions{};
  o.target_class = 2;
  EXPECT_THROW(lime_explain(f, v, ids, o, rng), std::out_of_range);
}

TEST(Lime, ConstantModelIsDegenerate) {
  const Vocabulary v = testing::numbered_vocab(4);
  const std::vector<TokenId> ids = {2, 3, 4};
  std::mt19937_64 rng(4);
  const Explanation e = lime_explain(additive_model({}, 0.7), v, ids, LimeOptions{}, rng);
  EXPECT_TRUE(e.degenerate);
  EXPECT_DOUBLE_EQ(e.intercept, 0.7);
  EXPECT_EQ(e.features.size(), 3u);
  for (const auto& f : e.features) EXPECT_EQ(f.weight, 0.0);
  const std::vector<TokenId> pads = {0, 0};
  const Explanation empty = lime_explain(additive_model({}, 0.7), v, pads, LimeOptions{}, rng);
  EXPECT_TRUE(empty.degenerate);
  EXPECT_TRUE(empty.features.empty());
}

TEST(Lime, SeededRunsAgree) {
  const TextCnn m = testing::tiny_model(5);
  const Example ex{{"w1", "w2", "w3", "w4", "w5"}, 1, {}};
  std::mt19937_64 a(11), b(11);
  const Explanation ea = lime_explain(m, ex, LimeOptions{}, a);
  const Explanation eb = lime_explain(m, ex, LimeOptions{}, b);
  ASSERT_EQ(ea.features.size(), eb.features.size());
  for (std::size_t i = 0; i < ea.features.size(); ++i) {
    EXPECT_EQ(ea.features[i].id, eb.features[i].id);
    EXPECT_EQ(ea.features[i].weight, eb.features[i].weight);
  }
  EXPECT_EQ(ea.explained_class, m.predict(m.encode(ex)));
}

TEST(LimeProperty, TopKIsSortedByMagnitude) {
  std::mt19937_64 rng(6);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const TextCnn m = testing::tiny_model(seed);
    Example ex;
    for (TokenId id : testing::random_ids(rng, m.vocab().size(), 7)) {
      ex.tokens.push_back(m.vocab().token(id));
    }
    LimeOptions o;
    o.n_samples = 200;
    const Explanation e = lime_explain(m, ex, o, rng);
    ASSERT_LE(e.features.size(), o.k);
    for (std::size_t i = 1; i < e.features.size(); ++i) {
      EXPECT_GE(std::fabs(e.features[i - 1].weight), std::fabs(e.features[i].weight));
    }
    // No token outside the top-k outweighs the last one kept.
    if (!e.features.empty()) {
      std::size_t bigger = 0;
      for (const auto& f : e.all_features) {
        bigger += std::fabs(f.weight) > std::fabs(e.features.back().weight);
      }
      EXPECT_LT(bigger, e.features.size());
    }
  }
}

// Two models over one vocabulary whose predictions are forced by the sign of
// the output bias.
TextCnn biased_copy(const TextCnn& base, std::size_t favoured) {
  TextCnn m = base;
  for (double& w : m.parameters().output_weight.data()) w = 0.0;
  m.parameters().output_bias[favoured] = 1.0;
  m.parameters().output_bias[1 - favoured] = -1.0;
  return m;
}

TEST(Disagreement, KeepsExamplesOnlyModelBGetsRight) {
  const TextCnn base = testing::tiny_model(7);
  const TextCnn always0 = biased_copy(base, 0), always1 = biased_copy(base, 1);
  Dataset d = {Example{{"w1"}, 1, {}}, Example{{"w2"}, 0, {}}, Example{{"w3"}, 1, {}}};
  EXPECT_EQ(disagreement_set(always0, always1, d), (std::vector<std::size_t>{0, 2}));
  EXPECT_EQ(disagreement_set(always1, always0, d), (std::vector<std::size_t>{1}));
  DisagreementOptions o;
  o.a_predicted_class = 1;
  EXPECT_TRUE(disagreement_set(always0, always1, d, o).empty());
  EXPECT_TRUE(disagreement_set(always0, always0, d).empty());
  const TextCnn other = testing::tiny_model(7, testing::TinySpec{.words = 11});
  EXPECT_THROW(disagreement_set(always0, other, d), std::invalid_argument);
}

// A model that only looks at one word: every other token is irrelevant.
TextCnn keyword_model(const Vocabulary& vocab, TokenId keyword, double sign) {
  EmbeddingMatrix e{Tensor(Shape{vocab.size(), 1})};
  e.row(keyword)[0] = 1.0;
  CnnConfig c;
  c.hidden_size = 1;
  c.kernel_size = 1;
  TextCnn m(vocab, e, c, 1);
  m.parameters().conv_weight[0] = 1.0;
  m.parameters().conv_bias[0] = 0.0;
  m.parameters().output_weight.at(1, 0) = sign * 3.0;
  m.parameters().output_weight.at(0, 0) = 0.0;
  m.parameters().output_bias[0] = 0.0;
  m.parameters().output_bias[1] = 0.0;
  return m;
}

TEST(GenderReport, CountsLexiconHitsPerModel) {
  Vocabulary v;
  for (const char* w : {"she", "he", "film", "great", "plot"}) v.add(w);
  const TextCnn a = keyword_model(v, v.id("she"), 1.0);
  const TextCnn b = keyword_model(v, v.id("film"), 1.0);
  Dataset d = {Example{{"she", "film", "great"}, 1, {}},
               Example{{"he", "plot", "film"}, 0, {}},
               Example{{"she", "he", "plot"}, 1, {}}};
  GenderReportOptions o;
  o.k = 1;
  o.n_samples = 100;
  const GenderTokenReport r = gender_token_report(a, b, d, {"she", "he", "she"}, o);
  EXPECT_EQ(r.lexicon, (std::vector<std::string>{"he", "she"}));
  EXPECT_EQ(r.example_count, 3u);
  EXPECT_EQ(r.model_a.gender_tokens, 2u);
  EXPECT_EQ(r.model_a.examples_with_gender, 2u);
  EXPECT_EQ(r.model_a.per_token.at("she"), 2u);
  // Model b never credits a gender token; zero-weight features are skipped.
  EXPECT_EQ(r.model_b.gender_tokens, 0u);
  EXPECT_THROW(gender_token_report(a, b, d, {}, o), std::invalid_argument);

  const std::string text = format_gender_report(r, "base", "ibp");
  EXPECT_EQ(text.rfind("# certfair-gender-tokens v1\n", 0), 0u);
  EXPECT_NE(text.find("[base]\ngender_tokens = 2\n"), std::string::npos);
  EXPECT_NE(text.find("token.she = 2\n"), std::string::npos);
  EXPECT_NE(text.find("[ibp]\ngender_tokens = 0\n"), std::string::npos);
  const std::string bars = format_gender_bars(r, "base", "ibp");
  EXPECT_NE(bars.find("|" + std::string(40, '#') + " 2"), std::string::npos);
  EXPECT_NE(bars.find("ibp  | 0"), std::string::npos);
}

TEST(GenderReport, SubsamplesDeterministically) {
  const TextCnn m = testing::tiny_model(8);
  std::mt19937_64 rng(8);
  Dataset d;
  for (int i = 0; i < 30; ++i) {
    Example e;
    for (TokenId id : testing::random_ids(rng, m.vocab().size(), 4)) {
      e.tokens.push_back(m.vocab().token(id));
    }
    d.push_back(e);
  }
  GenderReportOptions o;
  EXPECT_EQ(o.sample_cap, 500u);
  EXPECT_EQ(o.k, 5u);
  o.sample_cap = 10;
  o.n_samples = 60;
  const std::vector<std::string> lex = {"w1", "w2"};
  const GenderTokenReport r1 = gender_token_report(m, m, d, lex, o);
  o.jobs = 3;
  const GenderTokenReport r2 = gender_token_report(m, m, d, lex, o);
  EXPECT_EQ(r1.example_count, 10u);
  EXPECT_EQ(r1.source_count, 30u);
  EXPECT_EQ(format_gender_report(r1, "a", "b"), format_gender_report(r2, "a", "b"));
  // Identical models under identical seeds produce identical tallies.
  EXPECT_EQ(r1.model_a.per_token, r1.model_b.per_token);
}

TEST(GenderReport, DefaultLexiconCoversPronouns) {
  const auto& lex = default_gender_tokens();
  for (const char* w : {"he", "she", "him", "her"}) {
    EXPECT_NE(std::find(lex.begin(), lex.end(), w), lex.end()) << w;
  }
}

}  // namespace
}  // namespace certfair
