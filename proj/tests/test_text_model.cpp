// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "certfair/text_model.hpp"
#include "test_util.hpp"

namespace certfair {
namespace {

TEST(TextCnn, ParameterShapes) {
  const TextCnn m = testing::tiny_model(1);
  EXPECT_EQ(m.parameters().conv_weight.shape(), (Shape{8, 3, 4}));
  EXPECT_EQ(m.parameters().conv_bias.shape(), Shape{8});
  EXPECT_EQ(m.parameters().output_weight.shape(), (Shape{2, 8}));
  EXPECT_EQ(m.parameters().output_bias.shape(), Shape{2});
  EXPECT_EQ(m.parameters().count(), 8u * 3 * 4 + 8 + 16 + 2);
}

TEST(TextCnn, InitIsSeeded) {
  std::mt19937_64 rng(1);
  Vocabulary v = testing::numbered_vocab(5);
  EmbeddingMatrix e = testing::random_embeddings(v.size(), 3, rng);
  const TextCnn a(v, e, CnnConfig{}, 4), b(v, e, CnnConfig{}, 4), c(v, e, CnnConfig{}, 5);
  EXPECT_EQ(a.parameters(), b.parameters());
  EXPECT_FALSE(a.parameters() == c.parameters());
}

TEST(TextCnn, ValidatesConfiguration) {
  std::mt19937_64 rng(1);
  Vocabulary v = testing::numbered_vocab(5);
  EmbeddingMatrix e = testing::random_embeddings(v.size(), 3, rng);
  CnnConfig c;
  c.num_classes = 1;
  EXPECT_THROW(TextCnn(v, e, c, 1), std::invalid_argument);
  c = CnnConfig{};
  c.max_len = 2;
  EXPECT_THROW(TextCnn(v, e, c, 1), std::invalid_argument);
  EXPECT_THROW(TextCnn(testing::numbered_vocab(6), e, CnnConfig{}, 1), ShapeError);
}

TEST(TextCnn, PrepareTruncatesStripsAndPads) {
  testing::TinySpec spec;
  spec.max_len = 5;
  const TextCnn m = testing::tiny_model(2, spec);
  EXPECT_EQ(m.prepare(std::vector<TokenId>{2, 3, 4, 5, 6, 7, 8}),
            (std::vector<TokenId>{2, 3, 4, 5, 6}));
  EXPECT_EQ(m.prepare(std::vector<TokenId>{2, 3, 4, 5, 0}), (std::vector<TokenId>{2, 3, 4, 5}));
  EXPECT_EQ(m.prepare(std::vector<TokenId>{2}), (std::vector<TokenId>{2, 0, 0}));
  EXPECT_EQ(m.prepare(std::vector<TokenId>{}), (std::vector<TokenId>{0, 0, 0}));
  EXPECT_THROW(m.prepare(std::vector<TokenId>{99}), std::out_of_range);
}

TEST(TextCnn, PaddingHasNoCandidates) {
  const TextCnn m = testing::tiny_model(2);
  const CandidateLists c = m.prepare_candidates(std::vector<TokenId>{2}, {{2, 3}});
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c[0], (std::vector<TokenId>{2, 3}));
  EXPECT_TRUE(c[1].empty());
  EXPECT_TRUE(c[2].empty());
}

TEST(TextCnn, TrailingPaddingDoesNotChangeLogits) {
  const TextCnn m = testing::tiny_model(3);
  const std::vector<TokenId> a = {2, 4, 6, 8};
  const std::vector<TokenId> b = {2, 4, 6, 8, 0, 0};
  EXPECT_EQ(m.forward(a), m.forward(b));
}

TEST(TextCnn, ForwardMatchesManualComputation) {
  const TextCnn m = testing::tiny_model(4);
  const std::vector<TokenId> ids = {3, 5, 7, 9};
  const CnnParameters& p = m.parameters();
  const std::size_t h = 8, k = 3, d = 4;
  std::vector<double> pooled(h, -1e300);
  for (std::size_t t = 0; t + k <= ids.size(); ++t) {
    for (std::size_t j = 0; j < h; ++j) {
      double s = p.conv_bias[j];
      for (std::size_t o = 0; o < k; ++o) {
        for (std::size_t c = 0; c < d; ++c) {
          s += p.conv_weight[(j * k + o) * d + c] * m.embeddings().row(ids[t + o])[c];
        }
      }
      pooled[j] = std::max(pooled[j], std::max(0.0, s));
    }
  }
  const Tensor z = m.forward(ids);
  for (std::size_t c = 0; c < 2; ++c) {
    double s = p.output_bias[c];
    for (std::size_t j = 0; j < h; ++j) s += p.output_weight.at(c, j) * pooled[j];
    EXPECT_NEAR(z[c], s, 1e-12);
  }
  const auto probs = m.probabilities(ids);
  EXPECT_NEAR(probs[0] + probs[1], 1.0, 1e-15);
}

TEST(TextCnn, BinaryTiesPredictPositive) {
  EXPECT_EQ(predict_from_logits(std::vector<double>{1.0, 1.0}), 1u);
  EXPECT_EQ(predict_from_logits(std::vector<double>{1.0, 0.5}), 0u);
  EXPECT_EQ(predict_from_logits(std::vector<double>{2.0, 2.0, 1.0}), 0u);
  EXPECT_EQ(predict_from_logits(std::vector<double>{0.0, 1.0, 3.0}), 2u);
}

TEST(TextCnn, DropoutMaskScalesPooledFeatures) {
  const TextCnn m = testing::tiny_model(5);
  const std::vector<TokenId> ids = m.prepare(std::vector<TokenId>{2, 3, 4, 5});
  Graph g;
  const ParameterNodes p = m.add_parameters(g);
  const Tensor zero_mask(Shape{8}, 0.0);
  m.build_logits(g, p, g.constant(m.embed(ids)), &zero_mask);
  Bindings b;
  m.bind_parameters(b);
  const Tensor& z = g.evaluate(b);
  EXPECT_EQ(z, m.parameters().output_bias);
}

// Sensitivity of the predicted logit to the embedding at each position by
// central differences.
std::vector<double> numeric_saliency(const TextCnn& m, const Example& ex) {
  const auto ids = m.prepare(m.encode(ex));
  const Tensor x = m.embed(ids);
  auto logit = [&](const Tensor& input, std::size_t cls) {
    Graph g;
    const ParameterNodes p = m.add_parameters(g);
    m.build_logits(g, p, g.constant(input), nullptr);
    Bindings b;
    m.bind_parameters(b);
    return g.evaluate(b)[cls];
  };
  const std::size_t cls = m.predict(m.encode(ex));
  const std::size_t d = m.embeddings().dim();
  std::vector<double> out(ex.tokens.size(), 0.0);
  for (std::size_t p = 0; p < ex.tokens.size(); ++p) {
    double sq = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      Tensor up = x, down = x;
      up[p * d + c] += 1e-4;
      down[p * d + c] -= 1e-4;
      const double diff = (logit(up, cls) - logit(down, cls)) / 2e-4;
      sq += diff * diff;
    }
    out[p] = std::sqrt(sq);
  }
  return out;
}

TEST(Saliency, MatchesFiniteDifferences) {
  int compared = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TextCnn m = testing::tiny_model(seed);
    std::mt19937_64 rng(seed);
    const auto ids = testing::random_ids(rng, m.vocab().size(), 6);
    Example ex;
    for (TokenId id : ids) ex.tokens.push_back(m.vocab().token(id));
    const auto analytic = m.saliency(ex);
    const auto numeric = numeric_saliency(m, ex);
    ASSERT_EQ(analytic.size(), ids.size());
    for (std::size_t p = 0; p < ids.size(); ++p) {
      if (numeric[p] < 1e-6 && analytic[p] < 1e-6) continue;
      EXPECT_LE(std::fabs(analytic[p] - numeric[p]), 0.1 * numeric[p])
          << "seed " << seed << " position " << p;
      ++compared;
    }
  }
  EXPECT_GT(compared, 20);
}

TEST(Saliency, UnknownTokensScoreLikeAnyOther) {
  const TextCnn m = testing::tiny_model(9);
  Example ex{{"w1", "never-seen", "w2", "w3"}, 0, {}};
  const auto s = m.saliency(ex);
  EXPECT_EQ(s.size(), 4u);
  for (double v : s) EXPECT_GE(v, 0.0);
}

TEST(Checkpoint, RoundTripIsExact) {
  testing::TempDir dir("ckpt");
  testing::TinySpec spec;
  spec.classes = 3;
  const TextCnn m = testing::tiny_model(6, spec);
  save_checkpoint(m, dir.file("model.json"));
  const TextCnn back = load_checkpoint(dir.file("model.json"));
  EXPECT_EQ(back.vocab(), m.vocab());
  EXPECT_EQ(back.embeddings().table, m.embeddings().table);
  EXPECT_EQ(back.parameters(), m.parameters());
  EXPECT_EQ(back.config().num_classes, 3u);
  // Saving again yields identical bytes.
  save_checkpoint(back, dir.file("again.json"));
  std::ifstream a(dir.file("model.json")), b(dir.file("again.json"));
  EXPECT_EQ(std::string(std::istreambuf_iterator<char>(a), {}),
            std::string(std::istreambuf_iterator<char>(b), {}));
}

TEST(Checkpoint, RejectsForeignFiles) {
  testing::TempDir dir("ckpt_bad");
  std::ofstream(dir.file("x.json")) << "{\"format\": \"other\"}";
  EXPECT_THROW(load_checkpoint(dir.file("x.json")), std::runtime_error);
  std::ofstream(dir.file("y.json")) << "not json";
  EXPECT_THROW(load_checkpoint(dir.file("y.json")), std::runtime_error);
  EXPECT_THROW(load_checkpoint(dir.file("missing.json")), std::runtime_error);
}

TEST(Vocab, MinCountFilters) {
  Dataset d = {Example{{"a", "a", "b"}, 0, {}}};
  const Vocabulary v = build_vocab(d, 2);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "a"}));
  EXPECT_EQ(v.id("b"), kUnkId);
  EXPECT_THROW(build_vocab({}, 1), std::invalid_argument);
}

TEST(Vocab, FrequencyThenLexicalOrder) {
  Dataset d = {Example{{"c", "b", "b", "a", "c", "d"}, 0, {}}};
  const Vocabulary v = build_vocab(d, 1);
  EXPECT_EQ(v.tokens(), (std::vector<std::string>{"<pad>", "<unk>", "b", "c", "a", "d"}));
}

}  // namespace
}  // namespace certfair
