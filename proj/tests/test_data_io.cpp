// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "certfair/data_io.hpp"
#include "certfair/embedding.hpp"
#include "certfair/lexicons.hpp"
#include "test_util.hpp"

namespace certfair {
namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
}

TEST(Tokenize, LowercasesAndStripsPunctuation) {
  EXPECT_EQ(tokenize("Hello, World!  It's\tFINE."),
            (std::vector<std::string>{"hello", "world", "its", "fine"}));
  EXPECT_EQ(tokenize("non-binary"), (std::vector<std::string>{"nonbinary"}));
  EXPECT_TRUE(tokenize(" \n ... ").empty());
  EXPECT_EQ(tokenize("caf\xc3\xa9 ok"), (std::vector<std::string>{"caf\xc3\xa9", "ok"}));
}

TEST(Corpus, ReadsRecordsAndSkipsBlankLines) {
  testing::TempDir dir("corpus");
  write_text(dir.file("c.jsonl"),
             "{\"text\": \"She LOVED it.\", \"label\": 1, \"groups\": {\"gender\": [\"female\"]}}\n"
             "\n"
             "{\"text\": \"meh\", \"label\": 0}\n");
  const Dataset d = read_corpus(dir.file("c.jsonl"));
  ASSERT_EQ(d.size(), 2u);
  EXPECT_EQ(d[0].tokens, (std::vector<std::string>{"she", "loved", "it"}));
  EXPECT_EQ(d[0].label, 1u);
  EXPECT_EQ(d[0].groups.at("gender"), std::vector<std::string>{"female"});
  EXPECT_TRUE(d[1].groups.empty());
  EXPECT_EQ(class_count(d), 2u);
  EXPECT_EQ(class_count({}), 0u);
}

TEST(Corpus, WriteReadRoundTrip) {
  testing::TempDir dir("corpus_rt");
  SynthConfig c = default_synth_config();
  c.n_examples = 50;
  const Dataset d = generate_synthetic(c);
  write_corpus(d, dir.file("a.jsonl"));
  EXPECT_EQ(read_corpus(dir.file("a.jsonl")), d);
}

TEST(Corpus, RejectsMalformedRecords) {
  testing::TempDir dir("corpus_bad");
  const std::vector<std::string> bad = {
      "not json",
      "[1, 2]",
      "{\"label\": 0}",
      "{\"text\": \"x\"}",
      "{\"text\": \"x\", \"label\": -1}",
      "{\"text\": \"x\", \"label\": 0.5}",
      "{\"text\": \"x\", \"label\": 0, \"groups\": []}",
      "{\"text\": \"x\", \"label\": 0, \"groups\": {\"gender\": \"male\"}}",
      "{\"text\": \"x\", \"label\": 0, \"groups\": {\"gender\": [3]}}",
      "{\"text\": \"x\", \"label\": 0, \"groups\": {\"age\": [\"old\"]}}",
      "{\"text\": \"x\", \"label\": 0, \"groups\": {\"gender\": [\"robot\"]}}",
  };
  for (const auto& line : bad) {
    write_text(dir.file("b.jsonl"), "{\"text\": \"ok\", \"label\": 0}\n" + line + "\n");
    try {
      read_corpus(dir.file("b.jsonl"));
      ADD_FAILURE() << "accepted: " << line;
    } catch (const CorpusError& e) {
      EXPECT_NE(std::string(e.what()).find(":2:"), std::string::npos) << e.what();
    }
  }
  EXPECT_THROW(read_corpus(dir.file("missing.jsonl")), CorpusError);
}

TEST(Corpus, SchemaCanBeDisabled) {
  testing::TempDir dir("corpus_noschema");
  write_text(dir.file("c.jsonl"), "{\"text\": \"x\", \"label\": 0, \"groups\": {\"age\": [\"old\"]}}\n");
  EXPECT_THROW(read_corpus(dir.file("c.jsonl")), CorpusError);
  const Dataset d = read_corpus(dir.file("c.jsonl"), std::nullopt);
  EXPECT_EQ(d[0].groups.at("age"), std::vector<std::string>{"old"});
}

TEST(Schema, DefaultAxes) {
  const GroupSchema& s = default_group_schema();
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.at("gender").size(), 4u);
  EXPECT_EQ(s.at("orientation").size(), 4u);
}

TEST(Synthetic, SeededAndReproducible) {
  SynthConfig c = default_synth_config();
  c.n_examples = 300;
  EXPECT_EQ(generate_synthetic(c), generate_synthetic(c));
  SynthConfig other = c;
  other.seed = 2;
  EXPECT_NE(generate_synthetic(c), generate_synthetic(other));
}

TEST(Synthetic, LabelsAreBalanced) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SynthConfig c = default_synth_config();
    c.seed = seed;
    ASSERT_GE(c.n_examples, 5000u);
    const Dataset d = generate_synthetic(c);
    std::size_t ones = 0;
    for (const auto& ex : d) ones += ex.label;
    const double frac = static_cast<double>(ones) / static_cast<double>(d.size());
    EXPECT_NEAR(frac, 0.5, 0.02) << "seed " << seed;
  }
}

TEST(Synthetic, GroupAnnotationsAreTruthful) {
  SynthConfig c = default_synth_config();
  c.n_examples = 1000;
  for (const auto& ex : generate_synthetic(c)) {
    for (const auto& [axis, groups] : ex.groups) {
      ASSERT_EQ(groups.size(), 1u);
      const auto& tokens = c.identity_tokens.at(axis).at(groups[0]);
      const bool present = std::any_of(ex.tokens.begin(), ex.tokens.end(), [&](const auto& t) {
        return std::find(tokens.begin(), tokens.end(), t) != tokens.end();
      });
      EXPECT_TRUE(present);
    }
  }
}

// Plug-in mutual information (nats) between the identity group (or "none")
// and the label.
double group_label_mi(const Dataset& d) {
  std::map<std::pair<std::string, std::size_t>, double> joint;
  std::map<std::string, double> px;
  std::map<std::size_t, double> py;
  for (const auto& ex : d) {
    std::string g = "none";
    for (const auto& [axis, names] : ex.groups) g = axis + "/" + names[0];
    joint[{g, ex.label}] += 1;
    px[g] += 1;
    py[ex.label] += 1;
  }
  const double n = static_cast<double>(d.size());
  double mi = 0.0;
  for (const auto& [key, count] : joint) {
    mi += count / n * std::log(count * n / (px[key.first] * py[key.second]));
  }
  return mi;
}

TEST(Synthetic, NoCorrelationGivesNearZeroInformation) {
  SynthConfig c = default_synth_config();
  c.n_examples = 20000;
  c.rho = 0.0;
  const Dataset d = generate_synthetic(c);
  // Under independence the plug-in estimate has mean (|X|-1)(|Y|-1)/(2n).
  std::size_t cells = 1;
  for (const auto& [axis, groups] : c.identity_tokens) cells += groups.size();
  const double bias = static_cast<double>(cells - 1) / (2.0 * static_cast<double>(d.size()));
  EXPECT_LT(group_label_mi(d), 5.0 * bias);
  c.rho = 0.9;
  EXPECT_GT(group_label_mi(generate_synthetic(c)), 100.0 * bias);
}

TEST(Synthetic, FullCorrelationMakesIdentityPredictive) {
  SynthConfig c = default_synth_config();
  c.n_examples = 3000;
  c.rho = 1.0;
  std::map<std::string, std::size_t> token_label;
  std::set<std::string> identity;
  for (const auto& [axis, groups] : c.identity_tokens) {
    for (const auto& [g, tokens] : groups) identity.insert(tokens.begin(), tokens.end());
  }
  std::size_t with_identity = 0;
  for (const auto& ex : generate_synthetic(c)) {
    for (const auto& t : ex.tokens) {
      if (identity.count(t) == 0) continue;
      ++with_identity;
      auto [it, fresh] = token_label.emplace(t, ex.label);
      ASSERT_EQ(it->second, ex.label) << t;
    }
  }
  EXPECT_GT(with_identity, 1000u);
}

TEST(Synthetic, ValidatesConfig) {
  SynthConfig c = default_synth_config();
  c.rho = 1.5;
  EXPECT_THROW(generate_synthetic(c), std::invalid_argument);
  c = default_synth_config();
  c.identity_tokens.clear();
  EXPECT_THROW(generate_synthetic(c), std::invalid_argument);
}

TEST(Synthetic, InventoryMatchesLexicons) {
  const SynthConfig c = default_synth_config();
  EXPECT_EQ(c.identity_tokens, default_identity_inventory());
  for (const auto& [axis, groups] : c.identity_tokens) {
    for (const auto& [g, tokens] : groups) {
      const auto& allowed = default_group_schema().at(axis);
      EXPECT_NE(std::find(allowed.begin(), allowed.end(), g), allowed.end()) << g;
      EXPECT_FALSE(tokens.empty());
    }
  }
}

TEST(Synthetic, EmbeddingsClusterSynonyms) {
  const SynthConfig c = default_synth_config();
  const auto v = generate_synthetic_embeddings(c, SynthEmbeddingConfig{});
  auto dist = [&](const std::string& a, const std::string& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < v.at(a).size(); ++i) {
      s += (v.at(a)[i] - v.at(b)[i]) * (v.at(a)[i] - v.at(b)[i]);
    }
    return std::sqrt(s);
  };
  const auto c0 = signal_clusters(c, 0);
  const auto c1 = signal_clusters(c, 1);
  ASSERT_GE(c0[0].size(), 2u);
  EXPECT_LT(dist(c0[0][0], c0[0][1]), dist(c0[0][0], c1[0][0]));
  EXPECT_EQ(v.at(c0[0][0]).size(), 16u);
}

TEST(Embeddings, LoadFillsMissingRowsFromSeed) {
  testing::TempDir dir("emb");
  write_text(dir.file("e.txt"), "a 1 2\nzzz 5 5\n\nb 3 4\na 9 9\n");
  Vocabulary v;
  v.add("a");
  v.add("b");
  v.add("c");
  const EmbeddingLoad l = load_embeddings(dir.file("e.txt"), v, 2, 7);
  EXPECT_EQ(l.found, 2u);
  EXPECT_EQ(l.randomly_initialized, 2u);  // <unk> and c
  const auto a = l.embeddings.row(v.id("a"));
  EXPECT_EQ(std::vector<double>(a.begin(), a.end()), (std::vector<double>{1, 2}));
  const auto pad = l.embeddings.row(kPadId);
  EXPECT_EQ(std::vector<double>(pad.begin(), pad.end()), (std::vector<double>{0, 0}));
  for (double x : l.embeddings.row(v.id("c"))) EXPECT_LE(std::fabs(x), 0.1);
  EXPECT_EQ(load_embeddings(dir.file("e.txt"), v, 2, 7).embeddings.table, l.embeddings.table);

  write_text(dir.file("bad.txt"), "a 1\n");
  EXPECT_THROW(load_embeddings(dir.file("bad.txt"), v, 2, 7), CorpusError);
  write_text(dir.file("bad2.txt"), "a 1 x\n");
  EXPECT_THROW(load_embeddings(dir.file("bad2.txt"), v, 2, 7), CorpusError);
  EXPECT_THROW(load_embeddings(dir.file("none.txt"), v, 2, 7), CorpusError);
  EXPECT_THROW(load_embeddings(dir.file("e.txt"), v, 0, 7), std::invalid_argument);
}

TEST(Embeddings, WriteThenLoadIsExact) {
  testing::TempDir dir("emb_rt");
  std::mt19937_64 rng(3);
  const Vocabulary v = testing::numbered_vocab(6);
  const EmbeddingMatrix e = testing::random_embeddings(v.size(), 5, rng);
  write_embeddings(e, v, dir.file("e.txt"));
  const EmbeddingLoad l = load_embeddings(dir.file("e.txt"), v, 5, 0);
  for (TokenId id = 2; id < v.size(); ++id) {
    const auto a = e.row(id), b = l.embeddings.row(id);
    EXPECT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
  }
  const auto vectors = generate_synthetic_embeddings(default_synth_config(), SynthEmbeddingConfig{});
  write_embedding_file(vectors, dir.file("s.txt"));
  const Vocabulary sv(std::vector<std::string>{"f0w0", "f0w1"});
  const EmbeddingLoad sl = load_embeddings(dir.file("s.txt"), sv, 16, 0);
  EXPECT_EQ(sl.found, 2u);
  const auto r = sl.embeddings.row(sv.id("f0w1"));
  EXPECT_EQ(std::vector<double>(r.begin(), r.end()), vectors.at("f0w1"));
}

TEST(WordList, CommentsAndBlankLines) {
  testing::TempDir dir("words");
  write_text(dir.file("w.txt"), "# header\nHe\n\n  she  \n# trailing\n");
  EXPECT_EQ(read_word_list(dir.file("w.txt")), (std::vector<std::string>{"he", "she"}));
  write_word_list({"x", "y"}, dir.file("o.txt"));
  EXPECT_EQ(read_word_list(dir.file("o.txt")), (std::vector<std::string>{"x", "y"}));
  EXPECT_THROW(read_word_list(dir.file("none.txt")), CorpusError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  EXPECT_EQ(format_double(0.1), "0.1");
  EXPECT_EQ(format_double(1.0), "1");
  EXPECT_EQ(format_double(-2.5e-10), "-2.5e-10");
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng);
    EXPECT_EQ(std::stod(format_double(x)), x);
  }
}

}  // namespace
}  // namespace certfair
