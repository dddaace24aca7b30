// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/embedding.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

namespace certfair {

Vocabulary::Vocabulary() {
  add(std::string(kPadToken));
  add(std::string(kUnkToken));
}

Vocabulary::Vocabulary(const std::vector<std::string>& tokens) : Vocabulary() {
  for (const auto& t : tokens) {
    if (t == kPadToken || t == kUnkToken) continue;
    add(t);
  }
}

TokenId Vocabulary::add(const std::string& token) {
  auto it = index_.find(token);
  if (it != index_.end()) return it->second;
  const auto id = static_cast<TokenId>(tokens_.size());
  tokens_.push_back(token);
  index_.emplace(token, id);
  return id;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocabulary::id(std::string_view token) const { return find(token).value_or(kUnkId); }

std::vector<TokenId> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(id(t));
  return ids;
}

Vocabulary build_vocab(const Dataset& corpus, std::size_t min_count) {
  if (corpus.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  if (min_count < 1) throw std::invalid_argument("build_vocab: min_count must be >= 1");
  std::map<std::string, std::size_t> counts;
  for (const Example& ex : corpus) {
    for (const auto& t : ex.tokens) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [token, count] : counts) {
    if (count >= min_count && token != kPadToken && token != kUnkToken) {
      kept.emplace_back(token, count);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (const auto& [token, count] : kept) vocab.add(token);
  return vocab;
}

EmbeddingLoad load_embeddings(const std::string& path, const Vocabulary& vocab,
                              std::size_t dim, std::uint64_t seed) {
  if (dim == 0) throw std::invalid_argument("load_embeddings: dim must be positive");
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open embedding file " + path);

  EmbeddingLoad result;
  result.embeddings.table = Tensor(Shape{vocab.size(), dim});
  std::vector<bool> have(vocab.size(), false);
  have[kPadId] = true;

  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    std::istringstream fields(line);
    std::string token;
    if (!(fields >> token)) continue;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      double v = 0.0;
      auto [end, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc() || end != field.data() + field.size()) {
        throw CorpusError(path + ":" + std::to_string(number) + ": malformed value '" +
                          field + "'");
      }
      values.push_back(v);
    }
    if (values.size() != dim) {
      throw CorpusError(path + ":" + std::to_string(number) + ": expected " +
                        std::to_string(dim) + " values for '" + token + "', got " +
                        std::to_string(values.size()));
    }
    auto id = vocab.find(token);
    if (!id || *id == kPadId || have[*id]) continue;
    std::copy(values.begin(), values.end(), result.embeddings.row(*id).begin());
    have[*id] = true;
    ++result.found;
  }

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> init(-0.1, 0.1);
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (have[id]) continue;
    for (double& v : result.embeddings.row(id)) v = init(rng);
    ++result.randomly_initialized;
  }
  return result;
}

void write_embeddings(const EmbeddingMatrix& embeddings, const Vocabulary& vocab,
                      const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write embedding file " + path);
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (vocab.is_special(id)) continue;
    out << vocab.token(id);
    for (double v : embeddings.row(id)) out << ' ' << format_double(v);
    out << '\n';
  }
}

}  // namespace certfair
