// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef CERTFAIR_EMBEDDING_HPP_
#define CERTFAIR_EMBEDDING_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "certfair/data_io.hpp"
#include "certfair/tensor.hpp"

namespace certfair {

using TokenId = std::uint32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kUnkToken = "<unk>";

// Token <-> id map. Id 0 is padding and id 1 is the unknown token; every
// other id corresponds to exactly one token.
class Vocabulary {
 public:
  Vocabulary();
  explicit Vocabulary(const std::vector<std::string>& tokens);

  TokenId add(const std::string& token);
  std::optional<TokenId> find(std::string_view token) const;
  // Unknown tokens map to kUnkId.
  TokenId id(std::string_view token) const;
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  bool is_special(TokenId id) const { return id == kPadId || id == kUnkId; }

  std::vector<TokenId> encode(const std::vector<std::string>& tokens) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_;
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

// Tokens with frequency >= min_count, most frequent first, ties broken
// lexicographically.
Vocabulary build_vocab(const Dataset& corpus, std::size_t min_count);

struct EmbeddingMatrix {
  Tensor table;  // [vocab_size, dim]

  std::size_t rows() const { return table.dim(0); }
  std::size_t dim() const { return table.dim(1); }
  std::span<const double> row(TokenId id) const {
    return table.data().subspan(static_cast<std::size_t>(id) * dim(), dim());
  }
  std::span<double> row(TokenId id) {
    return table.data().subspan(static_cast<std::size_t>(id) * dim(), dim());
  }
};

struct EmbeddingLoad {
  EmbeddingMatrix embeddings;
  std::size_t found = 0;             // vocabulary rows read from the file
  std::size_t randomly_initialized = 0;
};

// Whitespace-separated "token v1 ... vd" lines. Vocabulary tokens missing
// from the file get uniform [-0.1, 0.1] rows drawn from `seed` (row order is
// vocabulary order); the padding row is zero.
EmbeddingLoad load_embeddings(const std::string& path, const Vocabulary& vocab,
                              std::size_t dim, std::uint64_t seed);

void write_embeddings(const EmbeddingMatrix& embeddings, const Vocabulary& vocab,
                      const std::string& path);

}  // namespace certfair

#endif  // CERTFAIR_EMBEDDING_HPP_
