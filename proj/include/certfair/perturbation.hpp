// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Word-substitution sets. Two modes are kept apart:
//   raw neighbors  - each word's own nearest-neighbor list (used for IBP);
//   clustered      - candidate lists are whole clusters, so every member of a
//                    cluster has the same list (used for randomized smoothing).

#ifndef CERTFAIR_PERTURBATION_HPP_
#define CERTFAIR_PERTURBATION_HPP_

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "certfair/embedding.hpp"
#include "certfair/interval.hpp"
#include "certfair/lexicons.hpp"

namespace certfair {

class EnumerationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TableMode { kRawNeighbors, kClustered };

struct TableProvenance {
  std::string neighbor_file;
  bool gender_augmented = false;
  std::size_t skipped_gender_pairs = 0;
};

struct SubstitutionTable {
  TableMode mode = TableMode::kRawNeighbors;
  // word -> candidates, the word itself included. Raw mode lists the word
  // first and then neighbors by decreasing similarity; clustered mode lists
  // the sorted cluster members.
  std::map<std::string, std::vector<std::string>> candidates;
  std::map<std::string, std::size_t> cluster_id;  // clustered mode only
  TableProvenance provenance;

  // Candidates of `word`, or just {word} when the word has no entry.
  std::vector<std::string> candidates_of(const std::string& word) const;
};

using GenderPairList = std::vector<WordPair>;

// Throws std::logic_error naming the first violated invariant.
void check_table_invariants(const SubstitutionTable& table);

// Top-k cosine neighbors over the non-special vocabulary rows; ties are broken
// by lower token id.
SubstitutionTable compute_neighbor_table(const EmbeddingMatrix& embeddings,
                                         const Vocabulary& vocab, std::size_t top_k);

// Reads the "word: cand1,cand2,..." cache at `path` when it exists (keeping
// the first top_k candidates), otherwise computes the table and writes the
// cache there. An empty path always computes.
SubstitutionTable load_neighbor_table(const std::string& path, std::size_t top_k,
                                      const EmbeddingMatrix& embeddings,
                                      const Vocabulary& vocab);
void write_neighbor_table(const SubstitutionTable& table, const std::string& path);

// Connected components of the mutual-neighbor graph become clusters.
SubstitutionTable to_clusters(const SubstitutionTable& table);

// Adds both directions of every pair (merging clusters in clustered mode).
// Pairs with a word missing from the table are skipped and counted in
// provenance.skipped_gender_pairs.
SubstitutionTable augment_gender_pairs(const SubstitutionTable& table,
                                       const GenderPairList& pairs);

// Tab-separated pairs, one per line.
GenderPairList read_gender_pairs(const std::string& path);

// Candidate ids per token id, resolved against one vocabulary. Candidates
// outside the vocabulary are dropped; special ids map to themselves.
class ResolvedTable {
 public:
  ResolvedTable() = default;
  ResolvedTable(const SubstitutionTable& table, const Vocabulary& vocab);
  // Identity table: every token substitutes only for itself.
  static ResolvedTable empty(const Vocabulary& vocab);

  const std::vector<TokenId>& operator[](TokenId id) const { return lists_.at(id); }
  std::size_t size() const { return lists_.size(); }
  TableMode mode() const { return mode_; }

  CandidateLists candidates_for(std::span<const TokenId> token_ids) const;

 private:
  std::vector<std::vector<TokenId>> lists_;
  TableMode mode_ = TableMode::kRawNeighbors;
};

// Product of per-position option counts, saturating at SIZE_MAX.
std::size_t perturbation_count(const CandidateLists& options);

// Full cross-product (x itself included) when it has at most `cap` members;
// otherwise throws EnumerationError. Positions without options keep their
// token.
std::vector<std::vector<TokenId>> enumerate_perturbations(std::span<const TokenId> token_ids,
                                                          const CandidateLists& options,
                                                          std::size_t cap);

// Independent uniform draw per position from its option list.
std::vector<TokenId> sample_perturbation(std::span<const TokenId> token_ids,
                                         const CandidateLists& options,
                                         std::mt19937_64& rng);

}  // namespace certfair

#endif  // CERTFAIR_PERTURBATION_HPP_
