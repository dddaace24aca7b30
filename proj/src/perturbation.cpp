// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/perturbation.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>

namespace certfair {

std::vector<std::string> SubstitutionTable::candidates_of(const std::string& word) const {
  auto it = candidates.find(word);
  if (it == candidates.end()) return {word};
  return it->second;
}

void check_table_invariants(const SubstitutionTable& table) {
  for (const auto& [word, cands] : table.candidates) {
    if (std::find(cands.begin(), cands.end(), word) == cands.end()) {
      throw std::logic_error("substitution table: '" + word + "' missing from its own list");
    }
  }
  if (table.mode != TableMode::kClustered) return;
  for (const auto& [word, cands] : table.candidates) {
    for (const auto& other : cands) {
      auto it = table.candidates.find(other);
      if (it == table.candidates.end() || it->second != cands) {
        throw std::logic_error("clustered table: lists of '" + word + "' and '" + other +
                               "' differ");
      }
      if (table.cluster_id.at(word) != table.cluster_id.at(other)) {
        throw std::logic_error("clustered table: cluster ids of '" + word + "' and '" +
                               other + "' differ");
      }
    }
  }
}

SubstitutionTable compute_neighbor_table(const EmbeddingMatrix& embeddings,
                                         const Vocabulary& vocab, std::size_t top_k) {
  if (top_k < 1) throw std::invalid_argument("neighbor table: top_k must be >= 1");
  if (embeddings.rows() != vocab.size()) {
    throw std::invalid_argument("neighbor table: embedding rows do not match vocabulary");
  }
  std::vector<TokenId> words;
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (!vocab.is_special(id)) words.push_back(id);
  }
  std::vector<double> norms(vocab.size());
  for (TokenId id : words) norms[id] = l2_norm(embeddings.row(id));

  SubstitutionTable table;
  std::vector<std::pair<double, TokenId>> scored;
  for (TokenId a : words) {
    scored.clear();
    for (TokenId b : words) {
      if (b == a) continue;
      const double denom = norms[a] * norms[b];
      const double cosine = denom > 0.0 ? dot(embeddings.row(a), embeddings.row(b)) / denom : 0.0;
      scored.emplace_back(cosine, b);
    }
    const std::size_t keep = std::min(top_k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + keep, scored.end(),
                      [](const auto& x, const auto& y) {
                        return x.first > y.first || (x.first == y.first && x.second < y.second);
                      });
    std::vector<std::string> list{vocab.token(a)};
    for (std::size_t i = 0; i < keep; ++i) list.push_back(vocab.token(scored[i].second));
    table.candidates.emplace(vocab.token(a), std::move(list));
  }
  return table;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

SubstitutionTable read_neighbor_cache(const std::string& path, std::size_t top_k,
                                      const Vocabulary& vocab) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open neighbor table " + path);
  SubstitutionTable table;
  table.provenance.neighbor_file = path;
  std::string line;
  std::size_t number = 0;
  auto require_row = [&](const std::string& w) {
    if (!vocab.find(w)) {
      throw CorpusError(path + ":" + std::to_string(number) + ": word '" + w +
                        "' has no embedding row");
    }
  };
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty()) continue;
    const auto colon = line.find(':');
    if (colon == std::string::npos) {
      throw CorpusError(path + ":" + std::to_string(number) + ": expected 'word: cand,...'");
    }
    const std::string word = trim(line.substr(0, colon));
    require_row(word);
    std::vector<std::string> list{word};
    std::stringstream rest(line.substr(colon + 1));
    std::string cand;
    std::size_t kept = 0;
    while (std::getline(rest, cand, ',')) {
      cand = trim(cand);
      if (cand.empty() || cand == word) continue;
      if (kept == top_k) break;
      require_row(cand);
      if (std::find(list.begin(), list.end(), cand) != list.end()) continue;
      list.push_back(cand);
      ++kept;
    }
    table.candidates[word] = std::move(list);
  }
  return table;
}

}  // namespace

SubstitutionTable load_neighbor_table(const std::string& path, std::size_t top_k,
                                      const EmbeddingMatrix& embeddings,
                                      const Vocabulary& vocab) {
  if (top_k < 1) throw std::invalid_argument("neighbor table: top_k must be >= 1");
  if (!path.empty() && std::filesystem::exists(path)) {
    return read_neighbor_cache(path, top_k, vocab);
  }
  SubstitutionTable table = compute_neighbor_table(embeddings, vocab, top_k);
  if (!path.empty()) {
    write_neighbor_table(table, path);
    table.provenance.neighbor_file = path;
  }
  return table;
}

void write_neighbor_table(const SubstitutionTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write neighbor table " + path);
  for (const auto& [word, cands] : table.candidates) {
    out << word << ':';
    bool first = true;
    for (const auto& c : cands) {
      if (c == word) continue;
      out << (first ? " " : ",") << c;
      first = false;
    }
    out << '\n';
  }
}

namespace {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

SubstitutionTable rebuild_clusters(const std::vector<std::string>& words, UnionFind& uf,
                                   TableProvenance provenance) {
  std::map<std::size_t, std::vector<std::string>> members;
  for (std::size_t i = 0; i < words.size(); ++i) members[uf.find(i)].push_back(words[i]);
  SubstitutionTable out;
  out.mode = TableMode::kClustered;
  out.provenance = std::move(provenance);
  std::size_t next = 0;
  for (auto& [root, list] : members) {
    std::sort(list.begin(), list.end());
    for (const auto& w : list) {
      out.candidates[w] = list;
      out.cluster_id[w] = next;
    }
    ++next;
  }
  return out;
}

}  // namespace

SubstitutionTable to_clusters(const SubstitutionTable& table) {
  std::vector<std::string> words;
  std::map<std::string, std::size_t> index;
  for (const auto& [word, cands] : table.candidates) {
    index.emplace(word, words.size());
    words.push_back(word);
  }
  UnionFind uf(words.size());
  for (const auto& [word, cands] : table.candidates) {
    for (const auto& other : cands) {
      if (other == word) continue;
      auto it = table.candidates.find(other);
      if (it == table.candidates.end()) continue;
      if (std::find(it->second.begin(), it->second.end(), word) != it->second.end()) {
        uf.unite(index.at(word), index.at(other));
      }
    }
  }
  return rebuild_clusters(words, uf, table.provenance);
}

SubstitutionTable augment_gender_pairs(const SubstitutionTable& table,
                                       const GenderPairList& pairs) {
  SubstitutionTable out = table;
  std::size_t skipped = 0;
  if (table.mode == TableMode::kRawNeighbors) {
    for (const auto& [a, b] : pairs) {
      auto ia = out.candidates.find(a);
      auto ib = out.candidates.find(b);
      if (a == b || ia == out.candidates.end() || ib == out.candidates.end()) {
        ++skipped;
        continue;
      }
      if (std::find(ia->second.begin(), ia->second.end(), b) == ia->second.end()) {
        ia->second.push_back(b);
      }
      if (std::find(ib->second.begin(), ib->second.end(), a) == ib->second.end()) {
        ib->second.push_back(a);
      }
    }
  } else {
    std::vector<std::string> words;
    std::map<std::string, std::size_t> index;
    for (const auto& [word, cands] : table.candidates) {
      index.emplace(word, words.size());
      words.push_back(word);
    }
    UnionFind uf(words.size());
    for (const auto& [word, cands] : table.candidates) {
      for (const auto& other : cands) uf.unite(index.at(word), index.at(other));
    }
    for (const auto& [a, b] : pairs) {
      auto ia = index.find(a);
      auto ib = index.find(b);
      if (a == b || ia == index.end() || ib == index.end()) {
        ++skipped;
        continue;
      }
      uf.unite(ia->second, ib->second);
    }
    out = rebuild_clusters(words, uf, table.provenance);
  }
  out.provenance.gender_augmented = true;
  out.provenance.skipped_gender_pairs = table.provenance.skipped_gender_pairs + skipped;
  return out;
}

GenderPairList read_gender_pairs(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot open gender pair file " + path);
  GenderPairList pairs;
  std::set<WordPair> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (trim(line).empty() || line.starts_with("#")) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw CorpusError(path + ":" + std::to_string(number) + ": expected 'word_a<TAB>word_b'");
    }
    WordPair pair{trim(line.substr(0, tab)), trim(line.substr(tab + 1))};
    if (pair.first.empty() || pair.second.empty()) {
      throw CorpusError(path + ":" + std::to_string(number) + ": empty word in pair");
    }
    if (seen.insert(pair).second) pairs.push_back(std::move(pair));
  }
  return pairs;
}

ResolvedTable::ResolvedTable(const SubstitutionTable& table, const Vocabulary& vocab)
    : lists_(vocab.size()), mode_(table.mode) {
  for (TokenId id = 0; id < vocab.size(); ++id) {
    if (vocab.is_special(id)) {
      lists_[id] = {id};
      continue;
    }
    for (const auto& word : table.candidates_of(vocab.token(id))) {
      if (auto cand = vocab.find(word)) {
        if (std::find(lists_[id].begin(), lists_[id].end(), *cand) == lists_[id].end()) {
          lists_[id].push_back(*cand);
        }
      }
    }
  }
}

ResolvedTable ResolvedTable::empty(const Vocabulary& vocab) {
  ResolvedTable t;
  // Singleton lists satisfy the clustered-mode invariants.
  t.mode_ = TableMode::kClustered;
  t.lists_.resize(vocab.size());
  for (TokenId id = 0; id < vocab.size(); ++id) t.lists_[id] = {id};
  return t;
}

CandidateLists ResolvedTable::candidates_for(std::span<const TokenId> token_ids) const {
  CandidateLists out;
  out.reserve(token_ids.size());
  for (TokenId id : token_ids) out.push_back(lists_.at(id));
  return out;
}

std::size_t perturbation_count(const CandidateLists& options) {
  std::size_t total = 1;
  for (const auto& list : options) {
    const std::size_t n = std::max<std::size_t>(list.size(), 1);
    if (total > std::numeric_limits<std::size_t>::max() / n) {
      return std::numeric_limits<std::size_t>::max();
    }
    total *= n;
  }
  return total;
}

std::vector<std::vector<TokenId>> enumerate_perturbations(std::span<const TokenId> token_ids,
                                                          const CandidateLists& options,
                                                          std::size_t cap) {
  if (cap < 1) throw std::invalid_argument("enumerate_perturbations: cap must be >= 1");
  if (!options.empty() && options.size() != token_ids.size()) {
    throw ShapeError("enumerate_perturbations: option lists do not match positions");
  }
  CandidateLists lists(token_ids.size());
  for (std::size_t p = 0; p < token_ids.size(); ++p) {
    if (!options.empty()) lists[p] = options[p];
    if (std::find(lists[p].begin(), lists[p].end(), token_ids[p]) == lists[p].end()) {
      lists[p].insert(lists[p].begin(), token_ids[p]);
    }
  }
  const std::size_t total = perturbation_count(lists);
  if (total > cap) {
    throw EnumerationError("perturbation space of " +
                           (total == std::numeric_limits<std::size_t>::max()
                                ? std::string("overflowing size")
                                : std::to_string(total)) +
                           " exceeds cap " + std::to_string(cap));
  }
  std::vector<std::vector<TokenId>> out;
  out.reserve(total);
  std::vector<std::size_t> odometer(lists.size(), 0);
  for (std::size_t n = 0; n < total; ++n) {
    std::vector<TokenId> seq(lists.size());
    for (std::size_t p = 0; p < lists.size(); ++p) seq[p] = lists[p][odometer[p]];
    out.push_back(std::move(seq));
    for (std::size_t p = lists.size(); p-- > 0;) {
      if (++odometer[p] < lists[p].size()) break;
      odometer[p] = 0;
    }
  }
  return out;
}

std::vector<TokenId> sample_perturbation(std::span<const TokenId> token_ids,
                                         const CandidateLists& options, std::mt19937_64& rng) {
  std::vector<TokenId> out(token_ids.begin(), token_ids.end());
  for (std::size_t p = 0; p < out.size() && p < options.size(); ++p) {
    const auto& list = options[p];
    if (list.size() <= 1) {
      if (list.size() == 1) out[p] = list[0];
      continue;
    }
    std::uniform_int_distribution<std::size_t> pick(0, list.size() - 1);
    out[p] = list[pick(rng)];
  }
  return out;
}

}  // namespace certfair
