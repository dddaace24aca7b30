// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Corpus records, tokenization, JSONL corpus I/O and the seeded synthetic
// biased-corpus generator.

#ifndef CERTFAIR_DATA_IO_HPP_
#define CERTFAIR_DATA_IO_HPP_

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace certfair {

class CorpusError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// axis -> group names, e.g. {"gender": ["female"]}.
using GroupMap = std::map<std::string, std::vector<std::string>>;

struct Example {
  std::vector<std::string> tokens;
  std::size_t label = 0;
  GroupMap groups;

  friend bool operator==(const Example&, const Example&) = default;
};

using Dataset = std::vector<Example>;

// axis -> allowed group names.
using GroupSchema = std::map<std::string, std::vector<std::string>>;

// gender: male/female/transgender/non-binary;
// orientation: heterosexual/gay/lesbian/bisexual.
const GroupSchema& default_group_schema();

// ASCII lowercase, ASCII punctuation removed, split on ASCII whitespace.
std::vector<std::string> tokenize(std::string_view text);

// Line-delimited JSON records {"text", "label", "groups"}. Blank lines are
// skipped. Records are validated against `schema` when one is given.
Dataset read_corpus(const std::string& path,
                    const std::optional<GroupSchema>& schema = default_group_schema());
void write_corpus(const Dataset& dataset, const std::string& path);

std::size_t class_count(const Dataset& dataset);

struct SynthConfig {
  std::size_t n_examples = 5000;
  std::size_t num_classes = 2;
  std::vector<double> class_prior;  // empty means uniform
  // axis -> group -> identity tokens. Group i of an axis is associated with
  // class i mod num_classes.
  std::map<std::string, std::map<std::string, std::vector<std::string>>> identity_tokens;
  double rho = 0.9;
  double identity_rate = 0.6;
  std::size_t signal_clusters_per_class = 2;
  std::size_t filler_clusters = 4;
  std::size_t cluster_size = 8;
  std::size_t signal_tokens_per_example = 3;
  double signal_purity = 0.8;
  std::size_t min_filler = 4;
  std::size_t max_filler = 8;
  std::uint64_t seed = 1;
};

// Identity inventory built from the shipped lexicons.
SynthConfig default_synth_config();

// Task-signal words for class c are "c<c>s<cluster>w<member>"; filler words
// are "f<cluster>w<member>".
std::vector<std::vector<std::string>> signal_clusters(const SynthConfig& config,
                                                      std::size_t klass);
std::vector<std::vector<std::string>> filler_clusters(const SynthConfig& config);

Dataset generate_synthetic(const SynthConfig& config);

struct SynthEmbeddingConfig {
  std::size_t dim = 16;
  double cluster_noise = 0.25;
  double group_offset = 0.5;
  double identity_noise = 0.2;
  std::uint64_t seed = 1;
};

// Clustered vectors for every synthetic token: synonyms share a center,
// identity tokens share an axis center plus a per-group offset.
std::map<std::string, std::vector<double>> generate_synthetic_embeddings(
    const SynthConfig& corpus, const SynthEmbeddingConfig& config);

// "token v1 ... vd" lines, tokens in map order.
void write_embedding_file(const std::map<std::string, std::vector<double>>& vectors,
                          const std::string& path);

// Plain word-per-line list; '#' starts a comment line.
std::vector<std::string> read_word_list(const std::string& path);
void write_word_list(const std::vector<std::string>& words, const std::string& path);

std::string format_double(double value);

}  // namespace certfair

#endif  // CERTFAIR_DATA_IO_HPP_
