// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "certfair/data_io.hpp"
#include "certfair/lexicons.hpp"

namespace certfair {

SynthConfig default_synth_config() {
  SynthConfig config;
  config.identity_tokens = default_identity_inventory();
  return config;
}

std::vector<std::vector<std::string>> signal_clusters(const SynthConfig& config,
                                                      std::size_t klass) {
  std::vector<std::vector<std::string>> clusters(config.signal_clusters_per_class);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (std::size_t m = 0; m < config.cluster_size; ++m) {
      clusters[c].push_back("c" + std::to_string(klass) + "s" + std::to_string(c) + "w" +
                            std::to_string(m));
    }
  }
  return clusters;
}

std::vector<std::vector<std::string>> filler_clusters(const SynthConfig& config) {
  std::vector<std::vector<std::string>> clusters(config.filler_clusters);
  for (std::size_t c = 0; c < clusters.size(); ++c) {
    for (std::size_t m = 0; m < config.cluster_size; ++m) {
      clusters[c].push_back("f" + std::to_string(c) + "w" + std::to_string(m));
    }
  }
  return clusters;
}

namespace {

void validate(const SynthConfig& config) {
  if (config.num_classes < 2) throw std::invalid_argument("synthetic corpus needs >= 2 classes");
  if (!(config.rho >= 0.0 && config.rho <= 1.0)) {
    throw std::invalid_argument("rho must lie in [0, 1]");
  }
  if (!(config.identity_rate >= 0.0 && config.identity_rate <= 1.0)) {
    throw std::invalid_argument("identity_rate must lie in [0, 1]");
  }
  if (!(config.signal_purity >= 0.0 && config.signal_purity <= 1.0)) {
    throw std::invalid_argument("signal_purity must lie in [0, 1]");
  }
  if (config.cluster_size == 0 || config.signal_clusters_per_class == 0) {
    throw std::invalid_argument("signal inventory must be non-empty");
  }
  if (config.min_filler > config.max_filler) {
    throw std::invalid_argument("min_filler exceeds max_filler");
  }
  if (config.max_filler > 0 && config.filler_clusters == 0) {
    throw std::invalid_argument("filler tokens requested without filler clusters");
  }
  if (!config.class_prior.empty() && config.class_prior.size() != config.num_classes) {
    throw std::invalid_argument("class_prior length must equal num_classes");
  }
  if (config.identity_tokens.empty()) {
    throw std::invalid_argument("identity token inventory must be non-empty");
  }
  for (const auto& [axis, groups] : config.identity_tokens) {
    if (groups.empty()) throw std::invalid_argument("axis '" + axis + "' has no groups");
    for (const auto& [group, tokens] : groups) {
      if (tokens.empty()) throw std::invalid_argument("group '" + group + "' has no tokens");
    }
  }
}

template <typename T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> dist(0, items.size() - 1);
  return items[dist(rng)];
}

}  // namespace

Dataset generate_synthetic(const SynthConfig& config) {
  validate(config);
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  std::vector<double> prior = config.class_prior;
  if (prior.empty()) prior.assign(config.num_classes, 1.0);
  std::discrete_distribution<std::size_t> label_dist(prior.begin(), prior.end());

  std::vector<std::vector<std::string>> signal_words(config.num_classes);
  for (std::size_t c = 0; c < config.num_classes; ++c) {
    for (auto& cluster : signal_clusters(config, c)) {
      signal_words[c].insert(signal_words[c].end(), cluster.begin(), cluster.end());
    }
  }
  std::vector<std::string> filler_words;
  for (auto& cluster : filler_clusters(config)) {
    filler_words.insert(filler_words.end(), cluster.begin(), cluster.end());
  }
  std::vector<std::string> axes;
  for (const auto& [axis, groups] : config.identity_tokens) axes.push_back(axis);

  Dataset dataset;
  dataset.reserve(config.n_examples);
  std::uniform_int_distribution<std::size_t> filler_count(config.min_filler, config.max_filler);
  for (std::size_t n = 0; n < config.n_examples; ++n) {
    Example ex;
    ex.label = label_dist(rng);

    for (std::size_t s = 0; s < config.signal_tokens_per_example; ++s) {
      std::size_t source = ex.label;
      if (unit(rng) >= config.signal_purity) {
        std::uniform_int_distribution<std::size_t> other(0, config.num_classes - 2);
        source = other(rng);
        if (source >= ex.label) ++source;
      }
      ex.tokens.push_back(pick(signal_words[source], rng));
    }

    if (!axes.empty() && unit(rng) < config.identity_rate) {
      const std::string& axis = pick(axes, rng);
      const auto& groups = config.identity_tokens.at(axis);
      std::vector<std::string> all, aligned;
      std::size_t index = 0;
      for (const auto& [group, tokens] : groups) {
        all.push_back(group);
        if (index % config.num_classes == ex.label) aligned.push_back(group);
        ++index;
      }
      const bool correlated = unit(rng) < config.rho && !aligned.empty();
      const std::string group = correlated ? pick(aligned, rng) : pick(all, rng);
      ex.tokens.push_back(pick(groups.at(group), rng));
      ex.groups[axis] = {group};
    }

    const std::size_t fillers = filler_words.empty() ? 0 : filler_count(rng);
    for (std::size_t f = 0; f < fillers; ++f) ex.tokens.push_back(pick(filler_words, rng));

    std::shuffle(ex.tokens.begin(), ex.tokens.end(), rng);
    dataset.push_back(std::move(ex));
  }
  return dataset;
}

std::map<std::string, std::vector<double>> generate_synthetic_embeddings(
    const SynthConfig& corpus, const SynthEmbeddingConfig& config) {
  if (config.dim == 0) throw std::invalid_argument("embedding dim must be positive");
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const double scale = 1.0 / std::sqrt(static_cast<double>(config.dim));
  auto random_vector = [&](double norm) {
    std::vector<double> v(config.dim);
    for (double& x : v) x = normal(rng) * norm * scale;
    return v;
  };
  auto add = [](std::vector<double> a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    return a;
  };

  std::map<std::string, std::vector<double>> vectors;
  auto emit_cluster = [&](const std::vector<std::string>& words) {
    const auto center = random_vector(1.0);
    for (const auto& w : words) vectors[w] = add(center, random_vector(config.cluster_noise));
  };
  for (std::size_t c = 0; c < corpus.num_classes; ++c) {
    for (const auto& cluster : signal_clusters(corpus, c)) emit_cluster(cluster);
  }
  for (const auto& cluster : filler_clusters(corpus)) emit_cluster(cluster);
  for (const auto& [axis, groups] : corpus.identity_tokens) {
    const auto axis_center = random_vector(1.0);
    for (const auto& [group, tokens] : groups) {
      const auto group_center = add(axis_center, random_vector(config.group_offset));
      for (const auto& t : tokens) {
        vectors[t] = add(group_center, random_vector(config.identity_noise));
      }
    }
  }
  return vectors;
}

void write_embedding_file(const std::map<std::string, std::vector<double>>& vectors,
                          const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write embedding file " + path);
  for (const auto& [token, v] : vectors) {
    out << token;
    for (double x : v) out << ' ' << format_double(x);
    out << '\n';
  }
}

}  // namespace certfair
