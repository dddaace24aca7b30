// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Brute-force metric oracles and random prediction sets, shared by the unit
// tests and the acceptance run.

#ifndef CERTFAIR_TESTS_METRIC_ORACLE_HPP_
#define CERTFAIR_TESTS_METRIC_ORACLE_HPP_

#include <algorithm>
#include <cmath>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "certfair/data_io.hpp"

namespace certfair::testing {

inline double pairwise_auc(const std::vector<double>& s, const std::vector<std::size_t>& y) {
  double won = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1.0;
      won += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return won / pairs;
}

// Brute-force equality difference from explicit confusion counts.
inline double brute_ed(const std::vector<std::size_t>& pred, const std::vector<std::size_t>& y,
                       const std::vector<GroupMap>& g, const std::string& axis, bool tpr) {
  auto rate = [&](auto member) -> std::optional<double> {
    double hit = 0, den = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!member(i)) continue;
      const bool relevant = tpr ? y[i] == 1 : y[i] == 0;
      if (!relevant) continue;
      den += 1;
      hit += pred[i] == 1;
    }
    if (den == 0) return std::nullopt;
    return hit / den;
  };
  const auto overall = rate([](std::size_t) { return true; });
  if (!overall) return 0.0;
  std::set<std::string> names;
  for (const auto& m : g) {
    auto it = m.find(axis);
    if (it != m.end()) names.insert(it->second.begin(), it->second.end());
  }
  double total = 0.0;
  for (const auto& n : names) {
    const auto r = rate([&](std::size_t i) {
      auto it = g[i].find(axis);
      return it != g[i].end() &&
             std::find(it->second.begin(), it->second.end(), n) != it->second.end();
    });
    if (r) total += std::fabs(*r - *overall);
  }
  return total;
}

struct RandomSet {
  std::vector<std::size_t> pred, labels;
  std::vector<double> scores;
  std::vector<GroupMap> groups;
};

inline RandomSet random_set(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size(2, 60);
  std::uniform_int_distribution<int> bit(0, 1), grp(0, 4), score(0, 9);
  const std::vector<std::string> names = {"female", "male", "non-binary"};
  RandomSet s;
  const std::size_t n = size(rng);
  for (std::size_t i = 0; i < n; ++i) {
    s.pred.push_back(bit(rng));
    s.labels.push_back(bit(rng));
    s.scores.push_back(score(rng) / 10.0);  // coarse grid forces ties
    GroupMap m;
    const int k = grp(rng);
    if (k < 3) m["gender"] = {names[k]};
    if (k == 3) m["gender"] = {names[0], names[2]};
    if (bit(rng)) m["religion"] = {bit(rng) ? "christian" : "muslim"};
    s.groups.push_back(std::move(m));
  }
  return s;
}

}  // namespace certfair::testing

#endif  // CERTFAIR_TESTS_METRIC_ORACLE_HPP_
