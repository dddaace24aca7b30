// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include "certfair/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "certfair/ibp.hpp"
#include "certfair/parallel.hpp"

namespace certfair {

double auc(std::span<const double> scores, std::span<const std::size_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: scores and labels differ in length");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pairs_won = 0.0;
  std::size_t neg_below = 0, positives = 0, negatives = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i, pos = 0, neg = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      const std::size_t y = labels[order[j]];
      if (y > 1) throw std::invalid_argument("auc: labels must be 0 or 1");
      (y == 1 ? pos : neg) += 1;
      ++j;
    }
    pairs_won += static_cast<double>(pos) * static_cast<double>(neg_below) +
                 0.5 * static_cast<double>(pos) * static_cast<double>(neg);
    neg_below += neg;
    positives += pos;
    negatives += neg;
    i = j;
  }
  if (positives == 0 || negatives == 0) {
    throw std::invalid_argument("auc: both classes must be present");
  }
  return pairs_won / (static_cast<double>(positives) * static_cast<double>(negatives));
}

GroupRates group_rates(std::span<const std::size_t> predictions,
                       std::span<const std::size_t> labels, std::span<const GroupMap> groups,
                       const std::string& axis, std::size_t positive_class) {
  if (predictions.size() != labels.size() || groups.size() != labels.size()) {
    throw ShapeError("group_rates: predictions, labels and groups differ in length");
  }
  struct Counts {
    std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
    void add(bool pred, bool gold) {
      if (gold) (pred ? tp : fn) += 1;
      else (pred ? fp : tn) += 1;
    }
  };
  Counts overall;
  std::map<std::string, Counts> per_group;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == positive_class;
    const bool gold = labels[i] == positive_class;
    overall.add(pred, gold);
    auto it = groups[i].find(axis);
    if (it == groups[i].end()) continue;
    const std::set<std::string> unique(it->second.begin(), it->second.end());
    for (const auto& g : unique) per_group[g].add(pred, gold);
  }
  auto rate = [](std::size_t num, std::size_t den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  GroupRates out;
  out.axis = axis;
  out.overall_tpr = rate(overall.tp, overall.tp + overall.fn);
  out.overall_fpr = rate(overall.fp, overall.fp + overall.tn);
  for (const auto& [name, c] : per_group) {
    out.groups.push_back(GroupRate{name, c.tp + c.fn, c.fp + c.tn, rate(c.tp, c.tp + c.fn),
                                   rate(c.fp, c.fp + c.tn)});
  }
  return out;
}

double equality_difference(const GroupRates& rates, RateKind kind) {
  const auto& overall = kind == RateKind::kTpr ? rates.overall_tpr : rates.overall_fpr;
  if (!overall) return 0.0;
  double total = 0.0;
  for (const GroupRate& g : rates.groups) {
    const auto& r = kind == RateKind::kTpr ? g.tpr : g.fpr;
    if (r) total += std::fabs(*r - *overall);
  }
  return total;
}

std::vector<std::string> excluded_rates(const GroupRates& rates) {
  std::vector<std::string> out;
  for (const GroupRate& g : rates.groups) {
    if (!g.tpr || !rates.overall_tpr) out.push_back(rates.axis + "." + g.group + ".tpr");
    if (!g.fpr || !rates.overall_fpr) out.push_back(rates.axis + "." + g.group + ".fpr");
  }
  return out;
}

double selection_score(double fped, double tped, double cra_value, double task_score) {
  return fped + tped + (1.0 - cra_value) + (1.0 - task_score);
}

std::vector<std::string> annotated_axes(std::span<const GroupMap> groups) {
  std::set<std::string> axes;
  for (const auto& g : groups) {
    for (const auto& [axis, names] : g) {
      if (!names.empty()) axes.insert(axis);
    }
  }
  return {axes.begin(), axes.end()};
}

std::vector<CertificationResult> certify_dataset(const TextCnn& model, const Dataset& dataset,
                                                 const ResolvedTable& table,
                                                 const CertifyOptions& options) {
  std::vector<CertificationResult> out(dataset.size());
  parallel_for(dataset.size(), options.jobs, [&](std::size_t i) {
    if (options.method == CertifyMethod::kIbp) {
      out[i] = certify_ibp(model, dataset[i], table);
    } else {
      out[i] = safer_certify(model, dataset[i], table, options.safer, mix_seed(options.seed, i));
    }
  });
  return out;
}

double cra(const TextCnn& model, const Dataset& dataset, const ResolvedTable& table,
           const CertifyOptions& options) {
  if (dataset.empty()) return 0.0;
  const auto results = certify_dataset(model, dataset, table, options);
  const auto certified = std::count_if(results.begin(), results.end(),
                                       [](const CertificationResult& r) { return r.certified; });
  return static_cast<double>(certified) / static_cast<double>(dataset.size());
}

MetricsReport assemble_report(std::span<const std::size_t> predictions,
                              std::span<const double> positive_scores,
                              std::span<const std::size_t> labels,
                              std::span<const GroupMap> groups, std::size_t num_classes,
                              double cra_value, CertifyMethod method) {
  if (predictions.size() != labels.size() || groups.size() != labels.size()) {
    throw ShapeError("assemble_report: inputs differ in length");
  }
  MetricsReport r;
  r.n_examples = labels.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) correct += predictions[i] == labels[i];
  r.accuracy = labels.empty() ? 0.0 : static_cast<double>(correct) / labels.size();

  const auto axes = annotated_axes(groups);
  if (num_classes == 2) {
    if (positive_scores.size() != labels.size()) {
      throw ShapeError("assemble_report: one positive score per example required");
    }
    r.task_metric = "auc";
    const bool both = std::count(labels.begin(), labels.end(), 1) > 0 &&
                      std::count(labels.begin(), labels.end(), 0) > 0;
    r.task_score = both ? auc(positive_scores, labels) : r.accuracy;
    if (!both) r.task_metric = "accuracy";
    for (const auto& axis : axes) {
      GroupRates rates = group_rates(predictions, labels, groups, axis, 1);
      r.fped += equality_difference(rates, RateKind::kFpr);
      r.tped += equality_difference(rates, RateKind::kTpr);
      for (auto& e : excluded_rates(rates)) r.excluded.push_back(std::move(e));
      r.rates.push_back(std::move(rates));
    }
  } else {
    // One-vs-rest per class, averaged over classes.
    r.task_metric = "accuracy";
    r.task_score = r.accuracy;
    for (std::size_t c = 0; c < num_classes; ++c) {
      for (const auto& axis : axes) {
        GroupRates rates = group_rates(predictions, labels, groups, axis, c);
        r.fped += equality_difference(rates, RateKind::kFpr) / static_cast<double>(num_classes);
        r.tped += equality_difference(rates, RateKind::kTpr) / static_cast<double>(num_classes);
      }
    }
  }
  r.eodds = r.fped + r.tped;
  r.tpr_diff = r.tped;
  r.cra = cra_value;
  r.cra_method = method == CertifyMethod::kIbp ? "ibp" : "safer";
  r.selection_score = selection_score(r.fped, r.tped, r.cra, r.task_score);
  return r;
}

MetricsReport evaluate_model(const TextCnn& model, const Dataset& dataset,
                             const ResolvedTable& table, const CertifyOptions& options) {
  std::vector<std::size_t> predictions(dataset.size()), labels(dataset.size());
  std::vector<double> scores(dataset.size());
  std::vector<GroupMap> groups(dataset.size());
  parallel_for(dataset.size(), options.jobs, [&](std::size_t i) {
    const auto ids = model.encode(dataset[i]);
    const Tensor z = model.forward(ids);
    predictions[i] = predict_from_logits(z.data());
    const auto p = softmax(z.data());
    scores[i] = p.size() > 1 ? p[1] : 0.0;
  });
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    labels[i] = dataset[i].label;
    groups[i] = dataset[i].groups;
  }
  const double cra_value = cra(model, dataset, table, options);
  return assemble_report(predictions, scores, labels, groups, model.num_classes(), cra_value,
                         options.method);
}

}  // namespace certfair
