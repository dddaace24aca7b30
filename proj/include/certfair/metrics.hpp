// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Metric value types and the text report format.
//
// Report layout (version 1):
//
//   # certfair-metrics v1
//   [raw_task]
//   task_metric = auc
//   task_score = 0.93
//   ...
//   [fairness]
//   fped = ...
//   rate.<axis>.<group>.tpr = ...      (or "undefined")
//   [robustness]
//   cra = ...
//   [selection]
//   selection_score = ...
//
// Keys appear in a fixed order and doubles use the shortest round-trip form,
// so equal reports serialize to identical bytes.

#ifndef CERTFAIR_METRICS_HPP_
#define CERTFAIR_METRICS_HPP_

#include <optional>
#include <string>
#include <vector>

namespace certfair {

struct GroupRate {
  std::string group;
  std::size_t positives = 0;  // gold positives in the group
  std::size_t negatives = 0;
  std::optional<double> tpr;  // empty when the group has no positives
  std::optional<double> fpr;  // empty when the group has no negatives
  friend bool operator==(const GroupRate&, const GroupRate&) = default;
};

struct GroupRates {
  std::string axis;
  std::optional<double> overall_tpr;
  std::optional<double> overall_fpr;
  std::vector<GroupRate> groups;  // sorted by group name
  friend bool operator==(const GroupRates&, const GroupRates&) = default;
};

enum class RateKind { kFpr, kTpr };

struct MetricsReport {
  std::string task_metric = "auc";  // "auc" (binary) or "accuracy"
  double task_score = 0.0;
  double accuracy = 0.0;
  std::size_t n_examples = 0;

  double fped = 0.0;
  double tped = 0.0;
  double eodds = 0.0;     // fped + tped
  double tpr_diff = 0.0;  // equal-opportunity gap; same quantity as tped
  std::vector<GroupRates> rates;  // binary tasks, one entry per axis
  std::vector<std::string> excluded;  // "<axis>.<group>.<tpr|fpr>"

  std::string cra_method = "ibp";
  double cra = 0.0;

  double selection_score = 0.0;

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

std::string format_report(const MetricsReport& report);
MetricsReport parse_report(const std::string& text);
void write_report(const MetricsReport& report, const std::string& path);
MetricsReport read_report(const std::string& path);

}  // namespace certfair

#endif  // CERTFAIR_METRICS_HPP_
