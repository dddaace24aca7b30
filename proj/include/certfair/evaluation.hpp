// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0
//
// Task, group-fairness and certified-robustness metrics.

#ifndef CERTFAIR_EVALUATION_HPP_
#define CERTFAIR_EVALUATION_HPP_

#include <span>
#include <string>
#include <vector>

#include "certfair/data_io.hpp"
#include "certfair/interval.hpp"
#include "certfair/metrics.hpp"
#include "certfair/perturbation.hpp"
#include "certfair/safer.hpp"
#include "certfair/text_model.hpp"

namespace certfair {

// Mann-Whitney AUC; ties count one half. Labels are 0/1.
double auc(std::span<const double> scores, std::span<const std::size_t> labels);

// Rates on one axis. `groups[i]` lists example i's memberships; an example
// counts in every group it belongs to. A prediction is positive when it
// equals `positive_class`, and likewise for labels.
GroupRates group_rates(std::span<const std::size_t> predictions,
                       std::span<const std::size_t> labels, std::span<const GroupMap> groups,
                       const std::string& axis, std::size_t positive_class = 1);

// Sum over groups with a defined rate of |rate_z - rate_overall|.
double equality_difference(const GroupRates& rates, RateKind kind);

// "<axis>.<group>.<tpr|fpr>" for every undefined group rate.
std::vector<std::string> excluded_rates(const GroupRates& rates);

double selection_score(double fped, double tped, double cra, double task_score);

// Axes present in the data, sorted.
std::vector<std::string> annotated_axes(std::span<const GroupMap> groups);

struct CertifyOptions {
  CertifyMethod method = CertifyMethod::kIbp;
  SaferOptions safer;
  std::uint64_t seed = 1;  // per-example Monte Carlo seeds derive from this
  std::size_t jobs = 1;
};

std::vector<CertificationResult> certify_dataset(const TextCnn& model, const Dataset& dataset,
                                                 const ResolvedTable& table,
                                                 const CertifyOptions& options);

// Fraction of examples certified (certification implies a correct prediction).
double cra(const TextCnn& model, const Dataset& dataset, const ResolvedTable& table,
           const CertifyOptions& options);

// Builds the report from per-example outputs. `positive_scores` holds the
// class-1 probability and is used for AUC on binary tasks.
MetricsReport assemble_report(std::span<const std::size_t> predictions,
                              std::span<const double> positive_scores,
                              std::span<const std::size_t> labels,
                              std::span<const GroupMap> groups, std::size_t num_classes,
                              double cra_value, CertifyMethod method);

MetricsReport evaluate_model(const TextCnn& model, const Dataset& dataset,
                             const ResolvedTable& table, const CertifyOptions& options);

}  // namespace certfair

#endif  // CERTFAIR_EVALUATION_HPP_
