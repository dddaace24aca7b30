// Copyright 2026 The certfair Authors
// SPDX-License-Identifier: Apache-2.0

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "certfair/data_io.hpp"
#include "certfair/metrics.hpp"

namespace certfair {

namespace {

constexpr const char* kHeader = "# certfair-metrics v1";
constexpr const char* kUndefined = "undefined";

std::string opt(const std::optional<double>& v) { return v ? format_double(*v) : kUndefined; }

double parse_double(const std::string& text, const std::string& key) {
  double v = 0.0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("report: bad number for '" + key + "': " + text);
  }
  return v;
}

std::size_t parse_count(const std::string& text, const std::string& key) {
  std::size_t v = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, v);
  if (ec != std::errc() || ptr != end) {
    throw std::runtime_error("report: bad count for '" + key + "': " + text);
  }
  return v;
}

std::optional<double> parse_opt(const std::string& text, const std::string& key) {
  if (text == kUndefined) return std::nullopt;
  return parse_double(text, key);
}

}  // namespace

std::string format_report(const MetricsReport& r) {
  std::ostringstream out;
  out << kHeader << '\n';
  out << "[raw_task]\n";
  out << "task_metric = " << r.task_metric << '\n';
  out << "task_score = " << format_double(r.task_score) << '\n';
  out << "accuracy = " << format_double(r.accuracy) << '\n';
  out << "n_examples = " << r.n_examples << '\n';
  out << "[fairness]\n";
  out << "fped = " << format_double(r.fped) << '\n';
  out << "tped = " << format_double(r.tped) << '\n';
  out << "eodds = " << format_double(r.eodds) << '\n';
  out << "tpr_diff = " << format_double(r.tpr_diff) << '\n';
  for (const GroupRates& axis : r.rates) {
    const std::string base = "rate." + axis.axis + ".";
    out << base << "*overall*.tpr = " << opt(axis.overall_tpr) << '\n';
    out << base << "*overall*.fpr = " << opt(axis.overall_fpr) << '\n';
    for (const GroupRate& g : axis.groups) {
      out << base << g.group << ".positives = " << g.positives << '\n';
      out << base << g.group << ".negatives = " << g.negatives << '\n';
      out << base << g.group << ".tpr = " << opt(g.tpr) << '\n';
      out << base << g.group << ".fpr = " << opt(g.fpr) << '\n';
    }
  }
  out << "excluded =";
  for (std::size_t i = 0; i < r.excluded.size(); ++i) {
    out << (i == 0 ? " " : ",") << r.excluded[i];
  }
  out << '\n';
  out << "[robustness]\n";
  out << "cra_method = " << r.cra_method << '\n';
  out << "cra = " << format_double(r.cra) << '\n';
  out << "[selection]\n";
  out << "selection_score = " << format_double(r.selection_score) << '\n';
  return out.str();
}

MetricsReport parse_report(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error("report: missing or unsupported header");
  }
  MetricsReport r;
  std::map<std::string, std::size_t> axis_index;
  auto axis_slot = [&](const std::string& axis) -> GroupRates& {
    auto [it, fresh] = axis_index.emplace(axis, r.rates.size());
    if (fresh) r.rates.push_back(GroupRates{axis, std::nullopt, std::nullopt, {}});
    return r.rates[it->second];
  };
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty() || line.front() == '[' || line.front() == '#') continue;
    const auto eq = line.find(" =");
    if (eq == std::string::npos) {
      throw std::runtime_error("report line " + std::to_string(number) + ": expected key = value");
    }
    const std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 2);
    if (!value.empty() && value.front() == ' ') value.erase(0, 1);

    if (key == "task_metric") r.task_metric = value;
    else if (key == "task_score") r.task_score = parse_double(value, key);
    else if (key == "accuracy") r.accuracy = parse_double(value, key);
    else if (key == "n_examples") r.n_examples = parse_count(value, key);
    else if (key == "fped") r.fped = parse_double(value, key);
    else if (key == "tped") r.tped = parse_double(value, key);
    else if (key == "eodds") r.eodds = parse_double(value, key);
    else if (key == "tpr_diff") r.tpr_diff = parse_double(value, key);
    else if (key == "cra_method") r.cra_method = value;
    else if (key == "cra") r.cra = parse_double(value, key);
    else if (key == "selection_score") r.selection_score = parse_double(value, key);
    else if (key == "excluded") {
      std::stringstream list(value);
      std::string item;
      while (std::getline(list, item, ',')) {
        if (!item.empty()) r.excluded.push_back(item);
      }
    } else if (key.starts_with("rate.")) {
      const auto first = key.find('.', 5);
      const auto last = key.rfind('.');
      if (first == std::string::npos || last <= first) {
        throw std::runtime_error("report line " + std::to_string(number) + ": bad rate key");
      }
      GroupRates& axis = axis_slot(key.substr(5, first - 5));
      const std::string group = key.substr(first + 1, last - first - 1);
      const std::string field = key.substr(last + 1);
      if (group == "*overall*") {
        if (field == "tpr") axis.overall_tpr = parse_opt(value, key);
        else if (field == "fpr") axis.overall_fpr = parse_opt(value, key);
        else throw std::runtime_error("report: unknown overall field " + field);
        continue;
      }
      if (axis.groups.empty() || axis.groups.back().group != group) {
        axis.groups.push_back(GroupRate{group, 0, 0, std::nullopt, std::nullopt});
      }
      GroupRate& g = axis.groups.back();
      if (field == "positives") g.positives = parse_count(value, key);
      else if (field == "negatives") g.negatives = parse_count(value, key);
      else if (field == "tpr") g.tpr = parse_opt(value, key);
      else if (field == "fpr") g.fpr = parse_opt(value, key);
      else throw std::runtime_error("report: unknown group field " + field);
    } else {
      throw std::runtime_error("report line " + std::to_string(number) + ": unknown key '" +
                               key + "'");
    }
  }
  return r;
}

void write_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write report " + path);
  out << format_report(report);
  if (!out) throw std::runtime_error("failed writing report " + path);
}

MetricsReport read_report(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open report " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_report(buf.str());
}

}  // namespace certfair
