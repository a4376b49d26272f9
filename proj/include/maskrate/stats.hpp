// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace maskrate {

struct SampleSet {
  std::string schedule;
  std::string task;
  std::vector<double> values;
};

enum class TTestVariant { welch, pooled };

struct TTestResult {
  double t = 0.0;
  double df = 0.0;
  double p = 0.5;
  bool degenerate = false;  // both samples have zero variance
};

/// One-sided two-sample t-test of "x performs worse than y": p is the lower
/// tail P(T <= t) of t = (mean(x) - mean(y)) / se. Welch by default. Two
/// zero-variance samples give p = 0.5 for equal means and 0 or 1 otherwise,
/// flagged degenerate. Throws std::invalid_argument with fewer than 2 values
/// or non-finite values.
TTestResult one_sided_t(std::span<const double> x, std::span<const double> y,
                        TTestVariant variant = TTestVariant::welch);

/// Hochberg step-up: with p sorted ascending, reject the k smallest where k
/// is the largest index with p_(k) <= alpha / (m - k + 1). Returns one flag
/// per input p-value.
std::vector<bool> hochberg(std::span<const double> pvalues, double alpha);

struct Comparison {
  std::string schedule;
  double mean = 0.0;
  double p = 0.0;
  bool rejected = false;  // significantly worse than the best schedule
};

struct TaskReport {
  std::string task;
  std::string best;
  std::map<std::string, double> means;
  std::vector<Comparison> comparisons;  // every non-best schedule, by name
  std::vector<std::string> parity;      // best plus every retained schedule, by name
};

struct SignificanceReport {
  double alpha = 0.05;
  std::vector<TaskReport> tasks;  // by task name
};

/// task -> schedule -> values
using SampleTable = std::map<std::string, std::map<std::string, std::vector<double>>>;

/// Per task: the best-mean schedule (ties to the lexicographically smaller
/// name) is tested against every other schedule, the p-values of that task
/// are Hochberg-corrected, and retained schedules join the parity set.
SignificanceReport parity_table(const SampleTable& samples, double alpha = 0.05,
                                TTestVariant variant = TTestVariant::welch);
SignificanceReport parity_table(std::span<const SampleSet> samples, double alpha = 0.05,
                                TTestVariant variant = TTestVariant::welch);

SampleTable parse_sample_table(const nlohmann::json& j);
nlohmann::json to_json(const SignificanceReport& report);

/// Markdown table, schedules by tasks, parity cells in bold.
std::string render_parity_table(const SignificanceReport& report);

}  // namespace maskrate
