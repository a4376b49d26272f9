// SPDX-License-Identifier: Apache-2.0
#include "maskrate/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

namespace maskrate {

namespace {

struct Moments {
  double mean = 0.0;
  double var = 0.0;  // unbiased
  double n = 0.0;
};

Moments moments(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("t-test needs at least 2 values per sample");
  for (double x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument("t-test values must be finite");
  }
  Moments m;
  m.n = static_cast<double>(v.size());
  m.mean = std::accumulate(v.begin(), v.end(), 0.0) / m.n;
  for (double x : v) m.var += (x - m.mean) * (x - m.mean);
  m.var /= m.n - 1.0;
  return m;
}

}  // namespace

TTestResult one_sided_t(std::span<const double> x, std::span<const double> y, TTestVariant variant) {
  const Moments a = moments(x);
  const Moments b = moments(y);
  TTestResult r;
  if (a.var == 0.0 && b.var == 0.0) {
    r.degenerate = true;
    r.df = a.n + b.n - 2.0;
    if (a.mean == b.mean) {
      r.t = 0.0;
      r.p = 0.5;
    } else {
      r.t = a.mean < b.mean ? -std::numeric_limits<double>::infinity()
                            : std::numeric_limits<double>::infinity();
      r.p = a.mean < b.mean ? 0.0 : 1.0;
    }
    return r;
  }
  double se = 0.0;
  if (variant == TTestVariant::welch) {
    const double ua = a.var / a.n, ub = b.var / b.n;
    se = std::sqrt(ua + ub);
    r.df = (ua + ub) * (ua + ub) / (ua * ua / (a.n - 1.0) + ub * ub / (b.n - 1.0));
  } else {
    r.df = a.n + b.n - 2.0;
    const double pooled = ((a.n - 1.0) * a.var + (b.n - 1.0) * b.var) / r.df;
    se = std::sqrt(pooled * (1.0 / a.n + 1.0 / b.n));
  }
  r.t = (a.mean - b.mean) / se;
  r.p = boost::math::cdf(boost::math::students_t_distribution<double>(r.df), r.t);
  return r;
}

std::vector<bool> hochberg(std::span<const double> pvalues, double alpha) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw std::invalid_argument("alpha out of (0,1]");
  for (double p : pvalues) {
    if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("p-value out of [0,1]");
  }
  const std::size_t m = pvalues.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return pvalues[i] < pvalues[j]; });
  std::size_t k = 0;  // number rejected
  for (std::size_t rank = m; rank >= 1; --rank) {
    if (pvalues[order[rank - 1]] <= alpha / static_cast<double>(m - rank + 1)) {
      k = rank;
      break;
    }
  }
  std::vector<bool> reject(m, false);
  for (std::size_t i = 0; i < k; ++i) reject[order[i]] = true;
  return reject;
}

SignificanceReport parity_table(const SampleTable& samples, double alpha, TTestVariant variant) {
  SignificanceReport report;
  report.alpha = alpha;
  for (const auto& [task, schedules] : samples) {
    if (schedules.size() < 2) {
      throw std::invalid_argument(fmt::format("task '{}': need at least 2 schedules", task));
    }
    TaskReport tr;
    tr.task = task;
    for (const auto& [name, values] : schedules) tr.means[name] = moments(values).mean;
    // std::map iterates by name, so the first maximum wins ties.
    double best_mean = -std::numeric_limits<double>::infinity();
    for (const auto& [name, mean] : tr.means) {
      if (mean > best_mean) {
        best_mean = mean;
        tr.best = name;
      }
    }
    std::vector<double> pvals;
    for (const auto& [name, values] : schedules) {
      if (name == tr.best) continue;
      const auto res = one_sided_t(values, schedules.at(tr.best), variant);
      tr.comparisons.push_back({name, tr.means[name], res.p, false});
      pvals.push_back(res.p);
    }
    const auto reject = hochberg(pvals, alpha);
    std::set<std::string> parity{tr.best};
    for (std::size_t i = 0; i < reject.size(); ++i) {
      tr.comparisons[i].rejected = reject[i];
      if (!reject[i]) parity.insert(tr.comparisons[i].schedule);
    }
    tr.parity.assign(parity.begin(), parity.end());
    report.tasks.push_back(std::move(tr));
  }
  return report;
}

SignificanceReport parity_table(std::span<const SampleSet> samples, double alpha, TTestVariant variant) {
  SampleTable table;
  for (const auto& s : samples) {
    auto& dst = table[s.task][s.schedule];
    dst.insert(dst.end(), s.values.begin(), s.values.end());
  }
  return parity_table(table, alpha, variant);
}

SampleTable parse_sample_table(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("samples: expected {task: {schedule: [values]}}");
  SampleTable table;
  for (const auto& [task, schedules] : j.items()) {
    if (!schedules.is_object()) {
      throw std::invalid_argument(fmt::format("samples.{}: expected {{schedule: [values]}}", task));
    }
    for (const auto& [name, values] : schedules.items()) {
      try {
        table[task][name] = values.get<std::vector<double>>();
      } catch (const nlohmann::json::exception&) {
        throw std::invalid_argument(fmt::format("samples.{}.{}: expected an array of numbers", task, name));
      }
    }
  }
  return table;
}

nlohmann::json to_json(const SignificanceReport& report) {
  nlohmann::json tasks = nlohmann::json::object();
  for (const auto& t : report.tasks) {
    nlohmann::json comps = nlohmann::json::object();
    for (const auto& c : t.comparisons) {
      comps[c.schedule] = {{"mean", c.mean}, {"p", c.p}, {"reject", c.rejected}};
    }
    tasks[t.task] = {{"best", t.best}, {"means", t.means}, {"comparisons", comps}, {"parity", t.parity}};
  }
  return {{"alpha", report.alpha}, {"tasks", tasks}};
}

std::string render_parity_table(const SignificanceReport& report) {
  std::set<std::string> schedules;
  for (const auto& t : report.tasks) {
    for (const auto& [name, mean] : t.means) schedules.insert(name);
  }
  std::string out = "| schedule |";
  std::string rule = "|---|";
  for (const auto& t : report.tasks) {
    out += fmt::format(" {} |", t.task);
    rule += "---|";
  }
  out += "\n" + rule + "\n";
  for (const auto& s : schedules) {
    out += fmt::format("| {} |", s);
    for (const auto& t : report.tasks) {
      auto it = t.means.find(s);
      if (it == t.means.end()) {
        out += " - |";
        continue;
      }
      const bool bold = std::find(t.parity.begin(), t.parity.end(), s) != t.parity.end();
      out += bold ? fmt::format(" **{:.2f}** |", it->second) : fmt::format(" {:.2f} |", it->second);
    }
    out += "\n";
  }
  return out;
}

}  // namespace maskrate
