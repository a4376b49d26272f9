// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace maskrate {

/// One evaluation of a run: higher values are better.
struct CurvePoint {
  double step = 0.0;
  double value = 0.0;
  bool operator==(const CurvePoint&) const = default;
};

/// f(t) = c1 - c2 * exp(-(c3 * t)^c4)
struct RegressionFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 1.0;
  double c4 = 1.0;
  double rss = 0.0;
  bool converged = false;
  bool degenerate = false;  // flat data, c2 = 0
};

struct FitOptions {
  int max_rounds = 200;           // simplex restarts per start
  int max_iterations = 20000;     // per simplex run
  double rel_improvement = 1e-12;
};

double evaluate_fit(const RegressionFit& fit, double t);

/// Least squares over log-parameterized c2, c3, c4 with several starting
/// points; the lowest RSS wins and ties go to the earlier start. Point order
/// does not matter. Throws std::invalid_argument on fewer than 4 distinct
/// steps, negative steps, or non-finite values.
RegressionFit fit_speedup_curve(std::span<const CurvePoint> points, const FitOptions& options = {});

/// Step at which the fitted curve first reaches target. nullopt when
/// target >= c1; 0 when target <= c1 - c2.
std::optional<double> crossover_step(const RegressionFit& fit, double target);

/// baseline_total_steps / crossover_step(fit_fast, baseline_best).
/// Throws std::runtime_error("never matches baseline") when unreachable.
double speedup_ratio(const RegressionFit& fit_fast, double baseline_best, double baseline_total_steps);

struct ParetoResult {
  bool pareto = false;
  std::vector<double> violations;  // steps where a < b - tolerance
};

/// A is a Pareto improvement over B when a >= b - tolerance at every step.
/// Throws std::invalid_argument when the step grids differ.
ParetoResult pareto_check(std::span<const CurvePoint> a, std::span<const CurvePoint> b, double tolerance = 0.0);

/// Two-sample pooled standard error of the difference of means.
double pooled_standard_error(std::span<const double> a, std::span<const double> b);

/// CSV with header step,value[,schedule]. Rows without a schedule column go
/// under default_name. Points keep file order.
std::map<std::string, std::vector<CurvePoint>> read_curve_csv(const std::filesystem::path& path,
                                                              const std::string& default_name);

struct PlotSeries {
  std::string name;
  std::vector<CurvePoint> points;
};

struct PlotFit {
  std::string name;
  RegressionFit fit;
};

struct PlotMarker {
  std::string label;
  double step = 0.0;
  double value = 0.0;
};

std::string render_plot(std::span<const PlotSeries> series, std::span<const PlotFit> fits,
                        std::span<const PlotMarker> markers = {});
/// Writes render_plot output. Throws std::runtime_error if the file cannot be written.
void emit_plot(std::span<const PlotSeries> series, std::span<const PlotFit> fits,
               std::span<const PlotMarker> markers, const std::filesystem::path& path);

nlohmann::json to_json(const RegressionFit& fit);

}  // namespace maskrate
