// SPDX-License-Identifier: Apache-2.0
#include "maskrate/analysis.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include <fmt/format.h>
#include <gsl/gsl_errno.h>
#include <gsl/gsl_multimin.h>

namespace maskrate {

double evaluate_fit(const RegressionFit& fit, double t) {
  return fit.c1 - fit.c2 * std::exp(-std::pow(fit.c3 * t, fit.c4));
}

namespace {

struct FitData {
  std::vector<CurvePoint> points;
};

// theta = (c1, log c2, log c3, log c4)
double rss_of(const double* theta, const FitData& data) {
  RegressionFit f{theta[0], std::exp(theta[1]), std::exp(theta[2]), std::exp(theta[3])};
  double rss = 0.0;
  for (const auto& p : data.points) {
    const double r = evaluate_fit(f, p.step) - p.value;
    rss += r * r;
  }
  return std::isfinite(rss) ? rss : std::numeric_limits<double>::max();
}

double gsl_objective(const gsl_vector* x, void* params) {
  return rss_of(gsl_vector_const_ptr(x, 0), *static_cast<const FitData*>(params));
}

// One simplex descent from theta; theta is overwritten with the minimizer.
double simplex_run(std::array<double, 4>& theta, const std::array<double, 4>& steps, const FitData& data,
                   int max_iterations) {
  gsl_multimin_function fn{&gsl_objective, 4, const_cast<FitData*>(&data)};
  gsl_vector* x = gsl_vector_alloc(4);
  gsl_vector* ss = gsl_vector_alloc(4);
  for (std::size_t i = 0; i < 4; ++i) {
    gsl_vector_set(x, i, theta[i]);
    gsl_vector_set(ss, i, steps[i]);
  }
  gsl_multimin_fminimizer* s = gsl_multimin_fminimizer_alloc(gsl_multimin_fminimizer_nmsimplex2, 4);
  gsl_multimin_fminimizer_set(s, &fn, x, ss);
  for (int iter = 0; iter < max_iterations; ++iter) {
    if (gsl_multimin_fminimizer_iterate(s) != GSL_SUCCESS) break;
    if (gsl_multimin_test_size(gsl_multimin_fminimizer_size(s), 1e-13) == GSL_SUCCESS) break;
  }
  for (std::size_t i = 0; i < 4; ++i) theta[i] = gsl_vector_get(s->x, i);
  const double rss = s->fval;
  gsl_multimin_fminimizer_free(s);
  gsl_vector_free(ss);
  gsl_vector_free(x);
  return rss;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RegressionFit fit_speedup_curve(std::span<const CurvePoint> points, const FitOptions& options) {
  FitData data{{points.begin(), points.end()}};
  std::set<double> distinct;
  for (const auto& p : data.points) {
    if (!std::isfinite(p.step) || p.step < 0.0) throw std::invalid_argument("curve steps must be finite and >= 0");
    if (!std::isfinite(p.value)) throw std::invalid_argument("curve values must be finite");
    distinct.insert(p.step);
  }
  if (distinct.size() < 4) throw std::invalid_argument("fit needs at least 4 distinct steps");
  // Canonical order so the fit does not depend on input order.
  std::sort(data.points.begin(), data.points.end(), [](const CurvePoint& a, const CurvePoint& b) {
    return a.step < b.step || (a.step == b.step && a.value < b.value);
  });

  double vmin = data.points.front().value, vmax = vmin;
  for (const auto& p : data.points) {
    vmin = std::min(vmin, p.value);
    vmax = std::max(vmax, p.value);
  }
  std::vector<double> positive;
  for (double t : distinct) {
    if (t > 0.0) positive.push_back(t);
  }
  const double t_mid = median(positive);

  if (vmax - vmin <= 1e-12 * std::max(1.0, std::abs(vmax))) {
    RegressionFit flat{vmax, 0.0, 1.0 / t_mid, 1.0, 0.0, true, true};
    for (const auto& p : data.points) flat.rss += (p.value - vmax) * (p.value - vmax);
    return flat;
  }

  const double margin = 0.05 * (vmax - vmin);
  const double c1 = vmax + margin;
  const double c2 = c1 - vmin;
  const std::array<double, 4> steps{std::max(margin, 1e-6), 1.0, 1.0, 0.5};
  const double c3_scale[] = {1.0, 0.25, 4.0};
  const double c4_init[] = {1.0, 0.5, 2.0};

  RegressionFit best;
  best.rss = std::numeric_limits<double>::infinity();
  gsl_error_handler_t* old_handler = gsl_set_error_handler_off();
  for (double c4 : c4_init) {
    for (double scale : c3_scale) {
      std::array<double, 4> theta{c1, std::log(c2), std::log(scale / t_mid), std::log(c4)};
      double prev = std::numeric_limits<double>::infinity();
      bool converged = false;
      for (int round = 0; round < options.max_rounds; ++round) {
        const double rss = simplex_run(theta, steps, data, options.max_iterations);
        if (rss == 0.0 || (std::isfinite(prev) && prev - rss <= options.rel_improvement * prev)) {
          converged = true;
          prev = std::min(prev, rss);
          break;
        }
        prev = rss;
      }
      if (prev < best.rss) {
        best = {theta[0], std::exp(theta[1]), std::exp(theta[2]), std::exp(theta[3]), prev, converged, false};
      }
    }
  }
  gsl_set_error_handler(old_handler);
  return best;
}

std::optional<double> crossover_step(const RegressionFit& fit, double target) {
  if (target >= fit.c1) return std::nullopt;
  if (target <= fit.c1 - fit.c2) return 0.0;
  double lo = 0.0;
  double hi = 1.0 / fit.c3;
  while (evaluate_fit(fit, hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (!std::isfinite(hi)) return std::nullopt;
  }
  while (hi - lo > 1e-10 * hi) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (evaluate_fit(fit, mid) < target) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return hi;
}

double speedup_ratio(const RegressionFit& fit_fast, double baseline_best, double baseline_total_steps) {
  if (!(baseline_total_steps > 0.0)) throw std::invalid_argument("baseline total steps must be > 0");
  // A curve compared against its own value at the full duration.
  if (evaluate_fit(fit_fast, baseline_total_steps) == baseline_best) return 1.0;
  const auto t = crossover_step(fit_fast, baseline_best);
  if (!t) throw std::runtime_error("never matches baseline");
  if (*t == 0.0) return std::numeric_limits<double>::infinity();
  return baseline_total_steps / *t;
}

ParetoResult pareto_check(std::span<const CurvePoint> a, std::span<const CurvePoint> b, double tolerance) {
  if (a.size() != b.size()) throw std::invalid_argument("pareto_check: step grids differ");
  ParetoResult r;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].step != b[i].step) throw std::invalid_argument("pareto_check: step grids differ");
    if (a[i].value < b[i].value - tolerance) r.violations.push_back(a[i].step);
  }
  r.pareto = r.violations.empty();
  return r;
}

double pooled_standard_error(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("pooled standard error needs 2 values per sample");
  auto mean_ss = [](std::span<const double> v) {
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return ss;
  };
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  const double pooled = (mean_ss(a) + mean_ss(b)) / (na + nb - 2.0);
  return std::sqrt(pooled * (1.0 / na + 1.0 / nb));
}

std::map<std::string, std::vector<CurvePoint>> read_curve_csv(const std::filesystem::path& path,
                                                              const std::string& default_name) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      cells.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
    }
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error(fmt::format("{}: empty file", path.string()));
  const auto header = split(line);
  const bool has_schedule = header.size() == 3 && header[2] == "schedule";
  if (header.size() < 2 || header[0] != "step" || header[1] != "value" || (header.size() == 3 && !has_schedule) ||
      header.size() > 3) {
    throw std::runtime_error(fmt::format("{}: expected header step,value[,schedule]", path.string()));
  }
  std::map<std::string, std::vector<CurvePoint>> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(fmt::format("{}:{}: expected {} columns", path.string(), lineno, header.size()));
    }
    CurvePoint p;
    try {
      std::size_t used = 0;
      p.step = std::stod(cells[0], &used);
      if (used != cells[0].size()) throw std::invalid_argument("trailing");
      p.value = std::stod(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw std::runtime_error(fmt::format("{}:{}: bad number", path.string(), lineno));
    }
    out[has_schedule ? cells[2] : default_name].push_back(p);
  }
  return out;
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string render_plot(std::span<const PlotSeries> series, std::span<const PlotFit> fits,
                        std::span<const PlotMarker> markers) {
  if (series.empty()) throw std::invalid_argument("plot needs at least one series");
  constexpr double W = 640, H = 400, L = 70, R = 170, T = 20, B = 50;
  double x0 = 0.0, x1 = 0.0;
  double y0 = std::numeric_limits<double>::infinity(), y1 = -y0;
  for (const auto& s : series) {
    for (const auto& p : s.points) {
      x1 = std::max(x1, p.step);
      y0 = std::min(y0, p.value);
      y1 = std::max(y1, p.value);
    }
  }
  if (!std::isfinite(y0)) {
    y0 = 0.0;
    y1 = 1.0;
  }
  for (const auto& m : markers) {
    x1 = std::max(x1, m.step);
    y0 = std::min(y0, m.value);
    y1 = std::max(y1, m.value);
  }
  if (x1 <= x0) x1 = x0 + 1.0;
  if (y1 <= y0) {
    y0 -= 0.5;
    y1 += 0.5;
  }
  const double pad = 0.05 * (y1 - y0);
  y0 -= pad;
  y1 += pad;
  auto sx = [&](double x) { return L + (x - x0) / (x1 - x0) * (W - L - R); };
  auto sy = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };

  std::string out;
  out += "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  out += fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\">\n",
      W, H, W, H);
  out += fmt::format("<rect x=\"0\" y=\"0\" width=\"{}\" height=\"{}\" fill=\"white\"/>\n", W, H);
  out += "<g class=\"axes\" stroke=\"black\" stroke-width=\"1\">\n";
  out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", L, H - B, W - R, H - B);
  out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", L, T, L, H - B);
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", sx(xv), H - B, sx(xv),
                       H - B + 4);
    out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", L - 4, sy(yv), L, sy(yv));
  }
  out += "</g>\n";
  out += "<g class=\"ticks\" font-family=\"sans-serif\" font-size=\"10\" fill=\"black\">\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = x0 + (x1 - x0) * i / 4.0;
    const double yv = y0 + (y1 - y0) * i / 4.0;
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">{:g}</text>\n", sx(xv), H - B + 16, xv);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"end\">{:.4g}</text>\n", L - 6, sy(yv) + 3, yv);
  }
  out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" text-anchor=\"middle\">step</text>\n", (L + W - R) / 2, H - 12);
  out += "</g>\n";

  for (std::size_t i = 0; i < fits.size(); ++i) {
    const auto& f = fits[i];
    std::string d;
    constexpr int kSamples = 200;
    for (int k = 0; k <= kSamples; ++k) {
      const double t = x0 + (x1 - x0) * k / kSamples;
      const double y = std::clamp(evaluate_fit(f.fit, t), y0, y1);
      d += fmt::format("{}{:.2f},{:.2f}", k == 0 ? "M" : " L", sx(t), sy(y));
    }
    out += fmt::format("<path class=\"fit\" data-name=\"{}\" d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/>\n",
                       xml_escape(f.name), d, kPalette[i % std::size(kPalette)]);
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& s = series[i];
    out += fmt::format("<g class=\"points\" data-name=\"{}\" fill=\"{}\">\n", xml_escape(s.name),
                       kPalette[i % std::size(kPalette)]);
    for (const auto& p : s.points) {
      out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"3\"/>\n", sx(p.step), sy(p.value));
    }
    out += "</g>\n";
  }
  if (!markers.empty()) {
    out += "<g class=\"markers\" stroke=\"gray\" stroke-dasharray=\"4 3\" font-family=\"sans-serif\" font-size=\"10\">\n";
    for (const auto& m : markers) {
      out += fmt::format("<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\"/>\n", sx(m.step), H - B,
                         sx(m.step), sy(m.value));
      out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" stroke=\"none\" fill=\"gray\">{}</text>\n", sx(m.step) + 3,
                         sy(m.value) - 4, xml_escape(m.label));
    }
    out += "</g>\n";
  }
  out += "<g class=\"legend\" font-family=\"sans-serif\" font-size=\"11\">\n";
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = T + 14 + 16 * static_cast<double>(i);
    out += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"10\" height=\"10\" fill=\"{}\"/>\n", W - R + 12, y - 9,
                       kPalette[i % std::size(kPalette)]);
    out += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\">{}</text>\n", W - R + 28, y, xml_escape(series[i].name));
  }
  out += "</g>\n</svg>\n";
  return out;
}

void emit_plot(std::span<const PlotSeries> series, std::span<const PlotFit> fits, std::span<const PlotMarker> markers,
               const std::filesystem::path& path) {
  const std::string svg = render_plot(series, fits, markers);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << svg;
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
}

nlohmann::json to_json(const RegressionFit& fit) {
  return {{"c1", fit.c1}, {"c2", fit.c2}, {"c3", fit.c3}, {"c4", fit.c4},
          {"rss", fit.rss}, {"converged", fit.converged}, {"degenerate", fit.degenerate}};
}

}  // namespace maskrate
