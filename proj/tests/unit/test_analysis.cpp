// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "maskrate/analysis.hpp"
#include "maskrate/rng.hpp"

using namespace maskrate;

namespace {

const RegressionFit kTruth{0.85, 0.4, 5e-5, 1.2};

double truth_at(double t) { return 0.85 - 0.4 * std::exp(-std::pow(5e-5 * t, 1.2)); }

std::vector<CurvePoint> grid(double noise = 0.0, std::uint64_t seed = 1) {
  Rng rng(seed);
  std::vector<CurvePoint> pts;
  for (int k = 1; k <= 8; ++k) {
    const double t = 10000.0 * k;
    pts.push_back({t, truth_at(t) + noise * rng.normal()});
  }
  return pts;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

// Tag balance and quoted attributes; enough to catch a malformed document.
bool well_formed_xml(const std::string& s) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  bool root_seen = false;
  while ((i = s.find('<', i)) != std::string::npos) {
    const std::size_t end = s.find('>', i);
    if (end == std::string::npos) return false;
    std::string tag = s.substr(i + 1, end - i - 1);
    i = end + 1;
    if (tag.empty()) return false;
    if (tag[0] == '?' || tag[0] == '!') continue;
    const bool closing = tag[0] == '/';
    const bool self_closing = tag.back() == '/';
    if (std::count(tag.begin(), tag.end(), '"') % 2 != 0) return false;
    std::string name = tag.substr(closing ? 1 : 0);
    name = name.substr(0, name.find_first_of(" \t\n/"));
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      if (stack.empty() && root_seen) return false;
      root_seen = true;
      stack.push_back(name);
    }
  }
  return root_seen && stack.empty();
}

std::size_t count_of(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (std::size_t p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("fit: noiseless synthetic data recovers the generating parameters") {
  const auto fit = fit_speedup_curve(grid());
  CHECK(fit.converged);
  CHECK_FALSE(fit.degenerate);
  CHECK(rel(fit.c1, 0.85) < 0.01);
  CHECK(rel(fit.c2, 0.4) < 0.01);
  CHECK(rel(fit.c3, 5e-5) < 0.01);
  CHECK(rel(fit.c4, 1.2) < 0.01);
  CHECK(fit.rss < 1e-12);
}

TEST_CASE("fit: constant data is degenerate and flat") {
  std::vector<CurvePoint> flat{{0, 0.7}, {10, 0.7}, {20, 0.7}, {30, 0.7}, {40, 0.7}};
  const auto fit = fit_speedup_curve(flat);
  CHECK(fit.degenerate);
  CHECK(fit.c2 == 0.0);
  for (double t : {0.0, 5.0, 40.0, 1e6}) CHECK(std::abs(evaluate_fit(fit, t) - 0.7) <= 1e-6);
}

TEST_CASE("fit: noise sigma 1e-3 stays within 3e-3 of the truth on the grid") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const auto fit = fit_speedup_curve(grid(1e-3, seed));
    for (const auto& p : grid()) CHECK(std::abs(evaluate_fit(fit, p.step) - p.value) <= 3e-3);
  }
}

TEST_CASE("fit: invariant to point order") {
  auto pts = grid(1e-3, 5);
  const auto a = fit_speedup_curve(pts);
  std::reverse(pts.begin(), pts.end());
  std::swap(pts[1], pts[5]);
  const auto b = fit_speedup_curve(pts);
  CHECK(to_json(a) == to_json(b));
}

TEST_CASE("fit: input validation") {
  std::vector<CurvePoint> three{{1, 0.1}, {2, 0.2}, {3, 0.3}};
  CHECK_THROWS_AS(fit_speedup_curve(three), std::invalid_argument);
  std::vector<CurvePoint> dup{{1, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.3}, {3, 0.5}};
  CHECK_THROWS_AS(fit_speedup_curve(dup), std::invalid_argument);
  std::vector<CurvePoint> neg{{-1, 0.1}, {1, 0.2}, {2, 0.3}, {3, 0.3}};
  CHECK_THROWS_AS(fit_speedup_curve(neg), std::invalid_argument);
  std::vector<CurvePoint> inf{{0, 0.1}, {1, HUGE_VAL}, {2, 0.3}, {3, 0.3}};
  CHECK_THROWS_AS(fit_speedup_curve(inf), std::invalid_argument);
}

TEST_CASE("fitted curve is strictly increasing") {
  const auto fit = fit_speedup_curve(grid(1e-3, 3));
  double prev = evaluate_fit(fit, 0.0);
  for (int k = 1; k <= 2000; ++k) {
    const double v = evaluate_fit(fit, 50.0 * k);
    CHECK(v > prev);
    prev = v;
  }
  CHECK(prev < fit.c1);
}

TEST_CASE("crossover: closed form, asymptote, below the intercept") {
  const RegressionFit f{1.0, 0.5, 1e-3, 1.0};
  const auto t = crossover_step(f, 1.0 - 0.5 * std::exp(-1.0));
  REQUIRE(t);
  CHECK(rel(*t, 1000.0) < 1e-9);
  CHECK_FALSE(crossover_step(f, 1.0).has_value());
  CHECK_FALSE(crossover_step(f, 2.0).has_value());
  CHECK(crossover_step(f, 0.2) == std::optional<double>(0.0));
}

TEST_CASE("crossover: forward-then-invert round trip") {
  const auto fit = fit_speedup_curve(grid());
  const auto t = crossover_step(fit, evaluate_fit(fit, 30000.0));
  REQUIRE(t);
  CHECK(rel(*t, 30000.0) < 1e-4);
  for (double ts : {10000.0, 12345.0, 47000.0, 80000.0}) {
    const auto back = crossover_step(kTruth, evaluate_fit(kTruth, ts));
    REQUIRE(back);
    CHECK(rel(*back, ts) < 1e-6);
  }
}

TEST_CASE("speedup ratio: reported arithmetic and self comparison") {
  // c4 = 1 puts the crossover for c1 - c2/e at exactly 1/c3.
  auto at = [](double cross) { return RegressionFit{0.9, 0.3, 1.0 / cross, 1.0}; };
  const double target = 0.9 - 0.3 * std::exp(-1.0);
  CHECK(std::abs(speedup_ratio(at(37037.0), target, 70000.0) - 1.89) < 0.005);
  CHECK(std::abs(speedup_ratio(at(42424.0), target, 70000.0) - 1.65) < 0.005);
  CHECK(speedup_ratio(at(70000.0), target, 70000.0) == doctest::Approx(1.0).epsilon(1e-9));

  CHECK(speedup_ratio(kTruth, evaluate_fit(kTruth, 80000.0), 80000.0) == 1.0);
  const auto fit = fit_speedup_curve(grid(1e-3, 9));
  CHECK(speedup_ratio(fit, evaluate_fit(fit, 80000.0), 80000.0) == 1.0);

  CHECK_THROWS_WITH_AS(speedup_ratio(kTruth, 0.85, 70000.0), doctest::Contains("never matches baseline"),
                       std::runtime_error);
  CHECK(std::isinf(speedup_ratio(kTruth, 0.1, 70000.0)));
  CHECK_THROWS(speedup_ratio(kTruth, 0.5, 0.0));
}

TEST_CASE("pareto check") {
  const auto b = grid();
  CHECK(pareto_check(b, b).pareto);
  auto above = b;
  for (auto& p : above) p.value += 0.1;
  const auto r = pareto_check(above, b);
  CHECK(r.pareto);
  CHECK(r.violations.empty());
  auto dip = above;
  dip[3].value = b[3].value - 0.01;
  const auto d = pareto_check(dip, b, 0.005);
  CHECK_FALSE(d.pareto);
  CHECK(d.violations == std::vector<double>{b[3].step});
  CHECK(pareto_check(dip, b, 0.02).pareto);
  auto shifted = b;
  shifted[0].step += 1;
  CHECK_THROWS_AS(pareto_check(shifted, b), std::invalid_argument);
  std::vector<double> x{1.0, 2.0, 3.0}, y{2.0, 4.0};
  // pooled variance (2 + 2) / 3, se = sqrt(4/3 * (1/3 + 1/2))
  CHECK(pooled_standard_error(x, y) == doctest::Approx(std::sqrt(4.0 / 3.0 * (1.0 / 3.0 + 0.5))));
}

TEST_CASE("curve CSV reading") {
  const auto dir = std::filesystem::temp_directory_path() / "maskrate_curve_csv_test";
  std::filesystem::create_directories(dir);
  {
    std::ofstream(dir / "one.csv") << "step,value\n0,0.5\n100,0.6\n";
    std::ofstream(dir / "many.csv") << "step,value,schedule\n0,0.5,a\n0,0.4,b\n10,0.7,a\n";
    std::ofstream(dir / "bad.csv") << "step,val\n0,0.5\n";
    std::ofstream(dir / "junk.csv") << "step,value\n0,abc\n";
  }
  const auto one = read_curve_csv(dir / "one.csv", "base");
  CHECK(one.at("base") == std::vector<CurvePoint>{{0, 0.5}, {100, 0.6}});
  const auto many = read_curve_csv(dir / "many.csv", "x");
  CHECK(many.size() == 2);
  CHECK(many.at("a").size() == 2);
  CHECK_THROWS(read_curve_csv(dir / "bad.csv", "x"));
  CHECK_THROWS(read_curve_csv(dir / "junk.csv", "x"));
  CHECK_THROWS(read_curve_csv(dir / "missing.csv", "x"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("plot: structure, well-formedness, determinism") {
  const std::vector<PlotSeries> one{{"a", grid()}};
  const std::string bare = render_plot(one, {});
  CHECK(well_formed_xml(bare));
  CHECK(count_of(bare, "<g class=\"points\"") == 1);
  CHECK(count_of(bare, "<path") == 0);
  CHECK(bare.find("<svg") != std::string::npos);

  const std::vector<PlotSeries> two{{"a", grid()}, {"b & c", grid(1e-3, 2)}};
  const std::vector<PlotFit> fits{{"a", kTruth}, {"b & c", fit_speedup_curve(grid(1e-3, 2))}};
  const std::vector<PlotMarker> marks{{"crossover", 30000.0, truth_at(30000.0)}};
  const std::string full = render_plot(two, fits, marks);
  CHECK(well_formed_xml(full));
  CHECK(count_of(full, "<g class=\"points\"") == 2);
  CHECK(count_of(full, "<path") == 2);
  CHECK(full.find("b &amp; c") != std::string::npos);
  CHECK(render_plot(two, fits, marks) == full);

  const auto path = std::filesystem::temp_directory_path() / "maskrate_plot_test.svg";
  emit_plot(two, fits, marks, path);
  std::ifstream in(path);
  std::string disk((std::istreambuf_iterator<char>(in)), {});
  CHECK(disk == full);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(emit_plot(two, fits, marks, "/nonexistent-dir/x/plot.svg"), std::runtime_error);
  CHECK_THROWS(render_plot(std::vector<PlotSeries>{}, {}));
}
