// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "maskrate/rng.hpp"
#include "maskrate/stats.hpp"
#include "oracle.hpp"
#include "pinned_welch.hpp"

using namespace maskrate;

TEST_CASE("welch one-sided: worked example against scipy") {
  const std::vector<double> x{83.7, 83.9, 83.6}, y{84.2, 84.4, 84.3};
  const auto r = one_sided_t(x, y);
  CHECK(std::abs(r.t - pinned::kWorkedWelchT) <= 1e-9);
  CHECK(std::abs(r.df - pinned::kWorkedWelchDf) <= 1e-9);
  CHECK(std::abs(r.p - pinned::kWorkedWelchP) <= 1e-9);
  CHECK_FALSE(r.degenerate);
  const auto pooled = one_sided_t(x, y, TTestVariant::pooled);
  CHECK(pooled.df == 4.0);
  CHECK(std::abs(pooled.p - pinned::kWorkedPooledP) <= 1e-9);
}

TEST_CASE("welch one-sided: 20 pinned pairs") {
  for (const auto& c : pinned::welch_pairs()) {
    const auto r = one_sided_t(c.x, c.y);
    CHECK(std::abs(r.t - c.t) <= 1e-9);
    CHECK(std::abs(r.p - c.p) <= 1e-9);
  }
}

TEST_CASE("one-sided t: identical samples, extreme separation, degenerate cases, errors") {
  const std::vector<double> a{1.0, 2.0, 3.0};
  CHECK(one_sided_t(a, a).p == doctest::Approx(0.5).epsilon(1e-15));
  const std::vector<double> lo{0.0, 0.01, 0.02}, hi{100.0, 100.01, 100.02};
  CHECK(one_sided_t(lo, hi).p < 1e-9);
  CHECK(one_sided_t(hi, lo).p > 1.0 - 1e-9);

  const std::vector<double> c1{5.0, 5.0}, c2{6.0, 6.0, 6.0};
  CHECK(one_sided_t(c1, c1).p == 0.5);
  CHECK(one_sided_t(c1, c1).degenerate);
  CHECK(one_sided_t(c1, c2).p == 0.0);
  CHECK(one_sided_t(c2, c1).p == 1.0);

  const std::vector<double> one{1.0};
  CHECK_THROWS_AS(one_sided_t(one, a), std::invalid_argument);
  const std::vector<double> nan{1.0, std::nan("")};
  CHECK_THROWS_AS(one_sided_t(nan, a), std::invalid_argument);
}

TEST_CASE("one-sided t: antisymmetric around one half") {
  for (const auto& c : pinned::welch_pairs()) {
    CHECK(std::abs(one_sided_t(c.x, c.y).p + one_sided_t(c.y, c.x).p - 1.0) <= 1e-9);
  }
}

TEST_CASE("hochberg: worked examples") {
  CHECK(hochberg(std::vector<double>{0.01}, 0.05) == std::vector<bool>{true});
  CHECK(hochberg(std::vector<double>{0.04, 0.04, 0.04}, 0.05) == std::vector<bool>{true, true, true});
  CHECK(hochberg(std::vector<double>{0.03, 0.04, 0.9}, 0.05) == std::vector<bool>{false, false, false});
  CHECK(hochberg(std::vector<double>{0.9, 0.01, 0.02}, 0.05) == std::vector<bool>{false, true, true});
  CHECK(hochberg(std::vector<double>{}, 0.05).empty());
  CHECK_THROWS(hochberg(std::vector<double>{1.5}, 0.05));
  CHECK_THROWS(hochberg(std::vector<double>{0.5}, 0.0));
}

TEST_CASE("hochberg: alpha one and all-one edge cases") {
  CHECK(hochberg(std::vector<double>{0.2, 0.99, 0.5}, 1.0) == std::vector<bool>{true, true, true});
  CHECK(hochberg(std::vector<double>{1.0, 1.0}, 0.05) == std::vector<bool>{false, false});
  CHECK(hochberg(std::vector<double>{1.0, 1.0}, 0.99) == std::vector<bool>{false, false});
}

TEST_CASE("hochberg: matches hand step-up and is monotone under perturbation") {
  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t m = 1 + rng.uniform_index(8);
    std::vector<double> p(m);
    for (auto& x : p) x = rng.uniform01() * 0.2;
    const auto base = hochberg(p, 0.05);
    CHECK(base == oracle::ref_hochberg(p, 0.05));
    auto lowered = p;
    const std::size_t i = rng.uniform_index(m);
    lowered[i] *= rng.uniform01();
    const auto after = hochberg(lowered, 0.05);
    for (std::size_t k = 0; k < m; ++k) {
      if (base[k]) CHECK(after[k]);
    }
  }
}

TEST_CASE("parity: identical samples share parity, dominance gives a singleton") {
  SampleTable same{{"task", {{"a", {1.0, 2.0, 3.0}}, {"b", {1.0, 2.0, 3.0}}}}};
  const auto r = parity_table(same);
  REQUIRE(r.tasks.size() == 1);
  CHECK(r.tasks[0].best == "a");
  CHECK(r.tasks[0].parity == std::vector<std::string>{"a", "b"});

  SampleTable dom{{"task", {{"a", {0.0, 0.01, -0.01}}, {"b", {1.0, 1.01, 0.99}}, {"c", {0.5, 0.49, 0.51}}}}};
  const auto d = parity_table(dom);
  CHECK(d.tasks[0].best == "b");
  CHECK(d.tasks[0].parity == std::vector<std::string>{"b"});

  SampleTable lonely{{"task", {{"a", {1.0, 2.0}}}}};
  CHECK_THROWS(parity_table(lonely));
}

TEST_CASE("parity: three schedules against an independent script") {
  const std::vector<SampleSet> sets{
      {"constant-0.4", "qa", {83.79, 83.90, 83.75, 83.88, 83.83}},
      {"linear-0.3-0.15", "qa", {84.41, 84.18, 84.35, 84.22, 84.29}},
      {"constant-0.15", "qa", {83.85, 84.51, 83.88, 84.40, 83.96}},
  };
  const auto r = parity_table(sets);
  const auto& t = r.tasks.at(0);
  CHECK(t.best == "linear-0.3-0.15");
  CHECK(t.means.at("linear-0.3-0.15") == doctest::Approx(84.29).epsilon(1e-12));
  CHECK(t.means.at("constant-0.15") == doctest::Approx(84.12).epsilon(1e-12));
  CHECK(t.means.at("constant-0.4") == doctest::Approx(83.83).epsilon(1e-12));
  REQUIRE(t.comparisons.size() == 2);
  CHECK(t.comparisons[0].schedule == "constant-0.15");
  CHECK(std::abs(t.comparisons[0].p - 0.14868071722038748) <= 1e-9);
  CHECK_FALSE(t.comparisons[0].rejected);
  CHECK(t.comparisons[1].schedule == "constant-0.4");
  CHECK(std::abs(t.comparisons[1].p - 1.984338460546769e-05) <= 1e-9);
  CHECK(t.comparisons[1].rejected);
  CHECK(t.parity == std::vector<std::string>{"constant-0.15", "linear-0.3-0.15"});

  const std::string table = render_parity_table(r);
  CHECK(table.find("| constant-0.15 | **84.12** |") != std::string::npos);
  CHECK(table.find("| constant-0.4 | 83.83 |") != std::string::npos);
  CHECK(table.find("| linear-0.3-0.15 | **84.29** |") != std::string::npos);

  auto reversed = sets;
  std::reverse(reversed.begin(), reversed.end());
  CHECK(to_json(parity_table(reversed)) == to_json(r));
}

TEST_CASE("parity: best-mean ties go to the smaller name") {
  SampleTable tie{{"t", {{"zeta", {1.0, 3.0}}, {"alpha", {3.0, 1.0}}}}};
  CHECK(parity_table(tie).tasks[0].best == "alpha");
}

TEST_CASE("sample table JSON parsing") {
  const auto j = nlohmann::json::parse(R"({"mnli": {"a": [1, 2], "b": [2.5, 3]}})");
  const auto t = parse_sample_table(j);
  CHECK(t.at("mnli").at("b") == std::vector<double>{2.5, 3.0});
  CHECK_THROWS(parse_sample_table(nlohmann::json::parse("[1,2]")));
  CHECK_THROWS(parse_sample_table(nlohmann::json::parse(R"({"mnli": {"a": ["x"]}})")));
  CHECK_THROWS(parse_sample_table(nlohmann::json::parse(R"({"mnli": 3})")));
}
