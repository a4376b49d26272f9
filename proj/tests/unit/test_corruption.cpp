// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <stdexcept>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "maskrate/corruption.hpp"
#include "maskrate/rng.hpp"

using namespace maskrate;

namespace {

Vocab vocab_of(std::size_t n_regular) {
  std::vector<std::string> toks{"[PAD]", "[MASK]", "[CLS]", "[SEP]", "[UNK]"};
  for (std::size_t i = 0; i < n_regular; ++i) toks.push_back("t" + std::to_string(i));
  return Vocab::from_tokens(toks);
}

TokenSequence seq_of(std::size_t n_body, std::size_t vocab_size, std::uint64_t seed) {
  Rng rng(seed);
  TokenSequence s{{Vocab::kCls}};
  for (std::size_t i = 0; i < n_body; ++i) s.ids.push_back(static_cast<TokenId>(5 + rng.uniform_index(vocab_size - 5)));
  s.ids.push_back(Vocab::kSep);
  return s;
}

std::vector<std::size_t> range(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

}  // namespace

TEST_CASE("maskable positions exclude specials except [UNK]") {
  TokenSequence s{{Vocab::kCls, 7, Vocab::kUnk, Vocab::kMask, 9, Vocab::kSep, Vocab::kPad}};
  CHECK(maskable_positions(s) == std::vector<std::size_t>{1, 2, 4});
}

TEST_CASE("sample_mask edge cases") {
  Rng rng(1);
  const auto m = range(10);
  CHECK(sample_mask(m, 0.0, rng, 0).empty());
  CHECK(sample_mask(m, 1.0, rng) == m);
  const auto forced = sample_mask(m, 0.0, rng, 1);
  CHECK(forced.size() == 1);
  const std::vector<std::size_t> none;
  CHECK_THROWS_WITH_AS(sample_mask(none, 0.3, rng), "nothing to mask", std::invalid_argument);
  CHECK(sample_mask(none, 0.0, rng, 0).empty());
  CHECK_THROWS(sample_mask(m, 1.5, rng));
}

TEST_CASE("sample_mask: 10^6 Bernoulli(0.3) trials within 3 sigma, same law as an independent sampler") {
  Rng rng(2024);
  const auto m = range(1000);
  std::size_t hits = 0;
  for (int rep = 0; rep < 1000; ++rep) hits += sample_mask(m, 0.3, rng, 0).size();
  const double n = 1e6, sigma = std::sqrt(0.3 * 0.7 / n);
  CHECK(std::abs(hits / n - 0.3) <= 3 * sigma);
  // independent sampler: threshold on raw 64-bit words
  std::mt19937_64 eng(77);
  std::size_t ref = 0;
  for (int i = 0; i < 1000000; ++i) ref += static_cast<double>(eng()) < 0.3 * 18446744073709551616.0;
  CHECK(std::abs(ref / n - 0.3) <= 3 * sigma);
  CHECK(std::abs(static_cast<double>(hits) - static_cast<double>(ref)) / n <= 3 * std::sqrt(2.0) * sigma);
}

TEST_CASE("80/10/10 action proportions over 10^6 masked tokens") {
  const Vocab v = vocab_of(50);
  Rng rng(5);
  std::size_t counts[3] = {0, 0, 0};
  std::size_t total = 0, special_draws = 0;
  while (total < 1000000) {
    const auto s = seq_of(100, v.size(), total);
    const auto m = maskable_positions(s);
    const auto out = apply_bert_corruption(s, m, v, rng);
    REQUIRE(out.actions.size() == m.size());
    for (std::size_t i = 0; i < m.size(); ++i) {
      ++counts[static_cast<int>(out.actions[i])];
      const TokenId c = out.corrupted[m[i]];
      if (out.actions[i] == MaskAction::mask_token) CHECK(c == Vocab::kMask);
      if (out.actions[i] == MaskAction::keep) CHECK(c == s.ids[m[i]]);
      if (out.actions[i] == MaskAction::random_token) special_draws += Vocab::is_special(c);
    }
    total += m.size();
  }
  CHECK(special_draws == 0);
  const double n = static_cast<double>(total);
  const double p[3] = {0.8, 0.1, 0.1};
  for (int k = 0; k < 3; ++k) {
    CHECK(std::abs(counts[k] / n - p[k]) <= 3 * std::sqrt(p[k] * (1 - p[k]) / n));
  }
}

TEST_CASE("bert corruption: empty mask and invariants") {
  const Vocab v = vocab_of(20);
  Rng rng(9);
  const auto s = seq_of(12, v.size(), 3);
  const auto none = apply_bert_corruption(s, {}, v, rng);
  CHECK(none.corrupted == s.ids);
  CHECK(none.loss_set.empty());

  const std::vector<std::size_t> m{1, 4, 7};
  const auto out = apply_bert_corruption(s, m, v, rng);
  CHECK(out.mask_set == m);
  CHECK(out.loss_set == m);
  for (std::size_t i = 0; i < s.ids.size(); ++i) {
    if (std::find(m.begin(), m.end(), i) == m.end()) CHECK(out.corrupted[i] == s.ids[i]);
  }
  CHECK(out.labels == std::vector<TokenId>{s.ids[1], s.ids[4], s.ids[7]});
  CHECK(out.corrupted.front() == Vocab::kCls);
  CHECK(out.corrupted.back() == Vocab::kSep);
  const std::vector<std::size_t> bad{0};
  CHECK_THROWS(apply_bert_corruption(s, bad, v, rng));
}

TEST_CASE("subset_loss_indices sizes") {
  Rng rng(11);
  const auto m30 = range(30);
  const auto sub = subset_loss_indices(m30, 100, 0.15, rng);
  CHECK(sub.size() == 15);
  CHECK(std::is_sorted(sub.begin(), sub.end()));
  CHECK(std::includes(m30.begin(), m30.end(), sub.begin(), sub.end()));
  const auto m10 = range(10);
  CHECK(subset_loss_indices(m10, 100, 0.15, rng) == m10);
  CHECK(subset_loss_indices(m30, 100, 1.0, rng) == m30);
  CHECK_THROWS(subset_loss_indices(m30, 100, 0.0, rng));
}

TEST_CASE("subset_loss_indices is uniform over the mask") {
  Rng rng(12);
  const auto m = range(20);
  std::vector<int> hits(20, 0);
  const int reps = 20000;
  for (int r = 0; r < reps; ++r) {
    for (auto i : subset_loss_indices(m, 40, 0.15, rng)) ++hits[i];  // size 6 of 20
  }
  const double p = 6.0 / 20.0, sigma = std::sqrt(p * (1 - p) / reps);
  for (int h : hits) CHECK(std::abs(h / double(reps) - p) <= 4.5 * sigma);
}

TEST_CASE("rts substitution") {
  const Vocab v = vocab_of(30);
  Rng rng(13);
  const auto s = seq_of(20, v.size(), 4);
  const auto zero = apply_rts(s, 0.0, v, rng);
  CHECK(zero.corrupted == s.ids);
  CHECK(std::all_of(zero.labels.begin(), zero.labels.end(), [](TokenId l) { return l == 0; }));
  CHECK(zero.loss_set == maskable_positions(s));

  const auto all = apply_rts(s, 1.0, v, rng);
  for (std::size_t i = 0; i < all.loss_set.size(); ++i) {
    const auto p = all.loss_set[i];
    CHECK(all.labels[i] == 1);
    CHECK(all.corrupted[p] != s.ids[p]);
    CHECK_FALSE(Vocab::is_special(all.corrupted[p]));
  }
  CHECK(all.corrupted.front() == Vocab::kCls);

  const Vocab one = vocab_of(1);
  CHECK_THROWS_WITH_AS(apply_rts(seq_of(3, one.size(), 1), 0.5, one, rng), "cannot substitute", std::invalid_argument);
}

TEST_CASE("rts: label-1 fraction at 0.3 over 10^6 positions") {
  const Vocab v = vocab_of(40);
  Rng rng(14);
  std::size_t ones = 0, total = 0;
  while (total < 1000000) {
    const auto out = apply_rts(seq_of(200, v.size(), total + 1), 0.3, v, rng);
    for (auto l : out.labels) ones += l;
    total += out.labels.size();
  }
  const double n = static_cast<double>(total);
  CHECK(std::abs(ones / n - 0.3) <= 3 * std::sqrt(0.21 / n));
}

TEST_CASE("corrupt_sequence is deterministic and honors subset mode") {
  const Vocab v = vocab_of(30);
  const auto s = seq_of(40, v.size(), 5);
  CorruptionConfig cfg;
  Rng a(21), b(21);
  CHECK(corrupt_sequence(s, 0.3, v, cfg, a) == corrupt_sequence(s, 0.3, v, cfg, b));

  cfg.subset_loss_fraction = 0.15;
  Rng c(22);
  for (int i = 0; i < 200; ++i) {
    const auto out = corrupt_sequence(s, 0.3, v, cfg, c);
    CHECK(out.loss_set.size() <= std::size_t(std::llround(0.15 * 40)));
    CHECK(std::includes(out.mask_set.begin(), out.mask_set.end(), out.loss_set.begin(), out.loss_set.end()));
    CHECK(out.labels.size() == out.loss_set.size());
  }
  CorruptionConfig rts;
  rts.objective = Objective::rts;
  Rng d(23);
  const auto r = corrupt_sequence(s, 0.3, v, rts, d);
  CHECK(r.loss_set.size() == 40);
}

TEST_CASE("corruption config validation") {
  CorruptionConfig c;
  CHECK_NOTHROW(validate(c));
  c.keep_frac = 0.2;
  CHECK_THROWS(validate(c));
  c = {};
  c.subset_loss_fraction = 0.0;
  CHECK_THROWS(validate(c));
}
