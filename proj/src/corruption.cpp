// SPDX-License-Identifier: Apache-2.0
#include "maskrate/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace maskrate {

void validate(const CorruptionConfig& c) {
  for (double f : {c.replace_mask_frac, c.replace_random_frac, c.keep_frac}) {
    if (!(f >= 0.0 && f <= 1.0)) throw std::invalid_argument("corruption fraction out of [0,1]");
  }
  if (c.replace_mask_frac + c.replace_random_frac + c.keep_frac != 1.0) {
    throw std::invalid_argument("corruption fractions must sum to 1");
  }
  if (c.subset_loss_fraction && !(*c.subset_loss_fraction > 0.0 && *c.subset_loss_fraction <= 1.0)) {
    throw std::invalid_argument("subset_loss_fraction out of (0,1]");
  }
}

namespace {

bool is_maskable(TokenId id) {
  return id != Vocab::kPad && id != Vocab::kCls && id != Vocab::kSep && id != Vocab::kMask;
}

}  // namespace

std::vector<std::size_t> maskable_positions(const TokenSequence& seq) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < seq.ids.size(); ++i) {
    if (is_maskable(seq.ids[i])) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> sample_mask(std::span<const std::size_t> maskable, double rate, Rng& rng,
                                     std::size_t min_masked) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("rate out of [0,1]");
  if (maskable.empty()) {
    if (rate > 0.0) throw std::invalid_argument("nothing to mask");
    return {};
  }
  std::vector<std::size_t> mask;
  for (auto idx : maskable) {
    if (rng.bernoulli(rate)) mask.push_back(idx);
  }
  if (mask.empty() && min_masked >= 1) mask.push_back(maskable[rng.uniform_index(maskable.size())]);
  return mask;
}

namespace {

TokenId random_regular(const Vocab& vocab, Rng& rng) {
  return static_cast<TokenId>(Vocab::kNumSpecials + rng.uniform_index(vocab.num_regular()));
}

}  // namespace

MaskOutcome apply_bert_corruption(const TokenSequence& seq, std::span<const std::size_t> mask,
                                  const Vocab& vocab, Rng& rng, const CorruptionConfig& config) {
  MaskOutcome out;
  out.original = seq;
  out.corrupted = seq.ids;
  out.mask_set.assign(mask.begin(), mask.end());
  std::sort(out.mask_set.begin(), out.mask_set.end());
  for (auto pos : out.mask_set) {
    if (pos >= seq.ids.size() || !is_maskable(seq.ids[pos])) {
      throw std::invalid_argument("mask position is not maskable");
    }
  }
  if (!out.mask_set.empty() && vocab.num_regular() == 0) {
    throw std::invalid_argument("vocab has no regular tokens for random replacement");
  }
  out.actions.reserve(out.mask_set.size());
  for (auto pos : out.mask_set) {
    const double u = rng.uniform01();
    MaskAction action = MaskAction::keep;
    if (u < config.replace_mask_frac) {
      action = MaskAction::mask_token;
      out.corrupted[pos] = Vocab::kMask;
    } else if (u < config.replace_mask_frac + config.replace_random_frac) {
      action = MaskAction::random_token;
      out.corrupted[pos] = random_regular(vocab, rng);
    }
    out.actions.push_back(action);
  }
  out.loss_set = out.mask_set;
  out.labels.reserve(out.loss_set.size());
  for (auto pos : out.loss_set) out.labels.push_back(seq.ids[pos]);
  return out;
}

std::vector<std::size_t> subset_loss_indices(std::span<const std::size_t> mask,
                                             std::size_t maskable_count, double target_fraction,
                                             Rng& rng) {
  if (!(target_fraction > 0.0 && target_fraction <= 1.0)) {
    throw std::invalid_argument("target_fraction out of (0,1]");
  }
  std::vector<std::size_t> chosen(mask.begin(), mask.end());
  const auto target = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(target_fraction * static_cast<double>(maskable_count))));
  if (chosen.size() > target) {
    // Partial Fisher-Yates: the first `target` slots become a uniform subset.
    for (std::size_t i = 0; i < target; ++i) {
      std::swap(chosen[i], chosen[i + rng.uniform_index(chosen.size() - i)]);
    }
    chosen.resize(target);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

MaskOutcome apply_rts(const TokenSequence& seq, double rate, const Vocab& vocab, Rng& rng) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw std::invalid_argument("rate out of [0,1]");
  if (vocab.num_regular() < 2) throw std::invalid_argument("cannot substitute");
  MaskOutcome out;
  out.original = seq;
  out.corrupted = seq.ids;
  out.loss_set = maskable_positions(seq);
  out.labels.assign(out.loss_set.size(), 0);
  for (std::size_t i = 0; i < out.loss_set.size(); ++i) {
    const auto pos = out.loss_set[i];
    if (!rng.bernoulli(rate)) continue;
    const TokenId orig = seq.ids[pos];
    TokenId repl;
    if (Vocab::is_special(orig)) {
      repl = random_regular(vocab, rng);
    } else {
      // Uniform over the other num_regular - 1 regular ids.
      repl = static_cast<TokenId>(Vocab::kNumSpecials + rng.uniform_index(vocab.num_regular() - 1));
      if (repl >= orig) ++repl;
    }
    out.corrupted[pos] = repl;
    out.mask_set.push_back(pos);
    out.labels[i] = 1;
  }
  return out;
}

MaskOutcome corrupt_sequence(const TokenSequence& seq, double rate, const Vocab& vocab,
                             const CorruptionConfig& config, Rng& rng) {
  if (config.objective == Objective::rts) return apply_rts(seq, rate, vocab, rng);
  const auto maskable = maskable_positions(seq);
  const auto mask = sample_mask(maskable, rate, rng, config.min_masked);
  MaskOutcome out = apply_bert_corruption(seq, mask, vocab, rng, config);
  if (config.subset_loss_fraction) {
    out.loss_set = subset_loss_indices(out.mask_set, maskable.size(), *config.subset_loss_fraction, rng);
    out.labels.clear();
    for (auto pos : out.loss_set) out.labels.push_back(seq.ids[pos]);
  }
  return out;
}

}  // namespace maskrate
