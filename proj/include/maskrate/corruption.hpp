// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "maskrate/data.hpp"
#include "maskrate/rng.hpp"

namespace maskrate {

enum class Objective { mlm, rts };

struct CorruptionConfig {
  Objective objective = Objective::mlm;
  double replace_mask_frac = 0.8;
  double replace_random_frac = 0.1;
  double keep_frac = 0.1;
  /// When set, the MLM loss covers only a uniform subset of the mask of size
  /// round(fraction * maskable_count).
  std::optional<double> subset_loss_fraction;
  std::size_t min_masked = 1;

  friend bool operator==(const CorruptionConfig&, const CorruptionConfig&) = default;
};

/// Throws std::invalid_argument if the fractions are out of range or do not
/// sum to exactly 1.
void validate(const CorruptionConfig& config);

enum class MaskAction : std::uint8_t { mask_token, random_token, keep };

/// One corrupted training example.
///
/// For MLM, `labels[i]` is the original id at `loss_set[i]`. For RTS,
/// `loss_set` is every maskable position and `labels[i]` is 1 where the token
/// was substituted.
struct MaskOutcome {
  TokenSequence original;
  std::vector<TokenId> corrupted;
  std::vector<std::size_t> mask_set;
  std::vector<std::size_t> loss_set;
  std::vector<TokenId> labels;
  std::vector<MaskAction> actions;  // parallel to mask_set (MLM only)

  friend bool operator==(const MaskOutcome&, const MaskOutcome&) = default;
};

/// Positions other than [PAD], [CLS], [SEP] and [MASK].
std::vector<std::size_t> maskable_positions(const TokenSequence& seq);

/// Includes each maskable index independently with probability `rate`. An
/// empty draw with min_masked >= 1 force-includes one uniformly chosen index.
/// Throws std::invalid_argument("nothing to mask") for an empty maskable set
/// with rate > 0.
std::vector<std::size_t> sample_mask(std::span<const std::size_t> maskable, double rate,
                                     Rng& rng, std::size_t min_masked = 1);

/// 80/10/10 corruption applied i.i.d. per masked index.
MaskOutcome apply_bert_corruption(const TokenSequence& seq, std::span<const std::size_t> mask,
                                  const Vocab& vocab, Rng& rng,
                                  const CorruptionConfig& config = {});

/// Uniform random subset of `mask` with min(|mask|, max(1, round(fraction *
/// maskable_count))) elements, returned sorted.
std::vector<std::size_t> subset_loss_indices(std::span<const std::size_t> mask,
                                             std::size_t maskable_count, double target_fraction,
                                             Rng& rng);

/// Random token substitution: each maskable index is replaced with
/// probability `rate` by a regular token different from the original.
MaskOutcome apply_rts(const TokenSequence& seq, double rate, const Vocab& vocab, Rng& rng);

/// Full training-time corruption for one sequence at the scheduled rate.
MaskOutcome corrupt_sequence(const TokenSequence& seq, double rate, const Vocab& vocab,
                             const CorruptionConfig& config, Rng& rng);

}  // namespace maskrate
