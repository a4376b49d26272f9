// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "maskrate/data.hpp"
#include "maskrate/model.hpp"

namespace maskrate {

struct EvalConfig {
  double rate = 0.15;
  std::uint64_t seed = 1234;
  std::size_t n_batches = 0;  // 0 = every batch of the eval set
  std::size_t batch_size = 16;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

void validate(const EvalConfig& config);

struct EvalResult {
  double mean_loss = 0.0;
  std::size_t n_batches = 0;
  std::size_t n_targets = 0;
  /// FNV-1a digest of every (sequence index, corrupted ids, loss positions);
  /// equal hashes mean two evaluations scored identical masks.
  std::uint64_t mask_hash = 0;
};

/// Fixed-rate MLM evaluation: the eval set is walked in order, each sequence
/// is corrupted with 80/10/10 at cfg.rate using a seed derived from
/// (cfg.seed, sequence index), and the per-batch mean NLLs are averaged.
EvalResult eval_mlm(const ModelParams& params, const Dataset& dataset, const Vocab& vocab,
                    const EvalConfig& cfg);

/// Same protocol for the token-substitution objective (mean BCE).
EvalResult eval_rts(const ModelParams& params, const Dataset& dataset, const Vocab& vocab,
                    const EvalConfig& cfg);

/// Pseudo-log-likelihood: the sum over maskable positions of the log
/// probability of the original token when only that position is [MASK].
double pll(const ModelParams& params, const TokenSequence& sentence);

struct MinimalPair {
  std::string pair_id;
  std::string super_task;
  std::string good;
  std::string bad;
};

/// TSV with header pair_id, super_task, sentence_good, sentence_bad.
std::vector<MinimalPair> read_minimal_pairs(std::istream& in);

struct TaskAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct PairReport {
  std::map<std::string, TaskAccuracy> per_task;
  double overall = 0.0;  // unweighted mean over super-tasks
  std::size_t n_pairs = 0;
};

/// A pair counts as correct iff pll(good) > pll(bad); ties are incorrect.
PairReport minimal_pair_accuracy(const ModelParams& params, const Vocab& vocab,
                                 std::span<const MinimalPair> pairs, std::size_t max_len);

/// Same rule applied to precomputed scores (good, bad) per pair.
PairReport score_pairs(std::span<const MinimalPair> pairs,
                       std::span<const std::pair<double, double>> scores);

}  // namespace maskrate
