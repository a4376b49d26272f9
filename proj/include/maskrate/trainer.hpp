// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "maskrate/corruption.hpp"
#include "maskrate/data.hpp"
#include "maskrate/evaluate.hpp"
#include "maskrate/model.hpp"
#include "maskrate/optimizer.hpp"
#include "maskrate/schedule.hpp"

namespace maskrate {

struct TrainConfig {
  std::int64_t total_steps = 0;
  std::size_t batch_size = 16;
  ScheduleSpec schedule;
  CorruptionConfig corruption;
  double peak_lr = 5e-4;
  double final_lr = 1e-5;
  double warmup_fraction = 0.06;
  AdamWConfig adamw;
  std::uint64_t seed = 0;
  std::int64_t eval_every = 0;        // 0 = only after the final step
  std::int64_t checkpoint_every = 0;  // 0 = only after the final step
  double grad_clip = 0.0;             // global-norm clip; 0 = off
  bool record_wall_time = false;      // wall_ms is logged as 0 when off

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws std::invalid_argument naming the violated field.
void validate(const TrainConfig& config);

/// Objective prefix of a run schedule string: "subset-linear-0.3-0.15"
/// selects the subset-loss ablation (loss fraction = p_final), "rts-..." the
/// token-substitution objective. Returns the config with schedule, objective
/// and subset fraction set.
TrainConfig with_run_schedule(TrainConfig config, const std::string& name);

/// Canonical run schedule string including any objective prefix.
std::string run_schedule_name(const TrainConfig& config);

/// Linear warmup from 0 to peak_lr over warmup_fraction * total_steps, then
/// linear decay to final_lr at total_steps.
double lr_at(const TrainConfig& config, std::int64_t t);

/// The clean batch consumed at step t: the dataset is cycled epoch by epoch,
/// each epoch shuffled with a seed derived from (config.seed, epoch).
Batch training_batch(const Dataset& dataset, const TrainConfig& config, std::int64_t t);

/// Corrupts every row of `clean` at `rate` with per-sequence seeds derived
/// from (config.seed, t, row).
std::vector<MaskOutcome> corrupt_batch(const Dataset& dataset, const Batch& clean,
                                       const TrainConfig& config, const Vocab& vocab,
                                       double rate, std::int64_t t);

struct StepRecord {
  std::int64_t step = 0;
  double rate = 0.0;
  double lr = 0.0;
  double loss = 0.0;
  std::optional<double> eval_loss;
  double wall_ms = 0.0;
  std::size_t maskable = 0;     // maskable positions in the batch
  std::size_t masked = 0;       // |mask set| (substituted tokens for RTS)
  std::size_t loss_tokens = 0;  // positions the loss is defined over
  std::size_t loss_cap = 0;     // subset mode: sum of per-sequence caps

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct RunMetrics {
  std::vector<StepRecord> records;
};

/// One JSON object per line.
std::string to_jsonl(const StepRecord& record);
StepRecord parse_jsonl_record(const std::string& line);

struct TrainState {
  ModelParams params;
  OptState opt;
  std::int64_t step = 0;  // number of updates applied

  friend bool operator==(const TrainState&, const TrainState&) = default;
};

TrainState initial_state(const ModelConfig& model);

struct TrainCallbacks {
  std::function<void(const StepRecord&)> on_record;
  std::function<void(const TrainState&)> on_checkpoint;
};

struct TrainResult {
  RunMetrics metrics;
  TrainState state;
  std::optional<double> initial_eval_loss;
  std::optional<double> final_eval_loss;
};

struct TrainInputs {
  const Dataset& train;
  const Dataset& eval;  // may be empty: no evaluation
  const Vocab& vocab;
  const EvalConfig& eval_config;
};

/// Runs updates state.step .. min(stop_at, total_steps) - 1. Deterministic
/// given the config; a run split at any step and resumed from its state is
/// bit-identical to an uninterrupted one. Throws DivergenceError on a
/// non-finite loss or gradient.
TrainResult train(const TrainConfig& config, TrainState state, const TrainInputs& inputs,
                  std::optional<std::int64_t> stop_at = std::nullopt,
                  const TrainCallbacks& callbacks = {});

}  // namespace maskrate
