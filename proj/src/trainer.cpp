// SPDX-License-Identifier: Apache-2.0
#include "maskrate/trainer.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "maskrate/rng.hpp"

namespace maskrate {

namespace {

constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kCorruptStream = 0xc022;

}  // namespace

void validate(const TrainConfig& c) {
  if (c.total_steps < 0) throw std::invalid_argument("train.total_steps must be >= 0");
  if (c.batch_size == 0) throw std::invalid_argument("train.batch_size must be >= 1");
  if (auto diag = validate(c.schedule)) throw std::invalid_argument("train.schedule: " + *diag);
  if (c.total_steps > 0 && c.schedule.total_steps != c.total_steps) {
    throw std::invalid_argument("train.schedule total_steps must equal train.total_steps");
  }
  validate(c.corruption);
  if (!(c.warmup_fraction > 0.0 && c.warmup_fraction < 1.0)) {
    throw std::invalid_argument("train.warmup_fraction must be in (0,1)");
  }
  if (!(c.peak_lr > 0.0) || !(c.final_lr >= 0.0) || c.final_lr > c.peak_lr) {
    throw std::invalid_argument("train: require 0 <= final_lr <= peak_lr and peak_lr > 0");
  }
  const auto& a = c.adamw;
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0) || !(a.beta2 >= 0.0 && a.beta2 < 1.0)) {
    throw std::invalid_argument("train: betas must be in [0,1)");
  }
  if (!(a.eps > 0.0) || !(a.weight_decay >= 0.0)) {
    throw std::invalid_argument("train: eps must be > 0 and weight_decay >= 0");
  }
  if (c.eval_every < 0 || c.checkpoint_every < 0) {
    throw std::invalid_argument("train: eval_every and checkpoint_every must be >= 0");
  }
  if (!(c.grad_clip >= 0.0)) throw std::invalid_argument("train.grad_clip must be >= 0");
}

TrainConfig with_run_schedule(TrainConfig config, const std::string& name) {
  std::string rest = name;
  config.corruption.objective = Objective::mlm;
  config.corruption.subset_loss_fraction.reset();
  bool subset = false;
  if (rest.rfind("subset-", 0) == 0) {
    subset = true;
    rest = rest.substr(7);
  } else if (rest.rfind("rts-", 0) == 0) {
    config.corruption.objective = Objective::rts;
    rest = rest.substr(4);
  }
  config.schedule = parse_schedule(rest, std::max<std::int64_t>(1, config.total_steps));
  if (subset) config.corruption.subset_loss_fraction = config.schedule.p_final;
  return config;
}

std::string run_schedule_name(const TrainConfig& config) {
  std::string prefix;
  if (config.corruption.objective == Objective::rts) prefix = "rts-";
  else if (config.corruption.subset_loss_fraction) prefix = "subset-";
  return prefix + schedule_name(config.schedule);
}

double lr_at(const TrainConfig& config, std::int64_t t) {
  if (config.total_steps < 1) throw std::invalid_argument("lr schedule needs total_steps >= 1");
  if (t < 0 || t > config.total_steps) throw std::out_of_range("step out of range");
  const double total = static_cast<double>(config.total_steps);
  const double warmup = config.warmup_fraction * total;
  const double td = static_cast<double>(t);
  if (td <= warmup) return config.peak_lr * (td / warmup);
  return config.peak_lr + (config.final_lr - config.peak_lr) * ((td - warmup) / (total - warmup));
}

Batch training_batch(const Dataset& dataset, const TrainConfig& config, std::int64_t t) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  const std::size_t per_epoch = (dataset.size() + config.batch_size - 1) / config.batch_size;
  const auto step = static_cast<std::uint64_t>(t);
  const std::uint64_t epoch = step / per_epoch;
  const std::size_t index = static_cast<std::size_t>(step % per_epoch);
  const BatchPlan plan =
      make_batch_plan(dataset.size(), config.batch_size, derive_seed(config.seed, kDataStream, epoch));
  const std::size_t begin = index * config.batch_size;
  const std::size_t end = std::min(begin + config.batch_size, dataset.size());
  return make_batch(dataset, std::span<const std::size_t>(plan.order.data() + begin, end - begin));
}

std::vector<MaskOutcome> corrupt_batch(const Dataset& dataset, const Batch& clean,
                                       const TrainConfig& config, const Vocab& vocab, double rate,
                                       std::int64_t t) {
  std::vector<MaskOutcome> outcomes;
  outcomes.reserve(clean.rows);
  for (std::size_t r = 0; r < clean.rows; ++r) {
    Rng rng(derive_seed(config.seed, kCorruptStream, static_cast<std::uint64_t>(t), r));
    outcomes.push_back(corrupt_sequence(dataset[clean.source[r]], rate, vocab, config.corruption, rng));
  }
  return outcomes;
}

std::string to_jsonl(const StepRecord& r) {
  nlohmann::json j;
  j["step"] = r.step;
  j["rate"] = r.rate;
  j["lr"] = r.lr;
  j["loss"] = r.loss;
  if (r.eval_loss) j["eval_loss"] = *r.eval_loss;
  j["wall_ms"] = r.wall_ms;
  j["maskable"] = r.maskable;
  j["masked"] = r.masked;
  j["loss_tokens"] = r.loss_tokens;
  j["loss_cap"] = r.loss_cap;
  return j.dump();
}

StepRecord parse_jsonl_record(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  StepRecord r;
  r.step = j.at("step").get<std::int64_t>();
  r.rate = j.at("rate").get<double>();
  r.lr = j.at("lr").get<double>();
  r.loss = j.at("loss").get<double>();
  if (j.contains("eval_loss")) r.eval_loss = j.at("eval_loss").get<double>();
  r.wall_ms = j.at("wall_ms").get<double>();
  r.maskable = j.value("maskable", std::size_t{0});
  r.masked = j.value("masked", std::size_t{0});
  r.loss_tokens = j.value("loss_tokens", std::size_t{0});
  r.loss_cap = j.value("loss_cap", std::size_t{0});
  return r;
}

TrainState initial_state(const ModelConfig& model) {
  TrainState s;
  s.params = init_params(model);
  s.opt = init_opt_state(s.params);
  return s;
}

namespace {

std::optional<double> evaluate(const TrainConfig& config, const ModelParams& params,
                               const TrainInputs& in) {
  if (in.eval.empty()) return std::nullopt;
  if (config.corruption.objective == Objective::rts) {
    return eval_rts(params, in.eval, in.vocab, in.eval_config).mean_loss;
  }
  return eval_mlm(params, in.eval, in.vocab, in.eval_config).mean_loss;
}

}  // namespace

TrainResult train(const TrainConfig& config, TrainState state, const TrainInputs& in,
                  std::optional<std::int64_t> stop_at, const TrainCallbacks& callbacks) {
  validate(config);
  if (state.params.config.vocab_size != in.vocab.size()) {
    throw std::invalid_argument("model vocab_size does not match the vocab");
  }
  TrainResult result;
  const std::int64_t end = std::min(config.total_steps, stop_at.value_or(config.total_steps));
  if (state.step >= end) {
    result.state = std::move(state);
    return result;
  }
  if (in.train.empty()) throw std::invalid_argument("empty dataset");
  if (state.step == 0) result.initial_eval_loss = evaluate(config, state.params, in);

  const Objective objective = config.corruption.objective;
  for (std::int64_t t = state.step; t < end; ++t) {
    const auto started = std::chrono::steady_clock::now();
    StepRecord rec;
    rec.step = t;
    rec.rate = masking_rate(config.schedule, t);
    rec.lr = lr_at(config, t);

    const Batch clean = training_batch(in.train, config, t);
    const auto outcomes = corrupt_batch(in.train, clean, config, in.vocab, rec.rate, t);
    for (const auto& o : outcomes) {
      const std::size_t maskable = maskable_positions(o.original).size();
      rec.maskable += maskable;
      rec.masked += o.mask_set.size();
      rec.loss_tokens += o.loss_set.size();
      if (config.corruption.subset_loss_fraction) {
        rec.loss_cap += std::max<std::size_t>(
            1, static_cast<std::size_t>(std::llround(*config.corruption.subset_loss_fraction *
                                                      static_cast<double>(maskable))));
      }
    }
    const Batch input = corrupted_batch(clean, outcomes);
    const Targets targets = collect_targets(objective, outcomes, clean.cols);

    LossAndGrad lg = backward(state.params, input, targets);
    if (!std::isfinite(lg.loss)) {
      throw DivergenceError(fmt::format("diverged: non-finite loss at step {}", t), t);
    }
    if (config.grad_clip > 0.0) {
      const double norm = global_norm(lg.grads);
      if (norm > config.grad_clip) {
        const double s = config.grad_clip / norm;
        for_each_matrix(lg.grads, [s](Matrix& m, TensorRole) {
          for (auto& x : m.data) x *= s;
        });
      }
    }
    try {
      adamw_step(state.params, lg.grads, state.opt, rec.lr, config.adamw);
    } catch (const DivergenceError& e) {
      throw DivergenceError(fmt::format("{} at step {}", e.what(), t), t);
    }
    rec.loss = lg.loss;
    state.step = t + 1;

    const bool last = state.step == config.total_steps;
    if (last || (config.eval_every > 0 && state.step % config.eval_every == 0)) {
      rec.eval_loss = evaluate(config, state.params, in);
      if (last) result.final_eval_loss = rec.eval_loss;
    }
    if (config.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started).count();
    }
    result.metrics.records.push_back(rec);
    if (callbacks.on_record) callbacks.on_record(rec);
    if (callbacks.on_checkpoint &&
        (last || (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0))) {
      callbacks.on_checkpoint(state);
    }
  }
  result.state = std::move(state);
  return result;
}

}  // namespace maskrate
