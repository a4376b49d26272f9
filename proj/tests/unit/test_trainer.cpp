// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <stdexcept>

#include <cmath>
#include <sstream>

#include "maskrate/checkpoint.hpp"
#include "maskrate/trainer.hpp"

using namespace maskrate;

namespace {

struct Fixture {
  Vocab vocab;
  Dataset data;
  ModelConfig model;
  TrainConfig train;
  EvalConfig eval;

  Fixture() {
    ToyCorpusConfig tc;
    tc.n_types = 30;
    tc.n_lines = 40;
    tc.min_len = 4;
    tc.max_len = 8;
    const auto lines = make_toy_corpus(tc);
    vocab = build_vocab(lines, 40);
    data = encode_all(vocab, lines, 10);
    model.n_layers = 1;
    model.n_heads = 2;
    model.d_model = 8;
    model.d_ff = 16;
    model.vocab_size = vocab.size();
    model.max_seq_len = 10;
    model.init_seed = 5;
    train = with_run_schedule(train, "linear-0.3-0.15");
    train.total_steps = 12;
    train.schedule.total_steps = 12;
    train.batch_size = 6;
    train.seed = 17;
    train.eval_every = 4;
    train.checkpoint_every = 6;
    eval.n_batches = 2;
    eval.batch_size = 8;
  }

  TrainResult run(TrainState s, std::optional<std::int64_t> stop = std::nullopt, TrainCallbacks cb = {}) const {
    return maskrate::train(train, std::move(s), TrainInputs{data, data, vocab, eval}, stop, cb);
  }
};

std::string jsonl(const RunMetrics& m) {
  std::string out;
  for (const auto& r : m.records) out += to_jsonl(r) + "\n";
  return out;
}

std::string ckpt_bytes(const TrainState& s, const Fixture& f) {
  std::ostringstream o;
  write_checkpoint(Checkpoint{s.params, s.opt, f.train, s.step, f.train.seed, f.vocab}, o);
  return o.str();
}

}  // namespace

TEST_CASE("lr schedule: zero start, peak after warmup, final at the end") {
  TrainConfig c;
  c.total_steps = 1000;
  c.schedule = constant_schedule(0.15, 1000);
  CHECK(lr_at(c, 0) == 0.0);
  CHECK(lr_at(c, 60) == doctest::Approx(5e-4).epsilon(1e-15));
  CHECK(lr_at(c, 1000) == doctest::Approx(1e-5).epsilon(1e-12));
  CHECK(lr_at(c, 30) == doctest::Approx(2.5e-4).epsilon(1e-12));
  for (std::int64_t t = 61; t <= 1000; ++t) CHECK(lr_at(c, t) <= lr_at(c, t - 1));
  CHECK_THROWS_AS(lr_at(c, 1001), std::out_of_range);
  CHECK_THROWS_AS(lr_at(c, -1), std::out_of_range);
}

TEST_CASE("defaults") {
  const TrainConfig c;
  CHECK(c.peak_lr == 5e-4);
  CHECK(c.final_lr == 1e-5);
  CHECK(c.warmup_fraction == 0.06);
  CHECK(c.adamw.beta1 == 0.9);
  CHECK(c.adamw.beta2 == 0.98);
  CHECK(c.adamw.eps == 1e-6);
  CHECK(c.adamw.weight_decay == 1e-5);
  CHECK(c.grad_clip == 0.0);
}

TEST_CASE("run schedule strings select objective and subset mode") {
  TrainConfig c;
  c.total_steps = 100;
  auto s = with_run_schedule(c, "subset-linear-0.3-0.15");
  CHECK(s.schedule == linear_schedule(0.3, 0.15, 100));
  CHECK(s.corruption.subset_loss_fraction == std::optional<double>(0.15));
  CHECK(run_schedule_name(s) == "subset-linear-0.3-0.15");
  auto r = with_run_schedule(c, "rts-cosine-0.3-0.15");
  CHECK(r.corruption.objective == Objective::rts);
  CHECK(run_schedule_name(r) == "rts-cosine-0.3-0.15");
  auto k = with_run_schedule(c, "step-0.3-0.15");
  CHECK(k.schedule.decay_steps == std::vector<std::int64_t>{50});
  CHECK_THROWS(with_run_schedule(c, "linear-0.3"));
}

TEST_CASE("zero steps: immediate return with the initial state") {
  Fixture f;
  f.train.total_steps = 0;
  f.train.schedule.total_steps = 1;
  f.train = with_run_schedule(f.train, "constant-0.15");
  const auto s0 = initial_state(f.model);
  const auto r = f.run(s0);
  CHECK(r.metrics.records.empty());
  CHECK(r.state == s0);
}

TEST_CASE("metrics: logged rate and lr are the closed forms; counters consistent") {
  Fixture f;
  const auto r = f.run(initial_state(f.model));
  REQUIRE(r.metrics.records.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) {
    const auto& rec = r.metrics.records[i];
    CHECK(rec.step == static_cast<std::int64_t>(i));
    CHECK(rec.rate == masking_rate(f.train.schedule, rec.step));
    CHECK(rec.lr == lr_at(f.train, rec.step));
    CHECK(std::isfinite(rec.loss));
    CHECK(rec.masked >= 1);
    CHECK(rec.loss_tokens == rec.masked);
    CHECK(rec.wall_ms == 0.0);
    CHECK(rec.eval_loss.has_value() == ((rec.step + 1) % 4 == 0));
  }
  CHECK(r.initial_eval_loss.has_value());
  CHECK(r.final_eval_loss == r.metrics.records.back().eval_loss);
  CHECK(r.state.step == 12);
}

TEST_CASE("determinism: identical runs and split-resume are bit-identical") {
  Fixture f;
  const auto a = f.run(initial_state(f.model));
  const auto b = f.run(initial_state(f.model));
  CHECK(jsonl(a.metrics) == jsonl(b.metrics));
  CHECK(ckpt_bytes(a.state, f) == ckpt_bytes(b.state, f));

  const auto first = f.run(initial_state(f.model), 5);
  CHECK(first.state.step == 5);
  // through the checkpoint format, as a resumed process would
  std::stringstream ss(ckpt_bytes(first.state, f));
  Checkpoint ck = read_checkpoint(ss);
  TrainState resumed{ck.params, *ck.opt, ck.step};
  const auto second = f.run(resumed);
  RunMetrics joined = first.metrics;
  joined.records.insert(joined.records.end(), second.metrics.records.begin(), second.metrics.records.end());
  CHECK(jsonl(joined) == jsonl(a.metrics));
  CHECK(ckpt_bytes(second.state, f) == ckpt_bytes(a.state, f));

  const auto noop = f.run(a.state);
  CHECK(noop.metrics.records.empty());
  CHECK(noop.state == a.state);
}

TEST_CASE("checkpoint callback fires on schedule and at the end") {
  Fixture f;
  f.train.total_steps = 13;
  f.train.schedule.total_steps = 13;
  std::vector<std::int64_t> steps;
  TrainCallbacks cb;
  cb.on_checkpoint = [&](const TrainState& s) { steps.push_back(s.step); };
  f.run(initial_state(f.model), std::nullopt, cb);
  CHECK(steps == std::vector<std::int64_t>{6, 12, 13});
}

TEST_CASE("subset mode caps the loss set") {
  Fixture f;
  f.train = with_run_schedule(f.train, "subset-linear-0.3-0.15");
  const auto r = f.run(initial_state(f.model));
  for (const auto& rec : r.metrics.records) {
    CHECK(rec.loss_tokens <= rec.loss_cap);
    CHECK(rec.loss_tokens <= rec.masked);
  }
}

TEST_CASE("rts objective trains with finite losses") {
  Fixture f;
  f.train = with_run_schedule(f.train, "rts-linear-0.3-0.15");
  const auto r = f.run(initial_state(f.model));
  for (const auto& rec : r.metrics.records) {
    CHECK(std::isfinite(rec.loss));
    CHECK(rec.loss_tokens == rec.maskable);
  }
}

TEST_CASE("non-finite parameters halt with the offending step") {
  Fixture f;
  auto s = initial_state(f.model);
  s.params.mlm_bias.data[0] = std::nan("");
  try {
    f.run(s);
    FAIL("expected divergence");
  } catch (const DivergenceError& e) {
    CHECK(e.step() == 0);
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("weight decay alone shrinks parameters geometrically") {
  Fixture f;
  ModelParams p = init_params(f.model);
  OptState opt = init_opt_state(p);
  AdamWConfig cfg;
  cfg.weight_decay = 0.1;
  const double x0 = p.layers[0].w1.data[2];
  for (int k = 1; k <= 5; ++k) {
    adamw_step(p, zeros_like(p), opt, 0.01, cfg);
    CHECK(p.layers[0].w1.data[2] == doctest::Approx(x0 * std::pow(1.0 - 0.001, k)).epsilon(1e-14));
  }
}

TEST_CASE("jsonl records round-trip") {
  StepRecord r;
  r.step = 41;
  r.rate = 0.1 + 0.2;
  r.lr = 1.0 / 3.0;
  r.loss = 5.123456789012345;
  r.eval_loss = 4.0000000000000009;
  r.maskable = 300;
  r.masked = 91;
  r.loss_tokens = 45;
  r.loss_cap = 45;
  CHECK(parse_jsonl_record(to_jsonl(r)) == r);
  r.eval_loss.reset();
  CHECK(parse_jsonl_record(to_jsonl(r)) == r);
  CHECK(to_jsonl(r).find('\n') == std::string::npos);
}

TEST_CASE("config validation names the field") {
  TrainConfig c;
  c.total_steps = 10;
  c.schedule = constant_schedule(0.15, 10);
  CHECK_NOTHROW(validate(c));
  c.warmup_fraction = 0.0;
  CHECK_THROWS_WITH(validate(c), doctest::Contains("warmup_fraction"));
  c.warmup_fraction = 0.06;
  c.final_lr = 1.0;
  CHECK_THROWS(validate(c));
}

TEST_CASE("checkpoint format: header, tensor table, corruption detection") {
  Fixture f;
  const auto s = f.run(initial_state(f.model), 3).state;
  const std::string bytes = ckpt_bytes(s, f);
  CHECK(bytes.substr(0, 8) == "MRCKPT01");
  std::stringstream ss(bytes);
  const auto ck = read_checkpoint(ss);
  CHECK(ck.params == s.params);
  CHECK(*ck.opt == s.opt);
  CHECK(ck.step == 3);
  CHECK(ck.vocab == f.vocab);
  CHECK(*ck.train == f.train);
  std::stringstream truncated(bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS(read_checkpoint(truncated));
  std::stringstream garbage("not a checkpoint at all");
  CHECK_THROWS(read_checkpoint(garbage));
}
