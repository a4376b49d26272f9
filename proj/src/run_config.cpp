// SPDX-License-Identifier: Apache-2.0
#include "maskrate/run_config.hpp"

#include <set>

#include <fmt/format.h>

namespace maskrate {

using nlohmann::json;

namespace {

// Reads typed fields from one JSON object and rejects anything unread.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(fmt::format("{}: expected an object", where()));
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(fmt::format("{}: {}", field(key), e.what()));
    }
  }

  template <typename T>
  void get_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!j_.contains(key) || j_.at(key).is_null()) {
      if (j_.contains(key)) out.reset();
      return;
    }
    T v{};
    get(key, v);
    out = v;
  }

  const json* child(const char* key) {
    seen_.insert(key);
    return j_.contains(key) ? &j_.at(key) : nullptr;
  }

  void finish() const {
    for (const auto& [k, v] : j_.items()) {
      if (!seen_.count(k)) throw ConfigError(fmt::format("{}: unknown key", field(k.c_str())));
    }
  }

  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }
  std::string where() const { return path_.empty() ? "config" : path_; }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Fn>
void wrap(const std::string& path, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(fmt::format("{}: {}", path, e.what()));
  }
}

std::string objective_name(Objective o) { return o == Objective::rts ? "rts" : "mlm"; }

json schedule_to_json(const ScheduleSpec& s) {
  const std::string name = schedule_name(s);
  bool canonical = false;
  try {
    canonical = parse_schedule(name, s.total_steps) == s;
  } catch (const std::exception&) {
  }
  if (canonical) return name;
  return json{{"kind", std::string(to_string(s.kind))},
              {"p_initial", s.p_initial},
              {"p_final", s.p_final},
              {"decay_steps", s.decay_steps},
              {"gamma", s.gamma}};
}

}  // namespace

json model_config_to_json(const ModelConfig& c, bool include_vocab) {
  json j{{"n_layers", c.n_layers},       {"n_heads", c.n_heads},
         {"d_model", c.d_model},         {"d_ff", c.d_ff},
         {"max_seq_len", c.max_seq_len}, {"init_seed", c.init_seed},
         {"init_std", c.init_std}};
  if (include_vocab) j["vocab_size"] = c.vocab_size;
  return j;
}

ModelConfig model_config_from_json(const json& j, bool include_vocab) {
  ModelConfig c;
  Reader r(j, "model");
  r.get("n_layers", c.n_layers);
  r.get("n_heads", c.n_heads);
  r.get("d_model", c.d_model);
  r.get("d_ff", c.d_ff);
  r.get("max_seq_len", c.max_seq_len);
  r.get("init_seed", c.init_seed);
  r.get("init_std", c.init_std);
  if (include_vocab) r.get("vocab_size", c.vocab_size);
  r.finish();
  if (c.max_seq_len < 3) throw ConfigError("model.max_seq_len: must be >= 3");
  wrap("model", [&] { validate(c); });
  return c;
}

json train_config_to_json(const TrainConfig& c) {
  json j;
  j["total_steps"] = c.total_steps;
  j["batch_size"] = c.batch_size;
  j["schedule"] = schedule_to_json(c.schedule);
  j["objective"] = objective_name(c.corruption.objective);
  j["subset_loss_fraction"] =
      c.corruption.subset_loss_fraction ? json(*c.corruption.subset_loss_fraction) : json(nullptr);
  j["min_masked"] = c.corruption.min_masked;
  j["peak_lr"] = c.peak_lr;
  j["final_lr"] = c.final_lr;
  j["warmup_fraction"] = c.warmup_fraction;
  j["beta1"] = c.adamw.beta1;
  j["beta2"] = c.adamw.beta2;
  j["eps"] = c.adamw.eps;
  j["weight_decay"] = c.adamw.weight_decay;
  j["seed"] = c.seed;
  j["eval_every"] = c.eval_every;
  j["checkpoint_every"] = c.checkpoint_every;
  j["grad_clip"] = c.grad_clip;
  j["record_wall_time"] = c.record_wall_time;
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig c;
  Reader r(j, "train");
  r.get("total_steps", c.total_steps);
  r.get("batch_size", c.batch_size);
  r.get("min_masked", c.corruption.min_masked);
  r.get("peak_lr", c.peak_lr);
  r.get("final_lr", c.final_lr);
  r.get("warmup_fraction", c.warmup_fraction);
  r.get("beta1", c.adamw.beta1);
  r.get("beta2", c.adamw.beta2);
  r.get("eps", c.adamw.eps);
  r.get("weight_decay", c.adamw.weight_decay);
  r.get("seed", c.seed);
  r.get("eval_every", c.eval_every);
  r.get("checkpoint_every", c.checkpoint_every);
  r.get("grad_clip", c.grad_clip);
  r.get("record_wall_time", c.record_wall_time);
  if (c.total_steps < 0) throw ConfigError("train.total_steps: must be >= 0");
  const std::int64_t horizon = std::max<std::int64_t>(1, c.total_steps);

  const json* sched = r.child("schedule");
  if (!sched) throw ConfigError("train.schedule: required");
  if (sched->is_string()) {
    wrap("train.schedule", [&] {
      const auto min_masked = c.corruption.min_masked;
      c = with_run_schedule(c, sched->get<std::string>());
      c.corruption.min_masked = min_masked;
    });
  } else {
    ScheduleSpec s;
    std::string kind = "step";
    Reader sr(*sched, "train.schedule");
    sr.get("kind", kind);
    sr.get("p_initial", s.p_initial);
    sr.get("p_final", s.p_final);
    sr.get("decay_steps", s.decay_steps);
    sr.get("gamma", s.gamma);
    sr.finish();
    if (kind == "constant") s.kind = ScheduleKind::constant;
    else if (kind == "linear") s.kind = ScheduleKind::linear;
    else if (kind == "cosine") s.kind = ScheduleKind::cosine;
    else if (kind == "step") s.kind = ScheduleKind::step;
    else throw ConfigError(fmt::format("train.schedule.kind: unknown kind '{}'", kind));
    s.total_steps = horizon;
    if (auto diag = validate(s)) throw ConfigError("train.schedule: " + *diag);
    c.schedule = s;
  }

  std::string objective;
  r.get("objective", objective);
  if (!objective.empty()) {
    if (objective == "rts") c.corruption.objective = Objective::rts;
    else if (objective == "mlm") c.corruption.objective = Objective::mlm;
    else throw ConfigError(fmt::format("train.objective: unknown objective '{}'", objective));
  }
  if (j.contains("subset_loss_fraction")) r.get_optional("subset_loss_fraction", c.corruption.subset_loss_fraction);
  else r.child("subset_loss_fraction");
  r.finish();
  if (c.corruption.objective == Objective::rts && c.corruption.subset_loss_fraction) {
    throw ConfigError("train.subset_loss_fraction: not applicable to the rts objective");
  }
  wrap("train", [&] { validate(c); });
  return c;
}

json eval_config_to_json(const EvalConfig& c) {
  return json{{"rate", c.rate}, {"seed", c.seed}, {"n_batches", c.n_batches}, {"batch_size", c.batch_size}};
}

EvalConfig eval_config_from_json(const json& j) {
  EvalConfig c;
  Reader r(j, "eval");
  r.get("rate", c.rate);
  r.get("seed", c.seed);
  r.get("n_batches", c.n_batches);
  r.get("batch_size", c.batch_size);
  r.finish();
  wrap("eval", [&] { validate(c); });
  return c;
}

RunConfig parse_run_config(const json& j) {
  RunConfig c;
  Reader r(j, "");
  r.get("corpus", c.corpus);
  r.get_optional("eval_corpus", c.eval_corpus);
  r.get("vocab_size", c.vocab_size);
  r.get("output_dir", c.output_dir);
  if (const json* m = r.child("model")) c.model = model_config_from_json(*m, false);
  if (const json* t = r.child("train")) c.train = train_config_from_json(*t);
  else throw ConfigError("train: required");
  if (const json* e = r.child("eval")) c.eval = eval_config_from_json(*e);
  r.finish();
  if (c.corpus.empty()) throw ConfigError("corpus: required");
  if (c.output_dir.empty()) throw ConfigError("output_dir: required");
  if (c.vocab_size < Vocab::kNumSpecials + 1) throw ConfigError("vocab_size: vocab too small");
  return c;
}

json to_json(const RunConfig& c) {
  json j;
  j["corpus"] = c.corpus;
  j["eval_corpus"] = c.eval_corpus ? json(*c.eval_corpus) : json(nullptr);
  j["vocab_size"] = c.vocab_size;
  j["model"] = model_config_to_json(c.model, false);
  j["train"] = train_config_to_json(c.train);
  j["eval"] = eval_config_to_json(c.eval);
  j["output_dir"] = c.output_dir;
  return j;
}

}  // namespace maskrate
