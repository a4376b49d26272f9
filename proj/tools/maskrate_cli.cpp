// SPDX-License-Identifier: Apache-2.0
// maskrate command line: train, eval, compare, speedup, gradcheck, vocab, toy-corpus.
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "maskrate/analysis.hpp"
#include "maskrate/checkpoint.hpp"
#include "maskrate/data.hpp"
#include "maskrate/evaluate.hpp"
#include "maskrate/model.hpp"
#include "maskrate/run_config.hpp"
#include "maskrate/stats.hpp"
#include "maskrate/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace maskrate;

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

// Thrown for bad user input that the library would not catch itself.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw UsageError(fmt::format("{}: invalid JSON: {}", path, e.what()));
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
}

std::string ckpt_name(std::int64_t step) { return fmt::format("step-{}.ckpt", step); }

std::optional<double> json_number(const json& j, const char* key) {
  if (j.contains(key) && j[key].is_number()) return j[key].get<double>();
  return std::nullopt;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

// ---- train ----------------------------------------------------------------

struct TrainArgs {
  std::string config;
  bool force = false;
  std::string resume;
  std::optional<std::int64_t> until;
};

int cmd_train(const TrainArgs& args) {
  RunConfig cfg;
  try {
    cfg = parse_run_config(read_json_file(args.config));
  } catch (const ConfigError& e) {
    throw UsageError(fmt::format("{}: {}", args.config, e.what()));
  }
  const fs::path dir(cfg.output_dir);
  const bool resuming = !args.resume.empty();
  if (!resuming) {
    if (fs::exists(dir) && !fs::is_empty(dir)) {
      if (!args.force) {
        throw UsageError(fmt::format("output directory {} is not empty; pass --force to overwrite", dir.string()));
      }
      fs::remove_all(dir);
    }
  }
  fs::create_directories(dir / "checkpoints");

  const auto corpus = read_lines(cfg.corpus);
  const Vocab vocab = build_vocab(corpus, cfg.vocab_size);
  cfg.model.vocab_size = vocab.size();
  validate(cfg.model);
  const Dataset train_set = encode_all(vocab, corpus, cfg.model.max_seq_len);
  const Dataset eval_set =
      cfg.eval_corpus ? encode_all(vocab, read_lines(*cfg.eval_corpus), cfg.model.max_seq_len) : train_set;

  TrainState state;
  std::optional<double> initial_eval;
  if (resuming) {
    Checkpoint ck = load_checkpoint(args.resume);
    if (!ck.train || !(*ck.train == cfg.train) || !(ck.params.config == cfg.model) || !(ck.vocab == vocab) ||
        !ck.opt || ck.seed != cfg.train.seed) {
      throw UsageError(fmt::format("checkpoint {} does not match config {}", args.resume, args.config));
    }
    state.params = std::move(ck.params);
    state.opt = std::move(*ck.opt);
    state.step = ck.step;
    if (fs::exists(dir / "summary.json")) initial_eval = json_number(read_json_file(dir / "summary.json"), "initial_eval_loss");
    // Keep the metrics of the steps already applied.
    std::vector<std::string> kept;
    if (std::ifstream in(dir / "metrics.jsonl"); in) {
      std::string line;
      while (std::getline(in, line)) {
        if (!line.empty() && parse_jsonl_record(line).step < state.step) kept.push_back(line);
      }
    }
    std::string text;
    for (const auto& l : kept) text += l + "\n";
    write_text(dir / "metrics.jsonl", text);
  } else {
    state = initial_state(cfg.model);
    write_text(dir / "metrics.jsonl", "");
  }
  write_text(dir / "config.json", to_json(cfg).dump(2) + "\n");
  {
    std::ostringstream v;
    write_vocab(vocab, v);
    write_text(dir / "vocab.txt", v.str());
  }

  std::ofstream metrics(dir / "metrics.jsonl", std::ios::app | std::ios::binary);
  if (!metrics) throw std::runtime_error("cannot append to metrics.jsonl");
  std::int64_t last_saved = -1;
  auto save = [&](const TrainState& s) {
    Checkpoint ck{s.params, s.opt, cfg.train, s.step, cfg.train.seed, vocab};
    save_checkpoint(ck, (dir / "checkpoints" / ckpt_name(s.step)).string());
    last_saved = s.step;
  };
  TrainCallbacks cb;
  cb.on_record = [&](const StepRecord& r) {
    metrics << to_jsonl(r) << '\n';
    metrics.flush();
  };
  cb.on_checkpoint = save;

  TrainInputs inputs{train_set, eval_set, vocab, cfg.eval};
  TrainResult result = train(cfg.train, std::move(state), inputs, args.until, cb);
  if (result.state.step != last_saved) save(result.state);
  if (result.initial_eval_loss) initial_eval = result.initial_eval_loss;

  json summary;
  summary["schedule"] = run_schedule_name(cfg.train);
  summary["total_steps"] = cfg.train.total_steps;
  summary["steps_completed"] = result.state.step;
  summary["completed"] = result.state.step == cfg.train.total_steps;
  summary["parameter_count"] = parameter_count(result.state.params);
  summary["initial_eval_loss"] = optional_json(initial_eval);
  summary["final_eval_loss"] = optional_json(result.final_eval_loss);
  summary["final_train_loss"] =
      result.metrics.records.empty() ? json(nullptr) : json(result.metrics.records.back().loss);
  summary["checkpoint"] = (fs::path("checkpoints") / ckpt_name(result.state.step)).string();
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << '\n';
  return kOk;
}

// ---- eval -----------------------------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string dataset;
  std::string pairs;
  std::string vocab;
  std::string objective;
  double rate = 0.15;
  std::uint64_t seed = 1234;
  std::size_t batch_size = 16;
  std::size_t n_batches = 0;
};

int cmd_eval(const EvalArgs& args) {
  if (args.dataset.empty() == args.pairs.empty()) throw UsageError("eval: give exactly one of DATASET or --pairs");
  Checkpoint ck = load_checkpoint(args.checkpoint);
  Vocab vocab = ck.vocab;
  if (!args.vocab.empty()) {
    std::ifstream in(args.vocab);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", args.vocab));
    vocab = read_vocab(in);
    if (vocab.size() != ck.params.config.vocab_size) {
      throw std::runtime_error(fmt::format("vocab {} has {} entries but the checkpoint model expects {}", args.vocab,
                                           vocab.size(), ck.params.config.vocab_size));
    }
  }
  json out;
  if (!args.pairs.empty()) {
    std::ifstream in(args.pairs);
    if (!in) throw std::runtime_error(fmt::format("cannot open {}", args.pairs));
    const auto pairs = read_minimal_pairs(in);
    const auto report = minimal_pair_accuracy(ck.params, vocab, pairs, ck.params.config.max_seq_len);
    json tasks = json::object();
    for (const auto& [task, acc] : report.per_task) {
      tasks[task] = {{"correct", acc.correct}, {"total", acc.total}, {"accuracy", acc.accuracy}};
    }
    out = {{"n_pairs", report.n_pairs}, {"overall", report.overall}, {"per_task", tasks}};
  } else {
    Objective objective = ck.train ? ck.train->corruption.objective : Objective::mlm;
    if (args.objective == "mlm") objective = Objective::mlm;
    if (args.objective == "rts") objective = Objective::rts;
    EvalConfig ec{args.rate, args.seed, args.n_batches, args.batch_size};
    validate(ec);
    const Dataset data = encode_all(vocab, read_lines(args.dataset), ck.params.config.max_seq_len);
    const EvalResult r = objective == Objective::rts ? eval_rts(ck.params, data, vocab, ec)
                                                     : eval_mlm(ck.params, data, vocab, ec);
    out = {{"objective", objective == Objective::rts ? "rts" : "mlm"},
           {"rate", ec.rate},
           {"seed", ec.seed},
           {"step", ck.step},
           {"mean_loss", r.mean_loss},
           {"n_batches", r.n_batches},
           {"n_targets", r.n_targets},
           {"mask_hash", fmt::format("{:016x}", r.mask_hash)}};
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

// ---- compare --------------------------------------------------------------

int cmd_compare(const std::string& path, double alpha, bool pooled) {
  SampleTable table;
  try {
    table = parse_sample_table(read_json_file(path));
  } catch (const std::invalid_argument& e) {
    throw UsageError(fmt::format("{}: {}", path, e.what()));
  }
  const auto report = parity_table(table, alpha, pooled ? TTestVariant::pooled : TTestVariant::welch);
  std::cout << to_json(report).dump(2) << "\n\n" << render_parity_table(report);
  return kOk;
}

// ---- speedup --------------------------------------------------------------

struct SpeedupArgs {
  std::vector<std::string> csvs;
  std::string baseline;
  std::string plot;
};

int cmd_speedup(const SpeedupArgs& args) {
  std::map<std::string, std::vector<CurvePoint>> series;
  for (const auto& path : args.csvs) {
    for (auto& [name, pts] : read_curve_csv(path, fs::path(path).stem().string())) {
      auto& dst = series[name];
      dst.insert(dst.end(), pts.begin(), pts.end());
    }
  }
  const auto base_it = series.find(args.baseline);
  if (base_it == series.end()) throw UsageError(fmt::format("baseline series '{}' not found", args.baseline));
  double best = -std::numeric_limits<double>::infinity(), total = 0.0;
  for (const auto& p : base_it->second) {
    best = std::max(best, p.value);
    total = std::max(total, p.step);
  }

  json out;
  out["baseline"] = {{"name", args.baseline}, {"best_value", best}, {"total_steps", total}};
  json js = json::object();
  std::vector<PlotSeries> plot_series;
  std::vector<PlotFit> plot_fits;
  std::vector<PlotMarker> markers;
  for (const auto& [name, pts] : series) {
    RegressionFit fit;
    try {
      fit = fit_speedup_curve(pts);
    } catch (const std::invalid_argument& e) {
      throw std::runtime_error(fmt::format("series '{}': {}", name, e.what()));
    }
    json entry{{"fit", to_json(fit)}};
    const auto t = crossover_step(fit, best);
    entry["crossover_step"] = optional_json(t);
    try {
      entry["speedup"] = speedup_ratio(fit, best, total);
    } catch (const std::runtime_error& e) {
      entry["speedup"] = nullptr;
      entry["note"] = e.what();
    }
    if (name != args.baseline) {
      try {
        std::vector<CurvePoint> a = pts, b = base_it->second;
        auto by_step = [](const CurvePoint& x, const CurvePoint& y) { return x.step < y.step; };
        std::sort(a.begin(), a.end(), by_step);
        std::sort(b.begin(), b.end(), by_step);
        const auto pr = pareto_check(a, b);
        entry["pareto_over_baseline"] = pr.pareto;
        entry["pareto_violations"] = pr.violations;
      } catch (const std::invalid_argument&) {
        entry["pareto_over_baseline"] = nullptr;
      }
      if (t) markers.push_back({fmt::format("{} {:.0f}", name, *t), *t, best});
    }
    js[name] = entry;
    plot_series.push_back({name, pts});
    plot_fits.push_back({name, fit});
  }
  out["series"] = js;
  if (!args.plot.empty()) {
    emit_plot(plot_series, plot_fits, markers, args.plot);
    out["plot"] = args.plot;
  }
  std::cout << out.dump(2) << '\n';
  return kOk;
}

// ---- gradcheck ------------------------------------------------------------

struct GradArgs {
  std::size_t coords = 200;
  double h = 1e-4;
  double tol = 1e-5;
  std::uint64_t seed = 7;
  std::string objective = "mlm";
};

int cmd_gradcheck(const GradArgs& args) {
  const auto r = grad_check(tiny_config(), args.seed, args.coords, args.h, args.tol,
                            args.objective == "rts" ? Objective::rts : Objective::mlm);
  json out{{"objective", args.objective},
           {"n_checked", r.n_checked},
           {"worst_rel_error", r.worst_rel_error},
           {"worst_coordinate", r.worst_coordinate},
           {"tolerance", args.tol},
           {"h", args.h},
           {"passed", r.passed},
           {"tensors_covered", r.tensors_covered},
           {"warnings", r.warnings}};
  std::cout << out.dump(2) << '\n';
  return r.passed ? kOk : kRuntime;
}

// ---- vocab / toy-corpus ---------------------------------------------------

int cmd_vocab(const std::string& corpus, std::size_t size, const std::string& out_path) {
  const Vocab vocab = build_vocab(read_lines(corpus), size);
  std::ostringstream v;
  write_vocab(vocab, v);
  if (out_path.empty()) {
    std::cout << v.str();
  } else {
    write_text(out_path, v.str());
  }
  return kOk;
}

int cmd_toy_corpus(const ToyCorpusConfig& cfg, const std::string& out_path) {
  std::string text;
  for (const auto& line : make_toy_corpus(cfg)) text += line + "\n";
  if (out_path.empty()) {
    std::cout << text;
  } else {
    write_text(out_path, text);
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"maskrate: masked language model pretraining with masking-rate schedules"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train a model from a run config");
  train->add_option("config", train_args.config, "Run config JSON")->required();
  train->add_flag("--force", train_args.force, "Overwrite a non-empty output directory");
  train->add_option("--resume", train_args.resume, "Resume from a checkpoint written by the same config");
  train->add_option("--until", train_args.until, "Stop after this many updates")->check(CLI::NonNegativeNumber);

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("checkpoint", eval_args.checkpoint, "Checkpoint file")->required();
  eval->add_option("dataset", eval_args.dataset, "Text file, one sequence per line");
  eval->add_option("--pairs", eval_args.pairs, "Minimal-pair TSV");
  eval->add_option("--vocab", eval_args.vocab, "Vocab file overriding the embedded one");
  eval->add_option("--rate", eval_args.rate, "Masking rate")->check(CLI::Range(0.0, 1.0));
  eval->add_option("--seed", eval_args.seed, "Mask seed");
  eval->add_option("--batch-size", eval_args.batch_size)->check(CLI::PositiveNumber);
  eval->add_option("--n-batches", eval_args.n_batches, "0 = whole dataset");
  eval->add_option("--objective", eval_args.objective, "mlm or rts; default from the checkpoint")
      ->check(CLI::IsMember({"mlm", "rts"}));

  std::string compare_path;
  double alpha = 0.05;
  bool pooled = false;
  auto* compare = app.add_subcommand("compare", "Significance and parity table from {task: {schedule: [values]}}");
  compare->add_option("samples", compare_path, "Samples JSON")->required();
  compare->add_option("--alpha", alpha)->check(CLI::Range(0.0, 1.0));
  compare->add_flag("--pooled", pooled, "Pooled-variance t-test instead of Welch");

  SpeedupArgs speedup_args;
  auto* speedup = app.add_subcommand("speedup", "Fit step-vs-value curves and compute speedups");
  speedup->add_option("csvs", speedup_args.csvs, "CSV files with header step,value[,schedule]")->required();
  speedup->add_option("--baseline", speedup_args.baseline, "Baseline series name")->required();
  speedup->add_option("--plot", speedup_args.plot, "Write an SVG plot");

  GradArgs grad_args;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient check on the tiny config");
  gradcheck->add_option("--coords", grad_args.coords);
  gradcheck->add_option("--step", grad_args.h, "Finite-difference step")->check(CLI::PositiveNumber);
  gradcheck->add_option("--tol", grad_args.tol)->check(CLI::PositiveNumber);
  gradcheck->add_option("--seed", grad_args.seed);
  gradcheck->add_option("--objective", grad_args.objective)->check(CLI::IsMember({"mlm", "rts"}));

  std::string vocab_corpus, vocab_out;
  std::size_t vocab_size = 205;
  auto* vocab = app.add_subcommand("vocab", "Build a vocab file from a corpus");
  vocab->add_option("corpus", vocab_corpus)->required();
  vocab->add_option("--size", vocab_size, "Vocab size including the 5 specials");
  vocab->add_option("--out", vocab_out, "Output path (default: stdout)");

  ToyCorpusConfig toy;
  std::string toy_out;
  auto* toy_cmd = app.add_subcommand("toy-corpus", "Generate the synthetic Zipf/Markov corpus");
  toy_cmd->add_option("--types", toy.n_types);
  toy_cmd->add_option("--lines", toy.n_lines);
  toy_cmd->add_option("--min-len", toy.min_len);
  toy_cmd->add_option("--max-len", toy.max_len);
  toy_cmd->add_option("--zipf", toy.zipf_exponent);
  toy_cmd->add_option("--markov", toy.markov_weight, "Probability of following the previous token")->check(CLI::Range(0.0, 1.0));
  toy_cmd->add_option("--seed", toy.seed);
  toy_cmd->add_option("--out", toy_out, "Output path (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*train) return cmd_train(train_args);
    if (*eval) return cmd_eval(eval_args);
    if (*compare) return cmd_compare(compare_path, alpha, pooled);
    if (*speedup) return cmd_speedup(speedup_args);
    if (*gradcheck) return cmd_gradcheck(grad_args);
    if (*vocab) return cmd_vocab(vocab_corpus, vocab_size, vocab_out);
    if (*toy_cmd) return cmd_toy_corpus(toy, toy_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
