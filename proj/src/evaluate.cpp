// SPDX-License-Identifier: Apache-2.0
#include "maskrate/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <stdexcept>

#include "maskrate/corruption.hpp"
#include "maskrate/rng.hpp"

namespace maskrate {

namespace {

constexpr std::uint64_t kEvalStream = 0xe7a1;

struct Fnv1a {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  void add(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) {
      h ^= (x >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
};

EvalResult run_eval(const ModelParams& params, const Dataset& dataset, const Vocab& vocab,
                    const EvalConfig& cfg, Objective objective) {
  validate(cfg);
  if (dataset.empty()) throw std::invalid_argument("empty eval set");
  CorruptionConfig corruption;
  corruption.objective = objective;

  const std::size_t total_batches = (dataset.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t n = cfg.n_batches == 0 ? total_batches : std::min(cfg.n_batches, total_batches);
  EvalResult res;
  Fnv1a hash;
  double sum = 0.0;
  for (std::size_t b = 0; b < n; ++b) {
    std::vector<std::size_t> idx;
    for (std::size_t i = b * cfg.batch_size; i < std::min(dataset.size(), (b + 1) * cfg.batch_size); ++i) {
      idx.push_back(i);
    }
    const Batch clean = make_batch(dataset, idx);
    std::vector<MaskOutcome> outcomes;
    for (auto i : idx) {
      Rng rng(derive_seed(cfg.seed, kEvalStream, i));
      outcomes.push_back(corrupt_sequence(dataset[i], cfg.rate, vocab, corruption, rng));
      hash.add(i);
      for (auto id : outcomes.back().corrupted) hash.add(static_cast<std::uint64_t>(id));
      for (auto p : outcomes.back().loss_set) hash.add(p);
    }
    const Batch input = corrupted_batch(clean, outcomes);
    const Targets targets = collect_targets(objective, outcomes, clean.cols);
    if (targets.positions.empty()) continue;
    sum += loss_value(params, input, targets);
    res.n_targets += targets.positions.size();
    ++res.n_batches;
  }
  if (res.n_batches == 0) throw std::invalid_argument("eval set has nothing to score");
  res.mean_loss = sum / static_cast<double>(res.n_batches);
  res.mask_hash = hash.h;
  return res;
}

}  // namespace

void validate(const EvalConfig& c) {
  if (!(c.rate >= 0.0 && c.rate <= 1.0)) throw std::invalid_argument("eval rate out of [0,1]");
  if (c.batch_size == 0) throw std::invalid_argument("eval batch_size must be >= 1");
}

EvalResult eval_mlm(const ModelParams& params, const Dataset& dataset, const Vocab& vocab,
                    const EvalConfig& cfg) {
  return run_eval(params, dataset, vocab, cfg, Objective::mlm);
}

EvalResult eval_rts(const ModelParams& params, const Dataset& dataset, const Vocab& vocab,
                    const EvalConfig& cfg) {
  return run_eval(params, dataset, vocab, cfg, Objective::rts);
}

double pll(const ModelParams& params, const TokenSequence& sentence) {
  const auto positions = maskable_positions(sentence);
  if (positions.empty()) throw std::invalid_argument("sentence has no scorable tokens");
  // One row per masked copy; rows are independent under the encoder.
  std::vector<TokenSequence> copies(positions.size(), sentence);
  for (std::size_t i = 0; i < positions.size(); ++i) copies[i].ids[positions[i]] = Vocab::kMask;
  const Batch batch = make_batch(copies);
  const ForwardOutput out = forward(params, batch, HeadSelection{true, false});
  const std::size_t V = out.mlm_logits.cols;
  double total = 0.0;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const double* row = out.mlm_logits.row(i * batch.cols + positions[i]);
    double mx = row[0];
    for (std::size_t j = 1; j < V; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < V; ++j) z += std::exp(row[j] - mx);
    total += row[static_cast<std::size_t>(sentence.ids[positions[i]])] - mx - std::log(z);
  }
  return total;
}

std::vector<MinimalPair> read_minimal_pairs(std::istream& in) {
  auto split_tabs = [](const std::string& line) {
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      auto pos = line.find('\t', start);
      cols.push_back(line.substr(start, pos == std::string::npos ? pos : pos - start));
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    return cols;
  };
  std::string line;
  if (!std::getline(in, line)) throw std::invalid_argument("minimal-pair file is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_tabs(line);
  const std::vector<std::string> expected = {"pair_id", "super_task", "sentence_good", "sentence_bad"};
  if (header != expected) {
    throw std::invalid_argument("minimal-pair header must be pair_id\\tsuper_task\\tsentence_good\\tsentence_bad");
  }
  std::vector<MinimalPair> pairs;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cols = split_tabs(line);
    if (cols.size() != 4) {
      throw std::invalid_argument(fmt::format("minimal-pair line {}: expected 4 columns", lineno));
    }
    pairs.push_back({cols[0], cols[1], cols[2], cols[3]});
  }
  return pairs;
}

PairReport score_pairs(std::span<const MinimalPair> pairs,
                       std::span<const std::pair<double, double>> scores) {
  if (pairs.empty()) throw std::invalid_argument("no minimal pairs");
  PairReport report;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    auto& acc = report.per_task[pairs[i].super_task];
    ++acc.total;
    if (scores[i].first > scores[i].second) ++acc.correct;
  }
  double sum = 0.0;
  for (auto& [task, acc] : report.per_task) {
    acc.accuracy = static_cast<double>(acc.correct) / static_cast<double>(acc.total);
    sum += acc.accuracy;
  }
  report.overall = sum / static_cast<double>(report.per_task.size());
  report.n_pairs = pairs.size();
  return report;
}

PairReport minimal_pair_accuracy(const ModelParams& params, const Vocab& vocab,
                                 std::span<const MinimalPair> pairs, std::size_t max_len) {
  std::vector<std::pair<double, double>> scores;
  scores.reserve(pairs.size());
  for (const auto& p : pairs) {
    const auto good = encode(vocab, p.good, max_len);
    const auto bad = encode(vocab, p.bad, max_len);
    if (good.length() < 3 || bad.length() < 3) {
      throw std::invalid_argument(fmt::format("pair {}: sentence has no tokens", p.pair_id));
    }
    scores.emplace_back(pll(params, good), pll(params, bad));
  }
  return score_pairs(pairs, scores);
}

}  // namespace maskrate
