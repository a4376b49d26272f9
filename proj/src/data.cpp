// SPDX-License-Identifier: Apache-2.0
#include "maskrate/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <stdexcept>

#include <fmt/format.h>

#include "maskrate/rng.hpp"

namespace maskrate {

namespace {

const std::vector<std::string>& special_tokens() {
  static const std::vector<std::string> specials = {"[PAD]", "[MASK]", "[CLS]", "[SEP]",
                                                    "[UNK]"};
  return specials;
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

}  // namespace

Vocab::Vocab() : Vocab(special_tokens()) {}

Vocab::Vocab(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
      throw std::invalid_argument(fmt::format("duplicate vocab token '{}'", tokens_[i]));
    }
  }
}

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  const auto& specials = special_tokens();
  if (tokens.size() < specials.size() ||
      !std::equal(specials.begin(), specials.end(), tokens.begin())) {
    throw std::invalid_argument("vocab must start with [PAD] [MASK] [CLS] [SEP] [UNK]");
  }
  return Vocab(std::move(tokens));
}

const std::string& Vocab::token(TokenId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range(fmt::format("token id {} out of range", id));
  }
  return tokens_[static_cast<std::size_t>(id)];
}

TokenId Vocab::id_of(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (is_space(c)) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size) {
  if (corpus.empty()) throw std::invalid_argument("empty corpus");
  if (max_size < Vocab::kNumSpecials + 1) throw std::invalid_argument("vocab too small");

  std::map<std::string, std::size_t> counts;
  for (const auto& line : corpus) {
    for (auto& tok : tokenize(line)) ++counts[std::move(tok)];
  }
  if (counts.empty()) throw std::invalid_argument("empty corpus");
  for (const auto& s : special_tokens()) counts.erase(s);

  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  // counts is already sorted lexicographically, so a stable sort on frequency
  // leaves ties in lexicographic order.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens = special_tokens();
  const std::size_t capacity = max_size - Vocab::kNumSpecials;
  for (std::size_t i = 0; i < ranked.size() && i < capacity; ++i) {
    tokens.push_back(ranked[i].first);
  }
  return Vocab::from_tokens(std::move(tokens));
}

TokenSequence encode(const Vocab& vocab, std::string_view line, std::size_t max_len) {
  if (max_len < 3) throw std::invalid_argument("max_len must be at least 3");
  TokenSequence seq;
  seq.ids.push_back(Vocab::kCls);
  for (const auto& tok : tokenize(line)) {
    if (seq.ids.size() + 1 >= max_len) break;
    seq.ids.push_back(vocab.id_of(tok));
  }
  seq.ids.push_back(Vocab::kSep);
  return seq;
}

std::string decode(const Vocab& vocab, const TokenSequence& seq) {
  std::string out;
  for (TokenId id : seq.ids) {
    if (id == Vocab::kPad || id == Vocab::kCls || id == Vocab::kSep) continue;
    if (!out.empty()) out.push_back(' ');
    out += vocab.token(id);
  }
  return out;
}

Dataset encode_all(const Vocab& vocab, std::span<const std::string> lines, std::size_t max_len) {
  Dataset ds;
  ds.reserve(lines.size());
  for (const auto& line : lines) ds.push_back(encode(vocab, line, max_len));
  return ds;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

void write_vocab(const Vocab& vocab, std::ostream& out) {
  for (const auto& t : vocab.tokens()) out << t << '\n';
}

Vocab read_vocab(std::istream& in) {
  std::vector<std::string> tokens;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    tokens.push_back(std::move(line));
  }
  return Vocab::from_tokens(std::move(tokens));
}

BatchPlan make_batch_plan(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed) {
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  BatchPlan plan{seed, batch_size, {}};
  plan.order.resize(dataset_size);
  for (std::size_t i = 0; i < dataset_size; ++i) plan.order[i] = i;
  Rng rng(seed);
  for (std::size_t i = dataset_size; i > 1; --i) {
    std::swap(plan.order[i - 1], plan.order[rng.uniform_index(i)]);
  }
  return plan;
}

Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices) {
  Batch b;
  b.rows = indices.size();
  for (auto i : indices) b.cols = std::max(b.cols, dataset.at(i).length());
  b.ids.assign(b.rows * b.cols, Vocab::kPad);
  b.pad.assign(b.rows * b.cols, 1);
  b.source.assign(indices.begin(), indices.end());
  for (std::size_t r = 0; r < b.rows; ++r) {
    const auto& ids = dataset[indices[r]].ids;
    for (std::size_t c = 0; c < ids.size(); ++c) {
      b.ids[r * b.cols + c] = ids[c];
      b.pad[r * b.cols + c] = 0;
    }
  }
  return b;
}

Batch make_batch(std::span<const TokenSequence> seqs) {
  Dataset ds(seqs.begin(), seqs.end());
  std::vector<std::size_t> idx(ds.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(ds, idx);
}

BatchIterator::BatchIterator(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed)
    : dataset_(&dataset), plan_(make_batch_plan(dataset.size(), batch_size, seed)) {}

std::size_t BatchIterator::num_batches() const noexcept {
  return (plan_.order.size() + plan_.batch_size - 1) / plan_.batch_size;
}

std::optional<Batch> BatchIterator::next() {
  if (cursor_ >= plan_.order.size()) return std::nullopt;
  const std::size_t end = std::min(cursor_ + plan_.batch_size, plan_.order.size());
  std::span<const std::size_t> idx(plan_.order.data() + cursor_, end - cursor_);
  cursor_ = end;
  return make_batch(*dataset_, idx);
}

BatchIterator batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed) {
  if (dataset.empty()) throw std::invalid_argument("empty dataset");
  if (batch_size == 0) throw std::invalid_argument("batch_size must be at least 1");
  return BatchIterator(dataset, batch_size, seed);
}

std::vector<std::string> make_toy_corpus(const ToyCorpusConfig& config) {
  if (config.n_types < 2 || config.min_len == 0 || config.max_len < config.min_len ||
      !(config.markov_weight >= 0.0 && config.markov_weight <= 1.0)) {
    throw std::invalid_argument("invalid toy corpus config");
  }
  const std::size_t n = config.n_types;
  std::vector<double> cdf(n);
  double acc = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    acc += 1.0 / std::pow(static_cast<double>(k + 1), config.zipf_exponent);
    cdf[k] = acc;
  }
  for (auto& c : cdf) c /= acc;

  Rng rng(derive_seed(config.seed, 0x70c0));
  auto zipf_rank = [&] {
    const double u = rng.uniform01();
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), n - 1);
  };

  // successor[w] is a permutation: the k-th most likely follower of w.
  std::vector<std::vector<std::size_t>> successor(n, std::vector<std::size_t>(n));
  for (auto& perm : successor) {
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_index(i)]);
  }

  const int width = static_cast<int>(fmt::format("{}", n - 1).size());
  std::vector<std::string> lines;
  lines.reserve(config.n_lines);
  for (std::size_t l = 0; l < config.n_lines; ++l) {
    const std::size_t len = config.min_len + rng.uniform_index(config.max_len - config.min_len + 1);
    std::string line;
    std::size_t w = zipf_rank();
    for (std::size_t i = 0; i < len; ++i) {
      if (i > 0) {
        line.push_back(' ');
        const bool follow = rng.uniform01() < config.markov_weight;
        w = follow ? successor[w][zipf_rank()] : zipf_rank();
      }
      line += fmt::format("w{:0{}}", w, width);
    }
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace maskrate
