// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace maskrate {

using TokenId = std::int32_t;

/// Token vocabulary with the five specials at fixed ids 0..4.
class Vocab {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kMask = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kUnk = 4;
  static constexpr std::size_t kNumSpecials = 5;

  Vocab();

  /// Builds a vocab from an ordered token list whose first five entries must
  /// be the specials in canonical order. Throws on duplicates.
  static Vocab from_tokens(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }
  const std::string& token(TokenId id) const;

  /// Id of `token`, or kUnk when absent.
  TokenId id_of(std::string_view token) const;
  bool contains(std::string_view token) const;

  static bool is_special(TokenId id) noexcept {
    return id >= 0 && id < static_cast<TokenId>(kNumSpecials);
  }
  /// Number of ids a random replacement may draw from ([kNumSpecials, size)).
  std::size_t num_regular() const noexcept { return size() - kNumSpecials; }

  friend bool operator==(const Vocab& a, const Vocab& b) { return a.tokens_ == b.tokens_; }

 private:
  explicit Vocab(std::vector<std::string> tokens);

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

struct TokenSequence {
  std::vector<TokenId> ids;

  std::size_t length() const noexcept { return ids.size(); }
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

using Dataset = std::vector<TokenSequence>;

/// Lowercases ASCII letters and splits on whitespace.
std::vector<std::string> tokenize(std::string_view line);

/// The 5 specials plus the (max_size - 5) most frequent tokens; ties broken
/// lexicographically. Throws std::invalid_argument on an empty corpus or a
/// max_size below 6.
Vocab build_vocab(std::span<const std::string> corpus, std::size_t max_size);

/// [CLS] + up to max_len-2 ids + [SEP], truncating from the right.
TokenSequence encode(const Vocab& vocab, std::string_view line, std::size_t max_len);

/// Space-joined non-special tokens; [UNK] positions render as "[UNK]".
std::string decode(const Vocab& vocab, const TokenSequence& seq);

Dataset encode_all(const Vocab& vocab, std::span<const std::string> lines, std::size_t max_len);

/// Reads LF-separated lines; a trailing CR is stripped. Throws if unreadable.
std::vector<std::string> read_lines(const std::string& path);

/// One token per line; line number is the id.
void write_vocab(const Vocab& vocab, std::ostream& out);
Vocab read_vocab(std::istream& in);

struct BatchPlan {
  std::uint64_t seed = 0;
  std::size_t batch_size = 1;
  std::vector<std::size_t> order;  // permutation of [0, dataset size)
};

/// Fisher-Yates shuffle of [0, dataset_size) driven by `seed`.
BatchPlan make_batch_plan(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

/// A padded id matrix, row-major rows x cols.
struct Batch {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<TokenId> ids;
  std::vector<std::uint8_t> pad;        // 1 at padding positions
  std::vector<std::size_t> source;      // dataset index of each row

  TokenId at(std::size_t r, std::size_t c) const { return ids[r * cols + c]; }
  bool is_pad(std::size_t r, std::size_t c) const { return pad[r * cols + c] != 0; }
  friend bool operator==(const Batch&, const Batch&) = default;
};

/// Pads the selected rows to the longest member with [PAD].
Batch make_batch(const Dataset& dataset, std::span<const std::size_t> indices);

/// Builds a batch directly from sequences (row i = seqs[i]); source is 0..n-1.
Batch make_batch(std::span<const TokenSequence> seqs);

/// Single-pass iterator over one shuffled epoch. The final batch may be short.
class BatchIterator {
 public:
  BatchIterator(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

  std::optional<Batch> next();
  const BatchPlan& plan() const noexcept { return plan_; }
  std::size_t num_batches() const noexcept;

 private:
  const Dataset* dataset_;
  BatchPlan plan_;
  std::size_t cursor_ = 0;
};

/// Throws std::invalid_argument on an empty dataset or zero batch size.
BatchIterator batches(const Dataset& dataset, std::size_t batch_size, std::uint64_t seed);

/// Synthetic corpus for desk-scale experiments over tokens "w000".."wNNN".
/// The first token of a line is Zipf over the types. Each later token, with
/// probability markov_weight, is Zipf over a permutation of the types owned by
/// the previous token, and otherwise Zipf over the types in global order.
struct ToyCorpusConfig {
  std::size_t n_types = 200;
  std::size_t n_lines = 2000;
  std::size_t min_len = 12;
  std::size_t max_len = 24;
  double zipf_exponent = 1.5;
  double markov_weight = 0.5;
  std::uint64_t seed = 1;
};

std::vector<std::string> make_toy_corpus(const ToyCorpusConfig& config);

}  // namespace maskrate
