// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

#include "maskrate/data.hpp"
#include "maskrate/model.hpp"
#include "maskrate/optimizer.hpp"
#include "maskrate/trainer.hpp"

namespace maskrate {

/// On-disk layout:
///   bytes 0..7    magic "MRCKPT01"
///   bytes 8..15   header length n, unsigned 64-bit little-endian
///   next n bytes  header, compact UTF-8 JSON with keys
///                 {format, model, train, step, rng, vocab, tensors, optimizer}
///   payload       every parameter tensor in for_each_tensor order, then (if
///                 header.optimizer is not null) the first-moment tensors and
///                 the second-moment tensors in the same order; each tensor is
///                 rows*cols IEEE-754 doubles, little-endian, row-major.
struct Checkpoint {
  ModelParams params;
  std::optional<OptState> opt;
  std::optional<TrainConfig> train;
  std::int64_t step = 0;
  std::uint64_t seed = 0;
  Vocab vocab;
};

void write_checkpoint(const Checkpoint& ckpt, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace maskrate
