// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "maskrate/corruption.hpp"
#include "maskrate/data.hpp"
#include "maskrate/tensor.hpp"

namespace maskrate {

struct ModelConfig {
  std::size_t n_layers = 1;
  std::size_t n_heads = 1;
  std::size_t d_model = 8;
  std::size_t d_ff = 16;
  std::size_t vocab_size = 16;
  std::size_t max_seq_len = 16;
  std::uint64_t init_seed = 0;
  double init_std = 0.02;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Throws std::invalid_argument naming the first violated constraint.
void validate(const ModelConfig& config);

enum class TensorRole { embedding, weight, bias, norm_scale, norm_shift };

struct LayerParams {
  Matrix ln1_scale, ln1_shift;
  Matrix wq, bq, wk, bk, wv, bv, wo, bo;
  Matrix ln2_scale, ln2_shift;
  Matrix w1, b1, w2, b2;

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

/// All weights of the encoder and both output heads. Gradients use the same type.
struct ModelParams {
  ModelConfig config;
  Matrix token_embedding;     // vocab x d_model
  Matrix position_embedding;  // max_seq_len x d_model
  std::vector<LayerParams> layers;
  Matrix final_scale, final_shift;
  Matrix mlm_weight, mlm_bias;  // d_model x vocab, 1 x vocab
  Matrix rts_weight, rts_bias;  // d_model x 1, 1 x 1

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

namespace detail {

// The one tensor order; fn(base name, layer index or npos, matrix, role).
template <typename Params, typename Fn>
void visit_tensors(Params& p, Fn&& fn) {
  constexpr std::size_t top = static_cast<std::size_t>(-1);
  fn("token_embedding", top, p.token_embedding, TensorRole::embedding);
  fn("position_embedding", top, p.position_embedding, TensorRole::embedding);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& L = p.layers[l];
    fn("ln1_scale", l, L.ln1_scale, TensorRole::norm_scale);
    fn("ln1_shift", l, L.ln1_shift, TensorRole::norm_shift);
    fn("wq", l, L.wq, TensorRole::weight);
    fn("bq", l, L.bq, TensorRole::bias);
    fn("wk", l, L.wk, TensorRole::weight);
    fn("bk", l, L.bk, TensorRole::bias);
    fn("wv", l, L.wv, TensorRole::weight);
    fn("bv", l, L.bv, TensorRole::bias);
    fn("wo", l, L.wo, TensorRole::weight);
    fn("bo", l, L.bo, TensorRole::bias);
    fn("ln2_scale", l, L.ln2_scale, TensorRole::norm_scale);
    fn("ln2_shift", l, L.ln2_shift, TensorRole::norm_shift);
    fn("w1", l, L.w1, TensorRole::weight);
    fn("b1", l, L.b1, TensorRole::bias);
    fn("w2", l, L.w2, TensorRole::weight);
    fn("b2", l, L.b2, TensorRole::bias);
  }
  fn("final_scale", top, p.final_scale, TensorRole::norm_scale);
  fn("final_shift", top, p.final_shift, TensorRole::norm_shift);
  fn("mlm_weight", top, p.mlm_weight, TensorRole::weight);
  fn("mlm_bias", top, p.mlm_bias, TensorRole::bias);
  fn("rts_weight", top, p.rts_weight, TensorRole::weight);
  fn("rts_bias", top, p.rts_bias, TensorRole::bias);
}

}  // namespace detail

/// Visits every tensor in the fixed serialization order used by checkpoints,
/// with its dotted name ("layers.0.wq").
template <typename Params, typename Fn>
void for_each_tensor(Params& p, Fn&& fn) {
  detail::visit_tensors(p, [&](const char* base, std::size_t layer, auto& m, TensorRole role) {
    fn(layer == static_cast<std::size_t>(-1) ? std::string(base) : fmt::format("layers.{}.{}", layer, base), m, role);
  });
}

/// Same order as for_each_tensor without building names; for per-step loops.
template <typename Params, typename Fn>
void for_each_matrix(Params& p, Fn&& fn) {
  detail::visit_tensors(p, [&](const char*, std::size_t, auto& m, TensorRole role) { fn(m, role); });
}

/// Matrices and biases ~ Normal(0, init_std^2) except biases (zero) and
/// layer-norm scale/shift (1 and 0). Deterministic in config.init_seed.
ModelParams init_params(const ModelConfig& config);

/// Same shapes as `like`, every entry zero.
ModelParams zeros_like(const ModelParams& like);

std::size_t parameter_count(const ModelParams& params);
bool all_finite(const ModelParams& params);

struct HeadSelection {
  bool mlm = true;
  bool rts = false;
};

/// Supervision for one batch. Positions are flat (row * cols + col).
/// MLM labels are token ids; RTS labels are 0/1.
struct Targets {
  Objective objective = Objective::mlm;
  std::vector<std::size_t> positions;
  std::vector<TokenId> labels;
};

struct LayerNormCache {
  Matrix xhat;
  std::vector<double> inv_std;
  Matrix out;
};

struct LayerCache {
  LayerNormCache ln1;
  Matrix q, k, v;
  std::vector<double> probs;  // rows x heads x cols x cols
  Matrix attn;
  LayerNormCache ln2;
  Matrix ff_pre, ff_act;
};

struct ForwardOutput {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Matrix mlm_logits;               // (rows*cols) x vocab, when requested
  std::vector<double> rts_logits;  // rows*cols, when requested
  std::vector<LayerCache> layers;
  LayerNormCache final_norm;
};

/// Pre-norm transformer encoder. Padding positions are excluded as attention
/// keys. Throws std::invalid_argument for out-of-range ids or over-long input.
ForwardOutput forward(const ModelParams& params, const Batch& batch, HeadSelection heads);

/// Mean negative log-likelihood over the target positions. Throws
/// std::invalid_argument("loss undefined, |M|=0") if there are none.
double mlm_loss(const ForwardOutput& out, const Targets& targets);

/// Mean binary cross-entropy over the target positions.
double rts_loss(const ForwardOutput& out, const Targets& targets);

/// Loss of the objective named in `targets`.
double loss_value(const ModelParams& params, const Batch& batch, const Targets& targets);

struct LossAndGrad {
  double loss = 0.0;
  ModelParams grads;
};

/// Analytic gradient of loss_scale * loss with respect to every tensor.
LossAndGrad backward(const ModelParams& params, const Batch& batch, const Targets& targets,
                     double loss_scale = 1.0);

/// Replaces the corrupted ids into a copy of `clean` and collects targets.
Batch corrupted_batch(const Batch& clean, std::span<const MaskOutcome> outcomes);
Targets collect_targets(Objective objective, std::span<const MaskOutcome> outcomes,
                        std::size_t cols);

struct GradCheckReport {
  std::size_t n_checked = 0;
  double worst_rel_error = 0.0;
  std::string worst_coordinate;
  bool passed = true;
  bool step_underflow = false;
  std::vector<std::string> warnings;
  std::vector<std::string> tensors_covered;
};

/// Small config used by gradient checks and oracle comparisons.
ModelConfig tiny_config();

/// Compares analytic gradients with central differences at `n_coords`
/// coordinates spread round-robin over every tensor. Relative error is
/// |a - n| / max(|a|, |n|, 1e-8).
GradCheckReport grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t n_coords,
                           double h, double tol, Objective objective = Objective::mlm);

}  // namespace maskrate
