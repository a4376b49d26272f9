// SPDX-License-Identifier: Apache-2.0
#include "maskrate/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "maskrate/rng.hpp"

namespace maskrate {

namespace {

constexpr double kLayerNormEps = 1e-5;

void layer_norm(const Matrix& x, const Matrix& scale, const Matrix& shift, LayerNormCache& cache) {
  const std::size_t n = x.rows, d = x.cols;
  cache.xhat = Matrix(n, d);
  cache.out = Matrix(n, d);
  cache.inv_std.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xr = x.row(i);
    double mean = 0.0;
    for (std::size_t j = 0; j < d; ++j) mean += xr[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std[i] = inv;
    double* xh = cache.xhat.row(i);
    double* o = cache.out.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      xh[j] = (xr[j] - mean) * inv;
      o[j] = xh[j] * scale.data[j] + shift.data[j];
    }
  }
}

// Accumulates scale/shift grads and returns dx.
Matrix layer_norm_backward(const Matrix& dy, const LayerNormCache& cache, const Matrix& scale,
                           Matrix& dscale, Matrix& dshift) {
  const std::size_t n = dy.rows, d = dy.cols;
  Matrix dx(n, d);
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double* g = dy.row(i);
    const double* xh = cache.xhat.row(i);
    double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dscale.data[j] += g[j] * xh[j];
      dshift.data[j] += g[j];
      dxhat[j] = g[j] * scale.data[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xh[j];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    double* o = dx.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      o[j] = cache.inv_std[i] * (dxhat[j] - mean_dxhat - xh[j] * mean_dxhat_xhat);
    }
  }
  return dx;
}

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x / std::numbers::sqrt2)); }

double gelu_grad(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::numbers::sqrt2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
  return cdf + x * pdf;
}

Matrix linear(const Matrix& x, const Matrix& w, const Matrix& b) {
  Matrix out;
  matmul(x, w, out);
  add_row_bias(out, b);
  return out;
}

struct AttentionDims {
  std::size_t rows, cols, heads, head_dim;
};

void attention_forward(const Batch& batch, const AttentionDims& dims, LayerCache& c) {
  const std::size_t S = dims.cols, H = dims.heads, dh = dims.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  c.probs.assign(dims.rows * H * S * S, 0.0);
  c.attn = Matrix(dims.rows * S, H * dh);
  std::vector<double> scores(S);
  for (std::size_t r = 0; r < dims.rows; ++r) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < S; ++i) {
        const double* qi = c.q.row(r * S + i) + off;
        double mx = -std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < S; ++j) {
          if (batch.is_pad(r, j)) continue;
          const double* kj = c.k.row(r * S + j) + off;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
          scores[j] = s * scale;
          mx = std::max(mx, scores[j]);
        }
        if (mx == -std::numeric_limits<double>::infinity()) continue;  // no valid keys
        double* p = &c.probs[((r * H + h) * S + i) * S];
        double z = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          if (batch.is_pad(r, j)) continue;
          p[j] = std::exp(scores[j] - mx);
          z += p[j];
        }
        double* out = c.attn.row(r * S + i) + off;
        for (std::size_t j = 0; j < S; ++j) {
          if (p[j] == 0.0) continue;
          p[j] /= z;
          const double* vj = c.v.row(r * S + j) + off;
          for (std::size_t e = 0; e < dh; ++e) out[e] += p[j] * vj[e];
        }
      }
    }
  }
}

void attention_backward(const AttentionDims& dims, const LayerCache& c, const Matrix& dattn,
                        Matrix& dq, Matrix& dk, Matrix& dv) {
  const std::size_t S = dims.cols, H = dims.heads, dh = dims.head_dim;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  dq = Matrix(c.q.rows, c.q.cols);
  dk = Matrix(c.k.rows, c.k.cols);
  dv = Matrix(c.v.rows, c.v.cols);
  std::vector<double> dp(S);
  for (std::size_t r = 0; r < dims.rows; ++r) {
    for (std::size_t h = 0; h < H; ++h) {
      const std::size_t off = h * dh;
      for (std::size_t i = 0; i < S; ++i) {
        const double* p = &c.probs[((r * H + h) * S + i) * S];
        const double* g = dattn.row(r * S + i) + off;
        double dot = 0.0;
        for (std::size_t j = 0; j < S; ++j) {
          dp[j] = 0.0;
          if (p[j] == 0.0) continue;
          const double* vj = c.v.row(r * S + j) + off;
          double* dvj = dv.row(r * S + j) + off;
          double s = 0.0;
          for (std::size_t e = 0; e < dh; ++e) {
            s += g[e] * vj[e];
            dvj[e] += p[j] * g[e];
          }
          dp[j] = s;
          dot += p[j] * s;
        }
        const double* qi = c.q.row(r * S + i) + off;
        double* dqi = dq.row(r * S + i) + off;
        for (std::size_t j = 0; j < S; ++j) {
          if (p[j] == 0.0) continue;
          const double ds = p[j] * (dp[j] - dot) * scale;
          const double* kj = c.k.row(r * S + j) + off;
          double* dkj = dk.row(r * S + j) + off;
          for (std::size_t e = 0; e < dh; ++e) {
            dqi[e] += ds * kj[e];
            dkj[e] += ds * qi[e];
          }
        }
      }
    }
  }
}

Matrix normal_matrix(std::size_t r, std::size_t c, double std_dev, Rng& rng) {
  Matrix m(r, c);
  for (auto& x : m.data) x = std_dev * rng.normal();
  return m;
}

}  // namespace

void validate(const ModelConfig& c) {
  if (c.n_layers < 1 || c.n_heads < 1 || c.d_model < 1 || c.d_ff < 1 || c.vocab_size < 1 ||
      c.max_seq_len < 1) {
    throw std::invalid_argument("model config counts must be >= 1");
  }
  if (c.d_model % c.n_heads != 0) throw std::invalid_argument("d_model must be divisible by n_heads");
  if (!(c.init_std >= 0.0) || !std::isfinite(c.init_std)) {
    throw std::invalid_argument("init_std must be finite and >= 0");
  }
}

ModelParams init_params(const ModelConfig& config) {
  validate(config);
  const std::size_t d = config.d_model, f = config.d_ff, V = config.vocab_size;
  ModelParams p;
  p.config = config;
  p.token_embedding = Matrix(V, d);
  p.position_embedding = Matrix(config.max_seq_len, d);
  p.layers.resize(config.n_layers);
  for (auto& L : p.layers) {
    L.ln1_scale = Matrix(1, d, 1.0);
    L.ln1_shift = Matrix(1, d);
    L.wq = Matrix(d, d);
    L.bq = Matrix(1, d);
    L.wk = Matrix(d, d);
    L.bk = Matrix(1, d);
    L.wv = Matrix(d, d);
    L.bv = Matrix(1, d);
    L.wo = Matrix(d, d);
    L.bo = Matrix(1, d);
    L.ln2_scale = Matrix(1, d, 1.0);
    L.ln2_shift = Matrix(1, d);
    L.w1 = Matrix(d, f);
    L.b1 = Matrix(1, f);
    L.w2 = Matrix(f, d);
    L.b2 = Matrix(1, d);
  }
  p.final_scale = Matrix(1, d, 1.0);
  p.final_shift = Matrix(1, d);
  p.mlm_weight = Matrix(d, V);
  p.mlm_bias = Matrix(1, V);
  p.rts_weight = Matrix(d, 1);
  p.rts_bias = Matrix(1, 1);

  Rng rng(config.init_seed);
  for_each_tensor(p, [&](const std::string&, Matrix& m, TensorRole role) {
    if (role == TensorRole::embedding || role == TensorRole::weight) {
      m = normal_matrix(m.rows, m.cols, config.init_std, rng);
    }
  });
  return p;
}

ModelParams zeros_like(const ModelParams& like) {
  ModelParams z = like;
  for_each_matrix(z, [](Matrix& m, TensorRole) {
    std::fill(m.data.begin(), m.data.end(), 0.0);
  });
  return z;
}

std::size_t parameter_count(const ModelParams& params) {
  std::size_t n = 0;
  for_each_matrix(params, [&](const Matrix& m, TensorRole) { n += m.size(); });
  return n;
}

bool all_finite(const ModelParams& params) {
  bool ok = true;
  for_each_matrix(params, [&](const Matrix& m, TensorRole) {
    for (double x : m.data) ok = ok && std::isfinite(x);
  });
  return ok;
}

ForwardOutput forward(const ModelParams& params, const Batch& batch, HeadSelection heads) {
  const auto& cfg = params.config;
  const std::size_t S = batch.cols, N = batch.rows * batch.cols, d = cfg.d_model;
  if (S > cfg.max_seq_len) {
    throw std::invalid_argument(fmt::format("sequence length {} exceeds max_seq_len {}", S, cfg.max_seq_len));
  }
  ForwardOutput out;
  out.rows = batch.rows;
  out.cols = S;

  Matrix x(N, d);
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t c = 0; c < S; ++c) {
      const TokenId id = batch.at(r, c);
      if (id < 0 || static_cast<std::size_t>(id) >= cfg.vocab_size) {
        throw std::invalid_argument(fmt::format("token id {} out of range for vocab {}", id, cfg.vocab_size));
      }
      const double* te = params.token_embedding.row(static_cast<std::size_t>(id));
      const double* pe = params.position_embedding.row(c);
      double* xr = x.row(r * S + c);
      for (std::size_t j = 0; j < d; ++j) xr[j] = te[j] + pe[j];
    }
  }

  const AttentionDims dims{batch.rows, S, cfg.n_heads, d / cfg.n_heads};
  out.layers.resize(params.layers.size());
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& L = params.layers[l];
    auto& c = out.layers[l];
    layer_norm(x, L.ln1_scale, L.ln1_shift, c.ln1);
    c.q = linear(c.ln1.out, L.wq, L.bq);
    c.k = linear(c.ln1.out, L.wk, L.bk);
    c.v = linear(c.ln1.out, L.wv, L.bv);
    attention_forward(batch, dims, c);
    const Matrix proj = linear(c.attn, L.wo, L.bo);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += proj.data[i];

    layer_norm(x, L.ln2_scale, L.ln2_shift, c.ln2);
    c.ff_pre = linear(c.ln2.out, L.w1, L.b1);
    c.ff_act = c.ff_pre;
    for (auto& v : c.ff_act.data) v = gelu(v);
    const Matrix ff = linear(c.ff_act, L.w2, L.b2);
    for (std::size_t i = 0; i < x.size(); ++i) x.data[i] += ff.data[i];
  }
  layer_norm(x, params.final_scale, params.final_shift, out.final_norm);

  if (heads.mlm) out.mlm_logits = linear(out.final_norm.out, params.mlm_weight, params.mlm_bias);
  if (heads.rts) {
    const Matrix z = linear(out.final_norm.out, params.rts_weight, params.rts_bias);
    out.rts_logits = z.data;
  }
  return out;
}

namespace {

void check_targets(const Targets& t, std::size_t n_positions) {
  if (t.positions.empty()) throw std::invalid_argument("loss undefined, |M|=0");
  if (t.positions.size() != t.labels.size()) throw std::invalid_argument("targets size mismatch");
  for (auto p : t.positions) {
    if (p >= n_positions) throw std::invalid_argument("target position out of range");
  }
}

double log_sum_exp(const double* row, std::size_t n) {
  double mx = row[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
  double s = 0.0;
  for (std::size_t j = 0; j < n; ++j) s += std::exp(row[j] - mx);
  return mx + std::log(s);
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace

double mlm_loss(const ForwardOutput& out, const Targets& targets) {
  if (out.mlm_logits.rows == 0) throw std::invalid_argument("forward output has no MLM logits");
  check_targets(targets, out.mlm_logits.rows);
  const std::size_t V = out.mlm_logits.cols;
  double total = 0.0;
  for (std::size_t i = 0; i < targets.positions.size(); ++i) {
    const double* row = out.mlm_logits.row(targets.positions[i]);
    const auto label = static_cast<std::size_t>(targets.labels[i]);
    if (label >= V) throw std::invalid_argument("label out of range");
    total += log_sum_exp(row, V) - row[label];
  }
  return total / static_cast<double>(targets.positions.size());
}

double rts_loss(const ForwardOutput& out, const Targets& targets) {
  if (out.rts_logits.empty()) throw std::invalid_argument("forward output has no RTS logits");
  check_targets(targets, out.rts_logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < targets.positions.size(); ++i) {
    const double z = out.rts_logits[targets.positions[i]];
    const double y = targets.labels[i] != 0 ? 1.0 : 0.0;
    total += softplus(z) - y * z;
  }
  return total / static_cast<double>(targets.positions.size());
}

double loss_value(const ModelParams& params, const Batch& batch, const Targets& targets) {
  const bool rts = targets.objective == Objective::rts;
  const auto out = forward(params, batch, HeadSelection{!rts, rts});
  return rts ? rts_loss(out, targets) : mlm_loss(out, targets);
}

LossAndGrad backward(const ModelParams& params, const Batch& batch, const Targets& targets,
                     double loss_scale) {
  const bool rts = targets.objective == Objective::rts;
  const ForwardOutput out = forward(params, batch, HeadSelection{!rts, rts});
  LossAndGrad res;
  res.grads = zeros_like(params);
  auto& g = res.grads;
  const auto& cfg = params.config;
  const std::size_t S = batch.cols, N = batch.rows * S, d = cfg.d_model;
  const double count = static_cast<double>(targets.positions.size());

  Matrix dxf(N, d);
  if (!rts) {
    res.loss = mlm_loss(out, targets);
    const std::size_t V = cfg.vocab_size;
    Matrix dlogits(N, V);
    for (std::size_t i = 0; i < targets.positions.size(); ++i) {
      const auto pos = targets.positions[i];
      const double* row = out.mlm_logits.row(pos);
      const double lse = log_sum_exp(row, V);
      double* drow = dlogits.row(pos);
      for (std::size_t j = 0; j < V; ++j) drow[j] += std::exp(row[j] - lse) * loss_scale / count;
      drow[static_cast<std::size_t>(targets.labels[i])] -= loss_scale / count;
    }
    matmul_at_b_acc(out.final_norm.out, dlogits, g.mlm_weight);
    col_sum_acc(dlogits, g.mlm_bias);
    matmul_a_bt(dlogits, params.mlm_weight, dxf);
  } else {
    res.loss = rts_loss(out, targets);
    Matrix dz(N, 1);
    for (std::size_t i = 0; i < targets.positions.size(); ++i) {
      const auto pos = targets.positions[i];
      const double y = targets.labels[i] != 0 ? 1.0 : 0.0;
      dz.data[pos] += (sigmoid(out.rts_logits[pos]) - y) * loss_scale / count;
    }
    matmul_at_b_acc(out.final_norm.out, dz, g.rts_weight);
    col_sum_acc(dz, g.rts_bias);
    matmul_a_bt(dz, params.rts_weight, dxf);
  }
  res.loss *= loss_scale;

  Matrix dx = layer_norm_backward(dxf, out.final_norm, params.final_scale, g.final_scale, g.final_shift);

  const AttentionDims dims{batch.rows, S, cfg.n_heads, d / cfg.n_heads};
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const auto& L = params.layers[li];
    auto& G = g.layers[li];
    const auto& c = out.layers[li];

    // Feed-forward sublayer: x_out = x_mid + W2 gelu(W1 ln2(x_mid)).
    matmul_at_b_acc(c.ff_act, dx, G.w2);
    col_sum_acc(dx, G.b2);
    Matrix dact;
    matmul_a_bt(dx, L.w2, dact);
    for (std::size_t i = 0; i < dact.size(); ++i) dact.data[i] *= gelu_grad(c.ff_pre.data[i]);
    matmul_at_b_acc(c.ln2.out, dact, G.w1);
    col_sum_acc(dact, G.b1);
    Matrix dln2;
    matmul_a_bt(dact, L.w1, dln2);
    const Matrix dmid = layer_norm_backward(dln2, c.ln2, L.ln2_scale, G.ln2_scale, G.ln2_shift);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dmid.data[i];

    // Attention sublayer: x_mid = x_in + Wo attn(ln1(x_in)).
    matmul_at_b_acc(c.attn, dx, G.wo);
    col_sum_acc(dx, G.bo);
    Matrix dattn;
    matmul_a_bt(dx, L.wo, dattn);
    Matrix dq, dk, dv;
    attention_backward(dims, c, dattn, dq, dk, dv);
    matmul_at_b_acc(c.ln1.out, dq, G.wq);
    col_sum_acc(dq, G.bq);
    matmul_at_b_acc(c.ln1.out, dk, G.wk);
    col_sum_acc(dk, G.bk);
    matmul_at_b_acc(c.ln1.out, dv, G.wv);
    col_sum_acc(dv, G.bv);
    Matrix dln1;
    matmul_a_bt(dq, L.wq, dln1);
    matmul_a_bt(dk, L.wk, dln1, true);
    matmul_a_bt(dv, L.wv, dln1, true);
    const Matrix din = layer_norm_backward(dln1, c.ln1, L.ln1_scale, G.ln1_scale, G.ln1_shift);
    for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += din.data[i];
  }

  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t col = 0; col < S; ++col) {
      const double* dr = dx.row(r * S + col);
      double* te = g.token_embedding.row(static_cast<std::size_t>(batch.at(r, col)));
      double* pe = g.position_embedding.row(col);
      for (std::size_t j = 0; j < d; ++j) {
        te[j] += dr[j];
        pe[j] += dr[j];
      }
    }
  }
  return res;
}

Batch corrupted_batch(const Batch& clean, std::span<const MaskOutcome> outcomes) {
  if (outcomes.size() != clean.rows) throw std::invalid_argument("outcome count != batch rows");
  Batch b = clean;
  for (std::size_t r = 0; r < clean.rows; ++r) {
    const auto& ids = outcomes[r].corrupted;
    for (std::size_t c = 0; c < ids.size(); ++c) b.ids[r * b.cols + c] = ids[c];
  }
  return b;
}

Targets collect_targets(Objective objective, std::span<const MaskOutcome> outcomes, std::size_t cols) {
  Targets t;
  t.objective = objective;
  for (std::size_t r = 0; r < outcomes.size(); ++r) {
    const auto& o = outcomes[r];
    for (std::size_t i = 0; i < o.loss_set.size(); ++i) {
      t.positions.push_back(r * cols + o.loss_set[i]);
      t.labels.push_back(o.labels[i]);
    }
  }
  return t;
}

ModelConfig tiny_config() {
  ModelConfig c;
  c.n_layers = 2;
  c.n_heads = 2;
  c.d_model = 8;
  c.d_ff = 16;
  c.vocab_size = 16;
  c.max_seq_len = 8;
  c.init_std = 0.5;
  return c;
}

GradCheckReport grad_check(const ModelConfig& config, std::uint64_t seed, std::size_t n_coords,
                           double h, double tol, Objective objective) {
  GradCheckReport report;
  if (h < 1e-8) {
    report.step_underflow = true;
    report.warnings.push_back(fmt::format(
        "step size {:g} underflows: finite differences are dominated by cancellation", h));
  }
  if (n_coords == 0) {
    report.warnings.push_back("no coordinates checked; pass is vacuous");
    return report;
  }

  ModelConfig cfg = config;
  cfg.init_seed = seed;
  ModelParams params = init_params(cfg);
  Rng rng(derive_seed(seed, 0x67c4));

  // Two rows of different length so the padding path is exercised.
  const std::size_t cols = std::min<std::size_t>(cfg.max_seq_len, 6);
  std::vector<TokenSequence> seqs(2);
  for (std::size_t r = 0; r < 2; ++r) {
    const std::size_t len = r == 0 ? cols : std::max<std::size_t>(3, cols - 2);
    seqs[r].ids.push_back(Vocab::kCls);
    for (std::size_t i = 1; i + 1 < len; ++i) {
      seqs[r].ids.push_back(static_cast<TokenId>(
          cfg.vocab_size > Vocab::kNumSpecials
              ? Vocab::kNumSpecials + rng.uniform_index(cfg.vocab_size - Vocab::kNumSpecials)
              : rng.uniform_index(cfg.vocab_size)));
    }
    seqs[r].ids.push_back(Vocab::kSep);
  }
  Batch batch = make_batch(seqs);
  Targets targets;
  targets.objective = objective;
  for (std::size_t r = 0; r < batch.rows; ++r) {
    for (std::size_t c = 1; c < batch.cols; ++c) {
      if (batch.is_pad(r, c) || batch.at(r, c) == Vocab::kSep) continue;
      targets.positions.push_back(r * batch.cols + c);
      targets.labels.push_back(objective == Objective::rts
                                   ? static_cast<TokenId>(rng.uniform_index(2))
                                   : static_cast<TokenId>(rng.uniform_index(cfg.vocab_size)));
      if (objective == Objective::mlm && targets.positions.size() % 2 == 1) {
        batch.ids[r * batch.cols + c] = Vocab::kMask % static_cast<TokenId>(cfg.vocab_size);
      }
    }
  }

  const LossAndGrad analytic = backward(params, batch, targets);

  std::vector<std::pair<std::string, Matrix*>> tensors;
  std::vector<const Matrix*> grads;
  for_each_tensor(params, [&](const std::string& name, Matrix& m, TensorRole) {
    tensors.emplace_back(name, &m);
  });
  for_each_tensor(analytic.grads, [&](const std::string&, const Matrix& m, TensorRole) {
    grads.push_back(&m);
  });

  for (std::size_t k = 0; k < n_coords; ++k) {
    const std::size_t ti = k % tensors.size();
    auto& [name, tensor] = tensors[ti];
    const std::size_t idx = rng.uniform_index(tensor->size());
    const double saved = tensor->data[idx];
    tensor->data[idx] = saved + h;
    const double fp = loss_value(params, batch, targets);
    tensor->data[idx] = saved - h;
    const double fm = loss_value(params, batch, targets);
    tensor->data[idx] = saved;

    const double numeric = (fp - fm) / (2.0 * h);
    const double a = grads[ti]->data[idx];
    // Below 1e-6 the comparison is absolute: some gradients are exactly zero
    // (key biases under softmax shift invariance) and the difference quotient
    // of those is pure roundoff, around 1e-12.
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    ++report.n_checked;
    if (k < tensors.size()) report.tensors_covered.push_back(name);
    if (rel >= report.worst_rel_error) {
      report.worst_rel_error = rel;
      report.worst_coordinate = fmt::format("{}[{}]", name, idx);
    }
  }
  report.passed = report.worst_rel_error < tol && !report.step_underflow;
  return report;
}

}  // namespace maskrate
