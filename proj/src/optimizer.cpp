// SPDX-License-Identifier: Apache-2.0
#include "maskrate/optimizer.hpp"

#include <cmath>
#include <vector>

namespace maskrate {

OptState init_opt_state(const ModelParams& params) {
  return OptState{zeros_like(params), zeros_like(params), 0};
}

void adamw_step(ModelParams& params, const ModelParams& grads, OptState& opt, double lr,
                const AdamWConfig& config) {
  std::vector<Matrix*> p_list, m_list, v_list;
  std::vector<const Matrix*> g_list;
  std::vector<bool> decay;
  for_each_matrix(params, [&](Matrix& m, TensorRole role) {
    p_list.push_back(&m);
    decay.push_back(role != TensorRole::norm_scale && role != TensorRole::norm_shift);
  });
  for_each_matrix(grads, [&](const Matrix& m, TensorRole) { g_list.push_back(&m); });
  for_each_matrix(opt.m, [&](Matrix& m, TensorRole) { m_list.push_back(&m); });
  for_each_matrix(opt.v, [&](Matrix& m, TensorRole) { v_list.push_back(&m); });
  if (g_list.size() != p_list.size()) throw std::invalid_argument("gradient shape mismatch");

  for (std::size_t t = 0; t < g_list.size(); ++t) {
    if (g_list[t]->size() != p_list[t]->size()) throw std::invalid_argument("gradient shape mismatch");
    for (double g : g_list[t]->data) {
      if (!std::isfinite(g)) throw DivergenceError("diverged: non-finite gradient", opt.step);
    }
  }

  ++opt.step;
  const double step = static_cast<double>(opt.step);
  const double bc1 = 1.0 - std::pow(config.beta1, step);
  const double bc2 = 1.0 - std::pow(config.beta2, step);
  for (std::size_t t = 0; t < p_list.size(); ++t) {
    auto& p = p_list[t]->data;
    auto& m = m_list[t]->data;
    auto& v = v_list[t]->data;
    const auto& g = g_list[t]->data;
    const double shrink = decay[t] ? 1.0 - lr * config.weight_decay : 1.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = config.beta1 * m[i] + (1.0 - config.beta1) * g[i];
      v[i] = config.beta2 * v[i] + (1.0 - config.beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      p[i] = p[i] * shrink - lr * (m_hat / (std::sqrt(v_hat) + config.eps));
    }
  }
}

double global_norm(const ModelParams& grads) {
  double s = 0.0;
  for_each_matrix(grads, [&](const Matrix& m, TensorRole) {
    for (double x : m.data) s += x * x;
  });
  return std::sqrt(s);
}

}  // namespace maskrate
