// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <stdexcept>

#include "maskrate/model.hpp"

namespace maskrate {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-6;
  double weight_decay = 1e-5;

  friend bool operator==(const AdamWConfig&, const AdamWConfig&) = default;
};

/// First and second moments, shaped like the parameters.
struct OptState {
  ModelParams m;
  ModelParams v;
  std::int64_t step = 0;

  friend bool operator==(const OptState&, const OptState&) = default;
};

OptState init_opt_state(const ModelParams& params);

class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::int64_t step)
      : std::runtime_error(what), step_(step) {}
  std::int64_t step() const noexcept { return step_; }

 private:
  std::int64_t step_;
};

/// One bias-corrected AdamW update:
///   theta <- theta * (1 - lr * wd) - lr * m_hat / (sqrt(v_hat) + eps)
/// Weight decay skips layer-norm scale and shift. Throws DivergenceError if
/// any gradient entry is non-finite (parameters are left untouched).
void adamw_step(ModelParams& params, const ModelParams& grads, OptState& opt, double lr,
                const AdamWConfig& config);

/// Euclidean norm over every gradient entry.
double global_norm(const ModelParams& grads);

}  // namespace maskrate
