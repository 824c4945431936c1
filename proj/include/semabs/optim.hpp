// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "semabs/nn.hpp"

#include <cmath>
#include <numbers>

namespace semabs {

struct AdamWConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;

  void validate() const {
    SEMABS_EXPECT(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1, "AdamW: betas must lie in [0, 1)");
    SEMABS_EXPECT(eps > 0 && weight_decay >= 0, "AdamW: eps > 0 and weight_decay >= 0 required");
  }
};

/// Cosine annealing with warm restarts. Period i lasts t0 * mult^i steps.
struct ScheduleConfig {
  double lr_max = 5e-4;
  double lr_min = 0.0;
  std::uint64_t t0 = 1;
  std::uint64_t mult = 2;

  void validate() const {
    SEMABS_EXPECT(lr_max > 0 && lr_min >= 0 && lr_min <= lr_max, "schedule: need 0 <= lr_min <= lr_max, lr_max > 0");
    SEMABS_EXPECT(t0 >= 1 && mult >= 1, "schedule: t0 and mult must be >= 1");
  }
};

inline double lr_at(std::uint64_t step, const ScheduleConfig& s) {
  s.validate();
  std::uint64_t t = step, period = s.t0;
  if (s.mult == 1) {
    t %= period;
  } else {
    while (t >= period) {
      t -= period;
      period *= s.mult;
    }
  }
  const double frac = static_cast<double>(t) / static_cast<double>(period);
  return s.lr_min + 0.5 * (s.lr_max - s.lr_min) * (1.0 + std::cos(std::numbers::pi * frac));
}

template <class T>
struct AdamState {
  nn::ParamSet<T> m, v;
  std::uint64_t t = 0;

  static AdamState like(const nn::ParamSet<T>& params) { return {params.zeros_like(), params.zeros_like(), 0}; }
  friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One decoupled-weight-decay Adam update:
///   p <- p - lr*wd*p - lr * mhat / (sqrt(vhat) + eps)
template <class T>
void adamw_step(nn::ParamSet<T>& params, const nn::ParamSet<T>& grads, AdamState<T>& state, double lr,
                const AdamWConfig& cfg) {
  if (!params.same_layout(grads) || !params.same_layout(state.m) || !params.same_layout(state.v))
    throw ContractViolation("adamw_step: parameter, gradient and state layouts differ");
  ++state.t;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  auto& pt = params.tensors();
  const auto& gt = grads.tensors();
  auto& mt = state.m.tensors();
  auto& vt = state.v.tensors();
  for (std::size_t k = 0; k < pt.size(); ++k) {
    for (std::size_t i = 0; i < pt[k].size(); ++i) {
      const double g = gt[k].value[i];
      const double m = cfg.beta1 * mt[k].value[i] + (1.0 - cfg.beta1) * g;
      const double v = cfg.beta2 * vt[k].value[i] + (1.0 - cfg.beta2) * g * g;
      mt[k].value[i] = static_cast<T>(m);
      vt[k].value[i] = static_cast<T>(v);
      double p = pt[k].value[i];
      p -= lr * cfg.weight_decay * p;
      p -= lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
      pt[k].value[i] = static_cast<T>(p);
    }
  }
}

}  // namespace semabs
