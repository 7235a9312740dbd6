// Copyright 2026 The CGC Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cgc/optim.h"

#include <cmath>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc::optim {
namespace {

void check_step(const OptimizerState& state, const ParamVector& params,
                const ParamVector& grads) {
  if (params.size() != grads.size() ||
      state.first_moment.size() != params.size()) {
    fail(ErrorKind::kStructural,
         fmt::format("optimizer lengths differ: params {}, grads {}, "
                     "moments {}",
                     params.size(), grads.size(), state.first_moment.size()));
  }
  for (Eigen::Index i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) {
      fail(ErrorKind::kNumeric,
           fmt::format("non-finite gradient {} at index {}", grads[i], i));
    }
  }
}

double sign(double v) { return static_cast<double>((v > 0.0) - (v < 0.0)); }

}  // namespace

OptimizerKind parse_optimizer_kind(const std::string& name) {
  if (name == "adam") return OptimizerKind::kAdam;
  if (name == "lion") return OptimizerKind::kLion;
  fail(ErrorKind::kConfig, fmt::format("unknown optimizer '{}'", name));
}

std::string to_string(OptimizerKind kind) {
  return kind == OptimizerKind::kAdam ? "adam" : "lion";
}

OptimizerHyperparams OptimizerHyperparams::lion(double learning_rate) {
  OptimizerHyperparams hp;
  hp.kind = OptimizerKind::kLion;
  hp.learning_rate = learning_rate;
  hp.beta1 = 0.9;
  hp.beta2 = 0.99;
  return hp;
}

OptimizerHyperparams OptimizerHyperparams::adam(double learning_rate) {
  OptimizerHyperparams hp;
  hp.learning_rate = learning_rate;
  return hp;
}

void OptimizerHyperparams::validate() const {
  if (!(learning_rate > 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) ||
      !(beta2 >= 0.0 && beta2 < 1.0) || !(epsilon >= 0.0) ||
      !(weight_decay >= 0.0) || !(max_grad_norm >= 0.0)) {
    fail(ErrorKind::kConfig,
         fmt::format("invalid optimizer hyperparameters: lr {} beta1 {} "
                     "beta2 {} eps {} wd {} clip {}",
                     learning_rate, beta1, beta2, epsilon, weight_decay,
                     max_grad_norm));
  }
}

OptimizerState OptimizerState::make(const OptimizerHyperparams& hp,
                                    Eigen::Index param_count) {
  hp.validate();
  OptimizerState s;
  s.hyperparams = hp;
  s.first_moment = ParamVector::Zero(param_count);
  if (hp.kind == OptimizerKind::kAdam) {
    s.second_moment = ParamVector::Zero(param_count);
  }
  return s;
}

void adam_step(OptimizerState& state, ParamVector& params,
               const ParamVector& grads) {
  check_step(state, params, grads);
  if (state.second_moment.size() != params.size()) {
    fail(ErrorKind::kStructural, "Adam state lacks a second moment");
  }
  const auto& hp = state.hyperparams;
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double bias1 = 1.0 - std::pow(hp.beta1, t);
  const double bias2 = 1.0 - std::pow(hp.beta2, t);
  state.first_moment = hp.beta1 * state.first_moment + (1.0 - hp.beta1) * grads;
  state.second_moment = hp.beta2 * state.second_moment +
                        (1.0 - hp.beta2) * grads.cwiseAbs2();
  const auto m_hat = state.first_moment.array() / bias1;
  const auto v_hat = state.second_moment.array() / bias2;
  params.array() -= hp.learning_rate *
                    (m_hat / (v_hat.sqrt() + hp.epsilon) +
                     hp.weight_decay * params.array());
}

void lion_step(OptimizerState& state, ParamVector& params,
               const ParamVector& grads) {
  check_step(state, params, grads);
  const auto& hp = state.hyperparams;
  ++state.step_count;
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    const double direction =
        sign(hp.beta1 * state.first_moment[i] + (1.0 - hp.beta1) * grads[i]);
    params[i] -= hp.learning_rate * (direction + hp.weight_decay * params[i]);
    state.first_moment[i] =
        hp.beta2 * state.first_moment[i] + (1.0 - hp.beta2) * grads[i];
  }
}

void apply_update(OptimizerState& state, ParamVector& params,
                  const ParamVector& grads) {
  const double clip = state.hyperparams.max_grad_norm;
  const ParamVector* g = &grads;
  ParamVector clipped;
  if (clip > 0.0) {
    const double norm = grads.norm();
    if (norm > clip) {
      clipped = grads * (clip / norm);
      g = &clipped;
    }
  }
  if (state.hyperparams.kind == OptimizerKind::kAdam) {
    adam_step(state, params, *g);
  } else {
    lion_step(state, params, *g);
  }
}

void ema_update(EmaState& ema, const ParamVector& params) {
  if (ema.params.size() != params.size()) {
    fail(ErrorKind::kStructural,
         fmt::format("EMA holds {} parameters, model has {}",
                     ema.params.size(), params.size()));
  }
  ema.params = ema.decay * ema.params + (1.0 - ema.decay) * params;
}

}  // namespace cgc::optim
