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

#ifndef CGC_OPTIM_H_
#define CGC_OPTIM_H_

#include <cstdint>
#include <string>

#include "cgc/nn.h"

namespace cgc::optim {

enum class OptimizerKind { kAdam, kLion };

OptimizerKind parse_optimizer_kind(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerHyperparams {
  OptimizerKind kind = OptimizerKind::kAdam;
  double learning_rate = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;  // Adam only
  double weight_decay = 0.0;
  double max_grad_norm = 0.0;  // 0 disables clipping

  // beta2 = 0.99 and no weight decay, as recommended for Lion.
  static OptimizerHyperparams lion(double learning_rate);
  static OptimizerHyperparams adam(double learning_rate);
  void validate() const;
};

struct OptimizerState {
  OptimizerHyperparams hyperparams;
  ParamVector first_moment;
  ParamVector second_moment;  // empty for Lion
  std::uint64_t step_count = 0;

  static OptimizerState make(const OptimizerHyperparams& hp,
                             Eigen::Index param_count);
};

struct EmaState {
  ParamVector params;
  double decay = 0.999;
};

void adam_step(OptimizerState& state, ParamVector& params,
               const ParamVector& grads);
void lion_step(OptimizerState& state, ParamVector& params,
               const ParamVector& grads);

// Dispatches on the state's kind after optional max-norm clipping.
void apply_update(OptimizerState& state, ParamVector& params,
                  const ParamVector& grads);

void ema_update(EmaState& ema, const ParamVector& params);

}  // namespace cgc::optim

#endif  // CGC_OPTIM_H_
