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

// Consistency model f(x, sigma) = c_skip(sigma) x + c_out(sigma) F(x, sigma)
// with
//   c_skip(sigma) = sigma_data^2 / ((sigma - sigma_min)^2 + sigma_data^2)
//   c_out(sigma)  = sigma_data (sigma - sigma_min) / sqrt(sigma^2 + sigma_data^2)
// so that f(x, sigma_min) = x exactly.

#ifndef CGC_MODEL_H_
#define CGC_MODEL_H_

#include <string>

#include "cgc/nn.h"

namespace cgc {

struct ConsistencyModel {
  nn::NetworkSpec spec;
  ParamVector params;
  double sigma_data = 1.0;
  double sigma_min = 0.001;
  double sigma_max = 1.0;

  double c_skip(double sigma) const;
  double c_out(double sigma) const;
};

struct ConsistencyOutput {
  Batch output;
  nn::Tape tape;
  Eigen::VectorXd c_skip;
  Eigen::VectorXd c_out;
};

// Evaluates f with the given parameters (live or EMA); sigma must lie in
// [sigma_min, sigma_max] per sample.
ConsistencyOutput consistency_output(const ConsistencyModel& model,
                                     const ParamVector& params, const Batch& x,
                                     const Eigen::VectorXd& sigma);
ConsistencyOutput consistency_output(const ConsistencyModel& model,
                                     const Batch& x,
                                     const Eigen::VectorXd& sigma);

// f without a tape.
Batch consistency_eval(const ConsistencyModel& model, const ParamVector& params,
                       const Batch& x, const Eigen::VectorXd& sigma);

// Pulls a cotangent on f's output back to parameters and inputs.
nn::Gradients consistency_backward(const ConsistencyModel& model,
                                   const ParamVector& params,
                                   ConsistencyOutput&& out,
                                   const Batch& cotangent);
nn::GradientMoments consistency_backward_moments(const ConsistencyModel& model,
                                                 const ParamVector& params,
                                                 ConsistencyOutput&& out,
                                                 const Batch& cotangent);

enum class DistanceKind { kSquaredL2, kPseudoHuber };

struct DistanceFn {
  DistanceKind kind = DistanceKind::kSquaredL2;
  double c = 0.0;  // pseudo-Huber scale

  static DistanceFn squared_l2() { return {}; }
  static DistanceFn pseudo_huber(double c) {
    return {DistanceKind::kPseudoHuber, c};
  }
};

DistanceFn parse_distance(const std::string& name, double c);
std::string to_string(DistanceKind kind);

// Per-sample distance D(a_j, b_j).
Eigen::VectorXd distance(const DistanceFn& fn, const Batch& a, const Batch& b);
// d D(a_j, b_j) / d b_j, per column.
Batch distance_grad(const DistanceFn& fn, const Batch& a, const Batch& b);

}  // namespace cgc

#endif  // CGC_MODEL_H_
