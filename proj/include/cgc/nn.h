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

// Dense GELU network F(x, sigma) used as the backbone of both the consistency
// model and the score model. The noise level enters as one extra input
// feature, ln(sigma), appended below the data coordinates.
//
// Batches are column-major: one sample per column.
//
// Parameter layout (ParamVector): layer by layer from input to output; for
// each layer the weight matrix (out x in, column-major) followed by the bias
// (out). Layer l maps in_l -> out_l with
//   in_0 = input_dim + 1, out_l = hidden_dim for l < depth,
//   and the final layer maps hidden_dim (or input_dim + 1 when depth == 0)
//   to output_dim.

#ifndef CGC_NN_H_
#define CGC_NN_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "cgc/rng.h"

namespace cgc {

using Batch = Eigen::MatrixXd;
using ParamVector = Eigen::VectorXd;

namespace nn {

struct NetworkSpec {
  int input_dim = 2;
  int hidden_dim = 256;
  int depth = 4;  // hidden layers; 0 is the degenerate affine network
  int output_dim = 2;

  int conditioned_input_dim() const { return input_dim + 1; }
  // Closed-form parameter count.
  std::size_t param_count() const;
  void validate() const;

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

struct LayerShape {
  int in = 0;
  int out = 0;
  std::size_t weight_offset = 0;
  std::size_t bias_offset = 0;
};

std::vector<LayerShape> layer_shapes(const NetworkSpec& spec);

// He-uniform hidden layers, zero biases, zero final layer (so F == 0).
ParamVector init_params(const NetworkSpec& spec, Rng& rng);

// Activations cached by forward() for a single backward() call.
class Tape {
 public:
  Tape() = default;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Eigen::Index batch_size() const { return batch_; }
  bool consumed() const { return consumed_; }

 private:
  friend struct TapeAccess;
  NetworkSpec spec_;
  Eigen::Index batch_ = 0;
  std::uint64_t fingerprint_ = 0;
  bool consumed_ = true;
  std::vector<Eigen::MatrixXd> inputs_;      // input to every layer
  std::vector<Eigen::MatrixXd> activation_slopes_;  // gelu'(z), hidden layers
};

struct ForwardResult {
  Batch output;
  Tape tape;
};

ForwardResult forward(const NetworkSpec& spec, const ParamVector& params,
                      const Batch& x, const Eigen::VectorXd& sigma);

// forward() without recording a tape.
Batch evaluate(const NetworkSpec& spec, const ParamVector& params,
               const Batch& x, const Eigen::VectorXd& sigma);

struct Gradients {
  ParamVector params;
  Batch input;  // d/dx, without the ln(sigma) row
};

Gradients backward(const NetworkSpec& spec, const ParamVector& params,
                   Tape&& tape, const Batch& output_cotangent);

// Per-sample gradient moments: column j of the cotangent defines a per-sample
// gradient g_j; returns sum_j g_j and sum_j g_j^2 (elementwise) without
// materializing the g_j.
struct GradientMoments {
  ParamVector sum;
  ParamVector sum_sq;
  Eigen::Index count = 0;
};

GradientMoments backward_moments(const NetworkSpec& spec,
                                 const ParamVector& params, Tape&& tape,
                                 const Batch& output_cotangent);

std::uint64_t fingerprint(const ParamVector& params);

// Vectorized erf, absolute error below 1e-12.
void erf_inplace(std::span<double> values);
double erf(double x);
double gelu(double x);
double gelu_derivative(double x);

}  // namespace nn
}  // namespace cgc

#endif  // CGC_NN_H_
