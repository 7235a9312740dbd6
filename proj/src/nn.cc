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

#include "cgc/nn.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <numbers>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc::nn {

struct TapeAccess {
  static NetworkSpec& spec(Tape& t) { return t.spec_; }
  static Eigen::Index& batch(Tape& t) { return t.batch_; }
  static std::uint64_t& fingerprint(Tape& t) { return t.fingerprint_; }
  static bool& consumed(Tape& t) { return t.consumed_; }
  static std::vector<Eigen::MatrixXd>& inputs(Tape& t) { return t.inputs_; }
  static std::vector<Eigen::MatrixXd>& slopes(Tape& t) {
    return t.activation_slopes_;
  }
};

namespace {

// Chebyshev coefficients of g(u) with erfc(z) = t exp(-z^2 + g(2t - 1)),
// t = 1 / (1 + z / 2), valid for all z >= 0.
constexpr std::array<double, 28> kErfcCheb = {
    -0.6513268598908547, 0.6419697923564902, 0.019476473204185836,
    -0.009561514786808632, -0.0009465953444820369, 0.00036683949785276145,
    4.252332480690777e-05, -2.0278578112534242e-05, -1.6242900046470256e-06,
    1.3036558355805232e-06, 1.5626441722066142e-08, -8.523809591492654e-08,
    6.5290544390988515e-09, 5.059343495551469e-09, -9.91364156493033e-10,
    -2.273651222931836e-10, 9.646791102015527e-11, 2.3940380830391146e-12,
    -6.886027526497553e-12, 8.944879273090725e-13, 3.130921399342958e-13,
    -1.1270822361367252e-13, 3.810905255189232e-16, 7.106097613609237e-15,
    -1.5230282014571043e-15, -9.457494571291233e-17, 1.210237189224279e-16,
    -2.816663087747177e-17};

constexpr double kTwoOverSqrtPi = 1.12837916709551257390;
constexpr int kErfBlock = 128;
using Block = Eigen::Array<double, kErfBlock, 1>;

void erf_block(Block& v) {
  const Block a = v.abs();
  const Block t = 1.0 / (1.0 + 0.5 * a);
  const Block u = 2.0 * t - 1.0;
  Block b1 = Block::Zero();
  Block b2 = Block::Zero();
  for (std::size_t k = kErfcCheb.size() - 1; k >= 1; --k) {
    Block next = 2.0 * u * b1 - b2 + kErfcCheb[k];
    b2 = b1;
    b1 = next;
  }
  const Block g = u * b1 - b2 + kErfcCheb[0];
  const Block erfc = t * (g - a.square()).exp();
  const Block e = (v < 0.0).select(erfc - 1.0, 1.0 - erfc);
  // Linear term below 1e-8 keeps erf(0) == 0 and avoids 1 - erfc cancellation.
  v = (a < 1e-8).select(kTwoOverSqrtPi * v, e);
}

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

void check_params(const NetworkSpec& spec, const ParamVector& params) {
  if (static_cast<std::size_t>(params.size()) != spec.param_count()) {
    fail(ErrorKind::kStructural,
         fmt::format("parameter vector has {} entries, network expects {}",
                     params.size(), spec.param_count()));
  }
}

void check_inputs(const NetworkSpec& spec, const Batch& x,
                  const Eigen::VectorXd& sigma) {
  if (x.cols() == 0) fail(ErrorKind::kUsage, "empty input batch");
  if (x.rows() != spec.input_dim) {
    fail(ErrorKind::kStructural,
         fmt::format("input has dimension {}, network expects {}", x.rows(),
                     spec.input_dim));
  }
  if (sigma.size() != x.cols()) {
    fail(ErrorKind::kStructural,
         fmt::format("{} noise levels for a batch of {}", sigma.size(),
                     x.cols()));
  }
  if (!x.allFinite()) fail(ErrorKind::kNumeric, "non-finite network input");
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    if (!(sigma[j] > 0.0) || !std::isfinite(sigma[j])) {
      fail(ErrorKind::kNumeric,
           fmt::format("noise level {} at sample {} is not a positive finite "
                       "number",
                       sigma[j], j));
    }
  }
}

Eigen::Map<const Eigen::MatrixXd> weight(const ParamVector& p,
                                         const LayerShape& s) {
  return {p.data() + s.weight_offset, s.out, s.in};
}
Eigen::Map<const Eigen::VectorXd> bias(const ParamVector& p,
                                       const LayerShape& s) {
  return {p.data() + s.bias_offset, s.out};
}
Eigen::Map<Eigen::MatrixXd> weight(ParamVector& p, const LayerShape& s) {
  return {p.data() + s.weight_offset, s.out, s.in};
}
Eigen::Map<Eigen::VectorXd> bias(ParamVector& p, const LayerShape& s) {
  return {p.data() + s.bias_offset, s.out};
}

Eigen::MatrixXd conditioned_input(const Batch& x,
                                  const Eigen::VectorXd& sigma) {
  Eigen::MatrixXd h(x.rows() + 1, x.cols());
  h.topRows(x.rows()) = x;
  h.row(x.rows()) = sigma.array().log().matrix().transpose();
  return h;
}

// Runs the network; when `tape` is non-null, records what backward needs.
Batch run(const NetworkSpec& spec, const ParamVector& params, const Batch& x,
          const Eigen::VectorXd& sigma, Tape* tape) {
  spec.validate();
  check_params(spec, params);
  check_inputs(spec, x, sigma);
  const auto shapes = layer_shapes(spec);
  Eigen::MatrixXd h = conditioned_input(x, sigma);
  if (tape != nullptr) {
    TapeAccess::spec(*tape) = spec;
    TapeAccess::batch(*tape) = x.cols();
    TapeAccess::fingerprint(*tape) = fingerprint(params);
    TapeAccess::consumed(*tape) = false;
    TapeAccess::inputs(*tape).clear();
    TapeAccess::slopes(*tape).clear();
  }
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    Eigen::MatrixXd z = weight(params, s) * h;
    z.colwise() += bias(params, s);
    if (tape != nullptr) TapeAccess::inputs(*tape).push_back(std::move(h));
    if (l + 1 == shapes.size()) return z;
    // GELU: z * Phi(z), Phi(z) = (1 + erf(z / sqrt 2)) / 2.
    Eigen::ArrayXXd phi_cdf = z.array() * kInvSqrt2;
    erf_inplace({phi_cdf.data(), static_cast<std::size_t>(phi_cdf.size())});
    phi_cdf = 0.5 * (1.0 + phi_cdf);
    if (tape != nullptr) {
      TapeAccess::slopes(*tape).push_back(
          (phi_cdf + z.array() * kInvSqrt2Pi * (-0.5 * z.array().square()).exp())
              .matrix());
    }
    h = (z.array() * phi_cdf).matrix();
  }
  return h;  // unreachable: the last layer returns above
}

void check_tape(const NetworkSpec& spec, const ParamVector& params, Tape& tape,
                const Batch& cotangent) {
  if (tape.consumed()) {
    fail(ErrorKind::kStructural, "tape already consumed or never recorded");
  }
  if (!(TapeAccess::spec(tape) == spec)) {
    fail(ErrorKind::kStructural, "tape recorded for a different network");
  }
  if (TapeAccess::fingerprint(tape) != fingerprint(params)) {
    fail(ErrorKind::kStructural,
         "tape is stale: parameters changed since the forward pass");
  }
  if (cotangent.rows() != spec.output_dim ||
      cotangent.cols() != tape.batch_size()) {
    fail(ErrorKind::kStructural,
         fmt::format("cotangent is {}x{}, expected {}x{}", cotangent.rows(),
                     cotangent.cols(), spec.output_dim, tape.batch_size()));
  }
  TapeAccess::consumed(tape) = true;
}

}  // namespace

std::size_t NetworkSpec::param_count() const {
  const std::size_t in = static_cast<std::size_t>(conditioned_input_dim());
  const std::size_t h = static_cast<std::size_t>(hidden_dim);
  const std::size_t out = static_cast<std::size_t>(output_dim);
  if (depth == 0) return in * out + out;
  return (in * h + h) + static_cast<std::size_t>(depth - 1) * (h * h + h) +
         (h * out + out);
}

void NetworkSpec::validate() const {
  if (input_dim < 1 || hidden_dim < 1 || output_dim < 1 || depth < 0) {
    fail(ErrorKind::kStructural,
         fmt::format("invalid network spec: input {} hidden {} depth {} "
                     "output {}",
                     input_dim, hidden_dim, depth, output_dim));
  }
}

std::vector<LayerShape> layer_shapes(const NetworkSpec& spec) {
  std::vector<LayerShape> shapes;
  std::size_t offset = 0;
  int in = spec.conditioned_input_dim();
  for (int l = 0; l <= spec.depth; ++l) {
    const int out = l == spec.depth ? spec.output_dim : spec.hidden_dim;
    LayerShape s{in, out, offset, offset + static_cast<std::size_t>(in) * out};
    offset = s.bias_offset + static_cast<std::size_t>(out);
    shapes.push_back(s);
    in = out;
  }
  return shapes;
}

ParamVector init_params(const NetworkSpec& spec, Rng& rng) {
  spec.validate();
  ParamVector params = ParamVector::Zero(
      static_cast<Eigen::Index>(spec.param_count()));
  const auto shapes = layer_shapes(spec);
  std::size_t counted = 0;
  for (std::size_t l = 0; l < shapes.size(); ++l) {
    const auto& s = shapes[l];
    counted += static_cast<std::size_t>(s.in) * s.out + s.out;
    if (l + 1 == shapes.size()) break;
    const double bound = std::sqrt(6.0 / s.in);
    std::uniform_real_distribution<double> uniform(-bound, bound);
    auto w = weight(params, s);
    for (Eigen::Index c = 0; c < w.cols(); ++c) {
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = uniform(rng);
    }
  }
  if (counted != spec.param_count()) {
    fail(ErrorKind::kStructural,
         fmt::format("layer enumeration found {} parameters, closed form {}",
                     counted, spec.param_count()));
  }
  return params;
}

ForwardResult forward(const NetworkSpec& spec, const ParamVector& params,
                      const Batch& x, const Eigen::VectorXd& sigma) {
  ForwardResult result;
  result.output = run(spec, params, x, sigma, &result.tape);
  return result;
}

Batch evaluate(const NetworkSpec& spec, const ParamVector& params,
               const Batch& x, const Eigen::VectorXd& sigma) {
  return run(spec, params, x, sigma, nullptr);
}

Gradients backward(const NetworkSpec& spec, const ParamVector& params,
                   Tape&& tape, const Batch& output_cotangent) {
  check_tape(spec, params, tape, output_cotangent);
  const auto shapes = layer_shapes(spec);
  auto& inputs = TapeAccess::inputs(tape);
  auto& slopes = TapeAccess::slopes(tape);
  Gradients grads;
  grads.params = ParamVector::Zero(params.size());
  Eigen::MatrixXd delta = output_cotangent;
  for (std::size_t l = shapes.size(); l-- > 0;) {
    const auto& s = shapes[l];
    weight(grads.params, s).noalias() = delta * inputs[l].transpose();
    bias(grads.params, s) = delta.rowwise().sum();
    Eigen::MatrixXd back = weight(params, s).transpose() * delta;
    if (l == 0) {
      grads.input = back.topRows(spec.input_dim);
    } else {
      delta = (back.array() * slopes[l - 1].array()).matrix();
    }
  }
  inputs.clear();
  slopes.clear();
  return grads;
}

GradientMoments backward_moments(const NetworkSpec& spec,
                                 const ParamVector& params, Tape&& tape,
                                 const Batch& output_cotangent) {
  check_tape(spec, params, tape, output_cotangent);
  const auto shapes = layer_shapes(spec);
  auto& inputs = TapeAccess::inputs(tape);
  auto& slopes = TapeAccess::slopes(tape);
  GradientMoments m;
  m.count = output_cotangent.cols();
  m.sum = ParamVector::Zero(params.size());
  m.sum_sq = ParamVector::Zero(params.size());
  Eigen::MatrixXd delta = output_cotangent;
  for (std::size_t l = shapes.size(); l-- > 0;) {
    const auto& s = shapes[l];
    // g_j = delta_j a_j^T, so sum_j g_j^2 = (delta o delta)(a o a)^T.
    weight(m.sum, s).noalias() = delta * inputs[l].transpose();
    weight(m.sum_sq, s).noalias() =
        delta.cwiseAbs2() * inputs[l].cwiseAbs2().transpose();
    bias(m.sum, s) = delta.rowwise().sum();
    bias(m.sum_sq, s) = delta.cwiseAbs2().rowwise().sum();
    if (l == 0) break;
    delta = ((weight(params, s).transpose() * delta).array() *
             slopes[l - 1].array())
                .matrix();
  }
  inputs.clear();
  slopes.clear();
  return m;
}

std::uint64_t fingerprint(const ParamVector& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL ^ static_cast<std::uint64_t>(params.size());
  for (Eigen::Index i = 0; i < params.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, params.data() + i, sizeof(bits));
    h = (h ^ bits) * 0x100000001b3ULL;
  }
  return h;
}

void erf_inplace(std::span<double> values) {
  std::size_t i = 0;
  Block block;
  for (; i + kErfBlock <= values.size(); i += kErfBlock) {
    block = Eigen::Map<const Block>(values.data() + i);
    erf_block(block);
    Eigen::Map<Block>(values.data() + i) = block;
  }
  const std::size_t rest = values.size() - i;
  if (rest == 0) return;
  block.setZero();
  std::copy_n(values.data() + i, rest, block.data());
  erf_block(block);
  std::copy_n(block.data(), rest, values.data() + i);
}

double erf(double x) {
  erf_inplace({&x, 1});
  return x;
}

double gelu(double x) { return 0.5 * x * (1.0 + erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
  return 0.5 * (1.0 + erf(x * kInvSqrt2)) +
         x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

}  // namespace cgc::nn
