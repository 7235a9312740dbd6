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

#include "cgc/model.h"

#include <cmath>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc {
namespace {

void check_sigma_range(const ConsistencyModel& model,
                       const Eigen::VectorXd& sigma) {
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    if (!(sigma[j] >= model.sigma_min && sigma[j] <= model.sigma_max)) {
      fail(ErrorKind::kUsage,
           fmt::format("noise level {} at sample {} outside [{}, {}]", sigma[j],
                       j, model.sigma_min, model.sigma_max));
    }
  }
}

void fill_coefficients(const ConsistencyModel& model,
                       const Eigen::VectorXd& sigma, Eigen::VectorXd& skip,
                       Eigen::VectorXd& out) {
  skip.resize(sigma.size());
  out.resize(sigma.size());
  for (Eigen::Index j = 0; j < sigma.size(); ++j) {
    skip[j] = model.c_skip(sigma[j]);
    out[j] = model.c_out(sigma[j]);
  }
}

void check_pair(const Batch& a, const Batch& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kStructural,
         fmt::format("distance between {}x{} and {}x{} batches", a.rows(),
                     a.cols(), b.rows(), b.cols()));
  }
}

}  // namespace

double ConsistencyModel::c_skip(double sigma) const {
  const double d = sigma - sigma_min;
  const double s2 = sigma_data * sigma_data;
  return s2 / (d * d + s2);
}

double ConsistencyModel::c_out(double sigma) const {
  return sigma_data * (sigma - sigma_min) /
         std::sqrt(sigma * sigma + sigma_data * sigma_data);
}

ConsistencyOutput consistency_output(const ConsistencyModel& model,
                                     const ParamVector& params, const Batch& x,
                                     const Eigen::VectorXd& sigma) {
  check_sigma_range(model, sigma);
  ConsistencyOutput out;
  auto fwd = nn::forward(model.spec, params, x, sigma);
  fill_coefficients(model, sigma, out.c_skip, out.c_out);
  out.output = x * out.c_skip.asDiagonal();
  out.output += fwd.output * out.c_out.asDiagonal();
  out.tape = std::move(fwd.tape);
  return out;
}

ConsistencyOutput consistency_output(const ConsistencyModel& model,
                                     const Batch& x,
                                     const Eigen::VectorXd& sigma) {
  return consistency_output(model, model.params, x, sigma);
}

Batch consistency_eval(const ConsistencyModel& model, const ParamVector& params,
                       const Batch& x, const Eigen::VectorXd& sigma) {
  check_sigma_range(model, sigma);
  Eigen::VectorXd skip, cout;
  fill_coefficients(model, sigma, skip, cout);
  Batch f = x * skip.asDiagonal();
  f += nn::evaluate(model.spec, params, x, sigma) * cout.asDiagonal();
  return f;
}

nn::Gradients consistency_backward(const ConsistencyModel& model,
                                   const ParamVector& params,
                                   ConsistencyOutput&& out,
                                   const Batch& cotangent) {
  auto grads = nn::backward(model.spec, params, std::move(out.tape),
                            cotangent * out.c_out.asDiagonal());
  grads.input += cotangent * out.c_skip.asDiagonal();
  return grads;
}

nn::GradientMoments consistency_backward_moments(const ConsistencyModel& model,
                                                 const ParamVector& params,
                                                 ConsistencyOutput&& out,
                                                 const Batch& cotangent) {
  return nn::backward_moments(model.spec, params, std::move(out.tape),
                              cotangent * out.c_out.asDiagonal());
}

DistanceFn parse_distance(const std::string& name, double c) {
  if (name == "l2" || name == "squared_l2") return DistanceFn::squared_l2();
  if (name == "pseudo_huber") {
    if (!(c > 0.0)) {
      fail(ErrorKind::kConfig,
           fmt::format("pseudo-Huber scale must be positive, got {}", c));
    }
    return DistanceFn::pseudo_huber(c);
  }
  fail(ErrorKind::kConfig, fmt::format("unknown distance '{}'", name));
}

std::string to_string(DistanceKind kind) {
  return kind == DistanceKind::kSquaredL2 ? "squared_l2" : "pseudo_huber";
}

Eigen::VectorXd distance(const DistanceFn& fn, const Batch& a, const Batch& b) {
  check_pair(a, b);
  const Eigen::VectorXd sq = (a - b).colwise().squaredNorm().transpose();
  if (fn.kind == DistanceKind::kSquaredL2) return sq;
  // sqrt(s + c^2) - c, rearranged to avoid cancellation for small s.
  return (sq.array() / ((sq.array() + fn.c * fn.c).sqrt() + fn.c)).matrix();
}

Batch distance_grad(const DistanceFn& fn, const Batch& a, const Batch& b) {
  check_pair(a, b);
  Batch diff = b - a;
  if (fn.kind == DistanceKind::kSquaredL2) return 2.0 * diff;
  const Eigen::VectorXd denom =
      (diff.colwise().squaredNorm().array() + fn.c * fn.c).sqrt().transpose();
  return diff * denom.cwiseInverse().asDiagonal();
}

}  // namespace cgc
