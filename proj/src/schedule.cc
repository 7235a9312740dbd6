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

#include "cgc/schedule.h"

#include <cmath>
#include <numbers>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc {

NoiseSchedule build_grid(double sigma_min, double sigma_max, double rho,
                         int n_steps) {
  if (!(sigma_min > 0.0) || !(sigma_max > sigma_min) || !(rho > 0.0) ||
      n_steps < 1 || !std::isfinite(sigma_max)) {
    fail(ErrorKind::kConfig,
         fmt::format("invalid noise schedule: sigma_min {} sigma_max {} rho {} "
                     "N {}",
                     sigma_min, sigma_max, rho, n_steps));
  }
  NoiseSchedule s{sigma_min, sigma_max, rho, n_steps, {}};
  s.grid.resize(static_cast<std::size_t>(n_steps) + 1);
  const double lo = std::pow(sigma_min, 1.0 / rho);
  const double hi = std::pow(sigma_max, 1.0 / rho);
  for (int i = 0; i <= n_steps; ++i) {
    const double frac = static_cast<double>(i) / n_steps;
    s.grid[static_cast<std::size_t>(i)] = std::pow(lo + frac * (hi - lo), rho);
  }
  s.grid.front() = sigma_min;
  s.grid.back() = sigma_max;
  for (int i = 0; i < n_steps; ++i) {
    if (!(s.grid[static_cast<std::size_t>(i) + 1] > s.grid[static_cast<std::size_t>(i)])) {
      fail(ErrorKind::kConfig,
           fmt::format("noise grid not strictly increasing at index {}", i));
    }
  }
  return s;
}

std::int64_t Curriculum::doubling_interval() const {
  const double stages =
      std::log2(static_cast<double>(s1) / static_cast<double>(s0)) + 1.0;
  return static_cast<std::int64_t>(
      std::floor(static_cast<double>(total_steps) / stages));
}

void Curriculum::validate() const {
  if (mode == CurriculumMode::kFixed) {
    if (fixed_n < 1) {
      fail(ErrorKind::kConfig,
           fmt::format("fixed number of timesteps must be >= 1, got {}",
                       fixed_n));
    }
    return;
  }
  if (s0 < 1 || s1 < s0 || total_steps < 1 || doubling_interval() < 1) {
    fail(ErrorKind::kConfig,
         fmt::format("invalid curriculum: s0 {} s1 {} K {}", s0, s1,
                     total_steps));
  }
}

int curriculum_n(const Curriculum& curriculum, std::int64_t k) {
  curriculum.validate();
  if (k < 0 || k >= curriculum.total_steps) {
    fail(ErrorKind::kUsage,
         fmt::format("training step {} outside [0, {})", k,
                     curriculum.total_steps));
  }
  if (curriculum.mode == CurriculumMode::kFixed) return curriculum.fixed_n;
  const std::int64_t doublings = k / curriculum.doubling_interval();
  std::int64_t n = curriculum.s0;
  for (std::int64_t d = 0; d < doublings && n < curriculum.s1; ++d) n *= 2;
  return static_cast<int>(std::min<std::int64_t>(n, curriculum.s1) + 1);
}

TimestepDistribution timestep_weights(const NoiseSchedule& schedule,
                                      double p_mean, double p_std) {
  if (!(p_std > 0.0) || !std::isfinite(p_mean)) {
    fail(ErrorKind::kConfig,
         fmt::format("invalid timestep distribution: P_mean {} P_std {}",
                     p_mean, p_std));
  }
  TimestepDistribution dist;
  dist.p_mean = p_mean;
  dist.p_std = p_std;
  const double scale = 1.0 / (std::numbers::sqrt2 * p_std);
  const auto cdf = [&](double sigma) {
    return std::erf((std::log(sigma) - p_mean) * scale);
  };
  dist.weights.resize(static_cast<std::size_t>(schedule.n_steps));
  double total = 0.0;
  for (int i = 0; i < schedule.n_steps; ++i) {
    const double w = cdf(schedule.sigma(i + 1)) - cdf(schedule.sigma(i));
    dist.weights[static_cast<std::size_t>(i)] = std::max(w, 0.0);
    total += dist.weights[static_cast<std::size_t>(i)];
  }
  if (!(total > 0.0)) {
    fail(ErrorKind::kConfig,
         "timestep distribution puts no mass on the noise grid");
  }
  for (double& w : dist.weights) w /= total;
  return dist;
}

TimestepDistribution uniform_timesteps(const NoiseSchedule& schedule) {
  TimestepDistribution dist;
  dist.uniform = true;
  dist.weights.assign(static_cast<std::size_t>(schedule.n_steps),
                      1.0 / schedule.n_steps);
  return dist;
}

std::vector<int> sample_timesteps(const TimestepDistribution& dist,
                                  Eigen::Index n, Rng& rng) {
  std::discrete_distribution<int> pick(dist.weights.begin(),
                                       dist.weights.end());
  std::vector<int> out(static_cast<std::size_t>(n));
  for (auto& i : out) i = pick(rng);
  return out;
}

double loss_weight(const NoiseSchedule& schedule, int i) {
  if (i < 0 || i >= schedule.n_steps) {
    fail(ErrorKind::kUsage,
         fmt::format("interval index {} outside [0, {})", i, schedule.n_steps));
  }
  return 1.0 / (schedule.sigma(i + 1) - schedule.sigma(i));
}

ProcessKind parse_process_kind(const std::string& name) {
  if (name == "edm") return ProcessKind::kEdm;
  if (name == "bridge") return ProcessKind::kBridge;
  if (name == "bridge_gaussian") return ProcessKind::kBridgeGaussian;
  if (name == "bridge_gaussian_appendix") {
    return ProcessKind::kBridgeGaussianAppendix;
  }
  fail(ErrorKind::kConfig, fmt::format("unknown forward process '{}'", name));
}

std::string to_string(ProcessKind kind) {
  switch (kind) {
    case ProcessKind::kEdm:
      return "edm";
    case ProcessKind::kBridge:
      return "bridge";
    case ProcessKind::kBridgeGaussian:
      return "bridge_gaussian";
    case ProcessKind::kBridgeGaussianAppendix:
      return "bridge_gaussian_appendix";
  }
  return "edm";
}

ProcessCoefficients ForwardProcess::coefficients(const NoiseSchedule& schedule,
                                                 int i) const {
  if (i < 0 || i > schedule.n_steps) {
    fail(ErrorKind::kUsage,
         fmt::format("grid index {} outside [0, {}]", i, schedule.n_steps));
  }
  const double sigma = schedule.sigma(i);
  switch (kind) {
    case ProcessKind::kEdm:
      return {1.0, sigma};
    case ProcessKind::kBridge: {
      const double alpha = sigma / (sigma + 1.0);
      return {1.0 - alpha, alpha};
    }
    case ProcessKind::kBridgeGaussian:
      return {1.0 - sigma, sigma};
    case ProcessKind::kBridgeGaussianAppendix:
      return {sigma, 1.0 - sigma};
  }
  return {1.0, sigma};
}

void ForwardProcess::validate(const NoiseSchedule& schedule) const {
  if ((kind == ProcessKind::kBridgeGaussian ||
       kind == ProcessKind::kBridgeGaussianAppendix) &&
      schedule.sigma_max > 1.0) {
    fail(ErrorKind::kConfig,
         fmt::format("process '{}' uses alpha = sigma and needs sigma_max <= 1, "
                     "got {}",
                     to_string(kind), schedule.sigma_max));
  }
}

Batch perturb(const ForwardProcess& process, const NoiseSchedule& schedule,
              const Batch& x, const Batch& z, int i) {
  if (x.rows() != z.rows() || x.cols() != z.cols()) {
    fail(ErrorKind::kStructural, "data and noise batches differ in shape");
  }
  const auto c = process.coefficients(schedule, i);
  return c.data * x + c.noise * z;
}

Batch perturb(const ForwardProcess& process, const NoiseSchedule& schedule,
              const Batch& x, const Batch& z, std::span<const int> indices,
              int offset) {
  if (x.rows() != z.rows() || x.cols() != z.cols() ||
      static_cast<std::size_t>(x.cols()) != indices.size()) {
    fail(ErrorKind::kStructural,
         "data, noise and timestep batches differ in size");
  }
  Batch out(x.rows(), x.cols());
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const auto c = process.coefficients(
        schedule, indices[static_cast<std::size_t>(j)] + offset);
    out.col(j) = c.data * x.col(j) + c.noise * z.col(j);
  }
  return out;
}

Eigen::VectorXd sigmas_at(const NoiseSchedule& schedule,
                          std::span<const int> indices, int offset) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(indices.size()));
  for (std::size_t j = 0; j < indices.size(); ++j) {
    out[static_cast<Eigen::Index>(j)] = schedule.sigma(indices[j] + offset);
  }
  return out;
}

}  // namespace cgc
