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

#include "cgc/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "cgc/error.h"
#include "cgc/train.h"

namespace cgc {
namespace {

constexpr Eigen::Index kChunk = 8192;

// Applies `fn` to column blocks of at most kChunk samples.
Batch chunked(const EndpointFn& fn, const Batch& x, const Eigen::VectorXd& s) {
  Batch out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); c += kChunk) {
    const Eigen::Index w = std::min(kChunk, x.cols() - c);
    out.middleCols(c, w) = fn(x.middleCols(c, w), s.segment(c, w));
  }
  return out;
}

struct MeanStderr {
  double mean = 0.0;
  double stderr_ = 0.0;
};

MeanStderr summarize(const Eigen::VectorXd& v) {
  MeanStderr r;
  const double n = static_cast<double>(v.size());
  if (n < 1.0) return r;
  r.mean = v.mean();
  if (n > 1.0) {
    r.stderr_ = std::sqrt((v.array() - r.mean).square().sum() / (n - 1.0) / n);
  }
  return r;
}

std::vector<double> to_vector(const Eigen::VectorXd& v) {
  return {v.data(), v.data() + v.size()};
}

}  // namespace

double variance_from_moments(const nn::GradientMoments& m) {
  const double n = static_cast<double>(m.count);
  if (n < 2.0 || m.sum.size() == 0) return 0.0;
  return ((m.sum_sq.array() - m.sum.array().square() / n) / (n - 1.0))
      .max(0.0)
      .mean();
}

VarianceReport gradient_variance(const ConsistencyModel& model,
                                 const ParamVector& params,
                                 const CouplingBatch& batch,
                                 const ForwardProcess& process,
                                 const NoiseSchedule& schedule,
                                 const DistanceFn& distance,
                                 std::int64_t step, double weight_scale) {
  if (batch.size() < 2) {
    fail(ErrorKind::kUsage, "gradient variance needs a batch of at least 2");
  }
  const LossStep loss = consistency_loss_step(
      model, params, batch, process, schedule, distance,
      {weight_scale, true, step});
  return {step, variance_from_moments(*loss.moments), kVarianceEstimator};
}

EndpointFn consistency_endpoint(const ConsistencyModel& model,
                                const ParamVector& params) {
  return [&model, &params](const Batch& x, const Eigen::VectorXd& sigma) {
    return consistency_eval(model, params, x, sigma);
  };
}

TransportReport transport_cost(const EndpointFn& endpoint,
                               const data::ExperimentSetting& setting,
                               const ForwardProcess& process,
                               const NoiseSchedule& schedule,
                               const TransportOptions& options, Rng& rng) {
  if (options.n < 1) fail(ErrorKind::kUsage, "transport needs n >= 1");
  TransportReport report;
  for (int i = 0; i <= schedule.n_steps; ++i) {
    const Batch x = data::sample(setting.data, options.n, rng);
    const Batch z = data::sample(setting.noise, options.n, rng);
    const Batch xi = perturb(process, schedule, x, z, i);
    const Eigen::VectorXd ic = (x - xi).colwise().squaredNorm().transpose();
    const MeanStderr ic_s = summarize(ic);
    report.timestep.push_back(i);
    report.sigma.push_back(schedule.sigma(i));
    report.ic_cost.push_back(ic_s.mean);
    report.ic_stderr.push_back(ic_s.stderr_);
    if (options.keep_samples) report.ic_samples.push_back(to_vector(ic));
    if (options.ic_only) continue;

    const Batch x_hat = chunked(
        endpoint, xi, Eigen::VectorXd::Constant(options.n, schedule.sigma(i)));
    if (!x_hat.allFinite()) {
      fail(ErrorKind::kNumeric,
           fmt::format("non-finite generator output at timestep {}", i));
    }
    const Batch xt = perturb(process, schedule, x_hat, z, i);
    const Eigen::VectorXd gc = (x_hat - xt).colwise().squaredNorm().transpose();
    const MeanStderr gc_s = summarize(gc);
    report.gc_cost.push_back(gc_s.mean);
    report.gc_stderr.push_back(gc_s.stderr_);
    if (options.keep_samples) report.gc_samples.push_back(to_vector(gc));
  }
  return report;
}

PfodeDistanceReport pfode_distance(const EndpointFn& endpoint,
                                   const ScoreFn& score,
                                   const data::ExperimentSetting& setting,
                                   const ForwardProcess& process,
                                   const NoiseSchedule& schedule,
                                   const TimestepDistribution& timesteps,
                                   Eigen::Index n, Rng& rng,
                                   std::int64_t step) {
  if (process.kind != ProcessKind::kEdm) {
    fail(ErrorKind::kUnsupported,
         fmt::format("PF-ODE distance is defined for the EDM process only, "
                     "got {}",
                     to_string(process.kind)));
  }
  if (n < 1) fail(ErrorKind::kUsage, "PF-ODE distance needs n >= 1");
  const Batch x = data::sample(setting.data, n, rng);
  const Batch z = data::sample(setting.noise, n, rng);
  const std::vector<int> idx = sample_timesteps(timesteps, n, rng);

  const Eigen::VectorXd s_lo = sigmas_at(schedule, idx);
  const Eigen::VectorXd s_hi = sigmas_at(schedule, idx, 1);
  const Batch x_lo = perturb(process, schedule, x, z, idx);
  const Batch x_hi = perturb(process, schedule, x, z, idx, 1);

  const Batch x_hat = chunked(endpoint, x_lo, s_lo);
  if (!x_hat.allFinite()) {
    fail(ErrorKind::kNumeric, "non-finite generator output in PF-ODE distance");
  }
  const Batch xt_lo = perturb(process, schedule, x_hat, z, idx);
  const Batch xt_hi = perturb(process, schedule, x_hat, z, idx, 1);

  const Batch phi_ic = euler_pfode_update(score, x_hi, s_lo, s_hi);
  const Batch phi_gc = euler_pfode_update(score, xt_hi, s_lo, s_hi);
  const Eigen::VectorXd d_ic = (x_lo - phi_ic).colwise().norm().transpose();
  const Eigen::VectorXd d_gc = (xt_lo - phi_gc).colwise().norm().transpose();

  PfodeDistanceReport r;
  r.step = step;
  r.n = n;
  const MeanStderr ic = summarize(d_ic);
  const MeanStderr gc = summarize(d_gc);
  r.ic_distance = ic.mean;
  r.ic_stderr = ic.stderr_;
  r.gc_distance = gc.mean;
  r.gc_stderr = gc.stderr_;
  const auto nt = static_cast<std::size_t>(schedule.n_steps);
  r.ic_by_timestep.assign(nt, 0.0);
  r.gc_by_timestep.assign(nt, 0.0);
  r.count_by_timestep.assign(nt, 0);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto t = static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
    r.ic_by_timestep[t] += d_ic[j];
    r.gc_by_timestep[t] += d_gc[j];
    ++r.count_by_timestep[t];
  }
  for (std::size_t t = 0; t < nt; ++t) {
    if (r.count_by_timestep[t] == 0) continue;
    r.ic_by_timestep[t] /= static_cast<double>(r.count_by_timestep[t]);
    r.gc_by_timestep[t] /= static_cast<double>(r.count_by_timestep[t]);
  }
  return r;
}

namespace {

// Sum of ||a_j - b_k|| over all pairs (j, k).
double pairwise_norm_sum(const Batch& a, const Batch& b) {
  double total = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    total += (b.colwise() - a.col(j)).colwise().norm().sum();
  }
  return total;
}

}  // namespace

double energy_distance(const Batch& a, const Batch& b) {
  if (a.cols() < 1 || b.cols() < 1) {
    fail(ErrorKind::kUsage, "energy distance needs nonempty sample sets");
  }
  if (a.rows() != b.rows()) {
    fail(ErrorKind::kStructural,
         fmt::format("energy distance dimension mismatch {} vs {}", a.rows(),
                     b.rows()));
  }
  const double na = static_cast<double>(a.cols());
  const double nb = static_cast<double>(b.cols());
  const double cross = pairwise_norm_sum(a, b) / (na * nb);
  const double within_a = na > 1.0 ? pairwise_norm_sum(a, a) / (na * (na - 1.0)) : 0.0;
  const double within_b = nb > 1.0 ? pairwise_norm_sum(b, b) / (nb * (nb - 1.0)) : 0.0;
  return 2.0 * cross - within_a - within_b;
}

std::vector<double> mode_balance(const Batch& samples,
                                 const data::GaussianMixture& mixture) {
  const std::size_t k = mixture.components.size();
  if (k < 2) fail(ErrorKind::kUsage, "mode balance needs at least two modes");
  std::vector<double> frac(k, 0.0);
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < k; ++c) {
      const double d = (samples.col(j) - mixture.components[c].mean).squaredNorm();
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    frac[best] += 1.0;
  }
  if (samples.cols() > 0) {
    for (double& f : frac) f /= static_cast<double>(samples.cols());
  }
  return frac;
}

}  // namespace cgc
