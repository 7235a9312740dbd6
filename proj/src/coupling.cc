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

#include "cgc/coupling.h"

#include <limits>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::kIndependent:
      return "ic";
    case Provenance::kGeneratorInduced:
      return "gc";
    case Provenance::kOptimalTransport:
      return "ot";
    case Provenance::kMixed:
      return "mixed";
  }
  return "ic";
}

CouplingBatch sample_ic(const Batch& data, const Batch& noise,
                        const TimestepDistribution& timesteps, Rng& rng) {
  if (data.rows() != noise.rows() || data.cols() != noise.cols()) {
    fail(ErrorKind::kStructural,
         fmt::format("data batch {}x{} and noise batch {}x{} differ",
                     data.rows(), data.cols(), noise.rows(), noise.cols()));
  }
  CouplingBatch b;
  b.x = data;
  b.z = noise;
  b.timestep = sample_timesteps(timesteps, data.cols(), rng);
  b.provenance = Provenance::kIndependent;
  return b;
}

CouplingBatch induce_gc(const ConsistencyModel& model,
                        const ParamVector& endpoint_params,
                        const CouplingBatch& ic, const ForwardProcess& process,
                        const NoiseSchedule& schedule, std::int64_t step) {
  if (ic.provenance != Provenance::kIndependent) {
    fail(ErrorKind::kUsage,
         fmt::format("generator-induced coupling needs an IC parent, got {}",
                     to_string(ic.provenance)));
  }
  const Batch x_i = perturb(process, schedule, ic.x, ic.z, ic.timestep);
  CouplingBatch gc;
  gc.x = consistency_eval(model, endpoint_params, x_i,
                          sigmas_at(schedule, ic.timestep));
  if (!gc.x.allFinite()) {
    fail(ErrorKind::kNumeric,
         fmt::format("non-finite endpoint prediction at step {}", step));
  }
  gc.z = ic.z;
  gc.timestep = ic.timestep;
  gc.provenance = Provenance::kGeneratorInduced;
  return gc;
}

std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
  if (cost.rows() != cost.cols()) {
    fail(ErrorKind::kStructural, "assignment cost matrix must be square");
  }
  const int n = static_cast<int>(cost.rows());
  if (!cost.allFinite()) fail(ErrorKind::kNumeric, "non-finite assignment cost");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based rows/columns; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> match(n + 1, 0), way(n + 1, 0);
  for (int row = 1; row <= n; ++row) {
    match[0] = row;
    int col0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[col0] = 1;
      const int r0 = match[col0];
      double delta = kInf;
      int col1 = 0;
      for (int c = 1; c <= n; ++c) {
        if (used[c]) continue;
        const double reduced = cost(r0 - 1, c - 1) - u[r0] - v[c];
        if (reduced < minv[c]) {
          minv[c] = reduced;
          way[c] = col0;
        }
        if (minv[c] < delta) {
          delta = minv[c];
          col1 = c;
        }
      }
      for (int c = 0; c <= n; ++c) {
        if (used[c]) {
          u[match[c]] += delta;
          v[c] -= delta;
        } else {
          minv[c] -= delta;
        }
      }
      col0 = col1;
    } while (match[col0] != 0);
    do {
      const int col1 = way[col0];
      match[col0] = match[col1];
      col0 = col1;
    } while (col0 != 0);
  }
  std::vector<int> assignment(static_cast<std::size_t>(n));
  for (int c = 1; c <= n; ++c) {
    assignment[static_cast<std::size_t>(match[c] - 1)] = c - 1;
  }
  return assignment;
}

CouplingBatch batch_ot(const Batch& data, const Batch& noise) {
  if (data.rows() != noise.rows() || data.cols() != noise.cols()) {
    fail(ErrorKind::kStructural, "batch OT needs equal-size batches");
  }
  const Eigen::Index n = data.cols();
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    cost.col(k) = (data.colwise() - noise.col(k)).colwise().squaredNorm().transpose();
  }
  const auto pi = hungarian(cost);
  CouplingBatch b;
  b.x = data;
  b.z.resize(noise.rows(), n);
  for (Eigen::Index j = 0; j < n; ++j) {
    b.z.col(j) = noise.col(pi[static_cast<std::size_t>(j)]);
  }
  b.provenance = Provenance::kOptimalTransport;
  return b;
}

void MixingPolicy::validate() const {
  if (!(mu >= 0.0 && mu <= 1.0)) {
    fail(ErrorKind::kConfig, fmt::format("mixing factor mu = {} outside [0, 1]", mu));
  }
}

CouplingBatch draw_training_batch(const MixingPolicy& policy,
                                  const ConsistencyModel& model,
                                  const ParamVector& endpoint_params,
                                  const CouplingBatch& ic,
                                  const ForwardProcess& process,
                                  const NoiseSchedule& schedule, Rng& rng,
                                  std::int64_t step) {
  policy.validate();
  std::bernoulli_distribution coin(policy.mu);
  if (!policy.per_sample) {
    if (!coin(rng)) return ic;
    return induce_gc(model, endpoint_params, ic, process, schedule, step);
  }
  std::vector<char> take(static_cast<std::size_t>(ic.size()));
  bool any = false;
  bool all = true;
  for (auto& t : take) {
    t = coin(rng) ? 1 : 0;
    any = any || t;
    all = all && t;
  }
  if (!any) return ic;
  CouplingBatch gc = induce_gc(model, endpoint_params, ic, process, schedule, step);
  if (all) return gc;
  for (Eigen::Index j = 0; j < ic.size(); ++j) {
    if (!take[static_cast<std::size_t>(j)]) gc.x.col(j) = ic.x.col(j);
  }
  gc.provenance = Provenance::kMixed;
  return gc;
}

}  // namespace cgc
