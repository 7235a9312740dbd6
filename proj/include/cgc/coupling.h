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

// Data-noise couplings: independent (IC), generator-induced (GC), minibatch
// optimal transport (OT), and the mu-mixing rule between IC and GC.

#ifndef CGC_COUPLING_H_
#define CGC_COUPLING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "cgc/model.h"
#include "cgc/nn.h"
#include "cgc/rng.h"
#include "cgc/schedule.h"

namespace cgc {

enum class Provenance { kIndependent, kGeneratorInduced, kOptimalTransport, kMixed };

std::string to_string(Provenance p);

struct CouplingBatch {
  Batch x;  // data, or the generator endpoint x_hat for GC
  Batch z;
  std::vector<int> timestep;  // interval index i per sample
  Provenance provenance = Provenance::kIndependent;

  Eigen::Index size() const { return x.cols(); }
};

CouplingBatch sample_ic(const Batch& data, const Batch& noise,
                        const TimestepDistribution& timesteps, Rng& rng);

// x_hat = f(a_i x + b_i z, sigma_i) evaluated with `endpoint_params` and no
// tape, paired with the parent's z and i. The returned x_hat is a plain value:
// later changes to the parameters do not affect it.
CouplingBatch induce_gc(const ConsistencyModel& model,
                        const ParamVector& endpoint_params,
                        const CouplingBatch& ic, const ForwardProcess& process,
                        const NoiseSchedule& schedule, std::int64_t step = -1);

// Minimum-cost assignment for a square cost matrix: result[row] = column.
// O(n^3) shortest augmenting path with potentials.
std::vector<int> hungarian(const Eigen::MatrixXd& cost);

// Pairs x_j with z_pi(j), pi minimizing sum_j |x_j - z_pi(j)|^2. Timesteps
// are left empty for the caller to draw.
CouplingBatch batch_ot(const Batch& data, const Batch& noise);

struct MixingPolicy {
  double mu = 0.0;
  bool per_sample = false;  // default: one Bernoulli draw per training step

  void validate() const;
};

// With probability mu returns induce_gc(ic), else ic unchanged.
CouplingBatch draw_training_batch(const MixingPolicy& policy,
                                  const ConsistencyModel& model,
                                  const ParamVector& endpoint_params,
                                  const CouplingBatch& ic,
                                  const ForwardProcess& process,
                                  const NoiseSchedule& schedule, Rng& rng,
                                  std::int64_t step = -1);

}  // namespace cgc

#endif  // CGC_COUPLING_H_
