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

#include "cgc/train.h"

#include <cmath>

#include <fmt/format.h>

#include "cgc/diagnostics.h"
#include "cgc/error.h"

namespace cgc {

nn::NetworkSpec TrainConfig::network_spec() const {
  return {2, hidden_dim, depth, 2};
}

void TrainConfig::validate() const {
  if (depth < 1 || hidden_dim < 1) {
    fail(ErrorKind::kConfig,
         fmt::format("network needs depth >= 1 and hidden_dim >= 1, got {} "
                     "and {}",
                     depth, hidden_dim));
  }
  if (batch_size < 1 || total_steps < 1 || n_samples < 1) {
    fail(ErrorKind::kConfig,
         fmt::format("batch_size {}, total_steps {} and n_samples {} must be "
                     "positive",
                     batch_size, total_steps, n_samples));
  }
  if (log_interval < 1 || variance_interval < 0 || checkpoint_interval < 0) {
    fail(ErrorKind::kConfig, "invalid logging or checkpoint interval");
  }
  if (!(ema_decay >= 0.0 && ema_decay < 1.0)) {
    fail(ErrorKind::kConfig,
         fmt::format("EMA decay {} outside [0, 1)", ema_decay));
  }
  if (!(loss_weight_scale > 0.0)) {
    fail(ErrorKind::kConfig, "loss_weight_scale must be positive");
  }
  mixing.validate();
  if (batch_ot && mixing.mu > 0.0) {
    fail(ErrorKind::kConfig,
         "batch OT and generator-induced mixing cannot be combined");
  }
  optimizer.validate();
  Curriculum c = curriculum;
  c.total_steps = total_steps;
  c.validate();
  const auto schedule = build_grid(sigma_min, sigma_max, rho,
                                   c.mode == CurriculumMode::kFixed ? c.fixed_n : c.s1 + 1);
  ForwardProcess{process}.validate(schedule);
  if (!uniform_timesteps) timestep_weights(schedule, p_mean, p_std);
  data::make_setting(setting, geometry, n_samples);
}

LossStep consistency_loss_step(const ConsistencyModel& model,
                               const ParamVector& params,
                               const CouplingBatch& batch,
                               const ForwardProcess& process,
                               const NoiseSchedule& schedule,
                               const DistanceFn& distance_fn,
                               const LossOptions& options) {
  const Eigen::Index n = batch.size();
  if (n < 1 || static_cast<std::size_t>(n) != batch.timestep.size()) {
    fail(ErrorKind::kStructural, "coupling batch lacks timesteps");
  }
  const Batch x_lo = perturb(process, schedule, batch.x, batch.z, batch.timestep);
  const Batch x_hi =
      perturb(process, schedule, batch.x, batch.z, batch.timestep, 1);
  const Eigen::VectorXd s_lo = sigmas_at(schedule, batch.timestep);
  const Eigen::VectorXd s_hi = sigmas_at(schedule, batch.timestep, 1);

  const Batch target = consistency_eval(model, params, x_lo, s_lo);
  auto pred = consistency_output(model, params, x_hi, s_hi);

  Eigen::VectorXd lambda(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    lambda[j] = options.weight_scale *
                loss_weight(schedule, batch.timestep[static_cast<std::size_t>(j)]);
  }
  const Eigen::VectorXd d = distance(distance_fn, target, pred.output);
  LossStep out;
  out.loss = lambda.dot(d) / static_cast<double>(n);
  if (!std::isfinite(out.loss) || out.loss > kDivergenceThreshold) {
    fail(ErrorKind::kNumeric,
         fmt::format("consistency loss {} diverged at step {}", out.loss,
                     options.step));
  }
  const Batch per_sample =
      distance_grad(distance_fn, target, pred.output) * lambda.asDiagonal();
  if (options.per_sample_moments) {
    auto m = consistency_backward_moments(model, params, std::move(pred),
                                          per_sample);
    out.grad = m.sum / static_cast<double>(n);
    out.moments = std::move(m);
  } else {
    out.grad = consistency_backward(model, params, std::move(pred),
                                    per_sample / static_cast<double>(n))
                   .params;
  }
  return out;
}

Trainer::Trainer(TrainConfig config) : config_(std::move(config)) {
  config_.curriculum.total_steps = config_.total_steps;
  config_.validate();
  setting_ = data::make_setting(config_.setting, config_.geometry,
                                config_.n_samples);
  Rng pool_rng = make_stream(config_.seed, "pool");
  pool_ = data::sample(setting_.data, config_.n_samples, pool_rng);
  model_.spec = config_.network_spec();
  model_.sigma_data = setting_.data.root_second_moment();
  model_.sigma_min = config_.sigma_min;
  model_.sigma_max = config_.sigma_max;
}

NoiseSchedule Trainer::schedule_at(std::int64_t k) const {
  return build_grid(config_.sigma_min, config_.sigma_max, config_.rho,
                    curriculum_n(config_.curriculum, k));
}

TrainState Trainer::initial_state() const {
  TrainState s;
  Rng init = make_stream(config_.seed, "init");
  s.params = nn::init_params(model_.spec, init);
  s.ema = {s.params, config_.ema_decay};
  s.optimizer = optim::OptimizerState::make(config_.optimizer, s.params.size());
  s.rng = {make_stream(config_.seed, "data"), make_stream(config_.seed, "noise"),
           make_stream(config_.seed, "timestep"),
           make_stream(config_.seed, "mixing")};
  return s;
}

void Trainer::step(TrainState& state, const TrainHooks& hooks) const {
  const std::int64_t k = state.step;
  if (k >= config_.total_steps) {
    fail(ErrorKind::kUsage,
         fmt::format("training already finished at step {}", k));
  }
  const NoiseSchedule schedule = schedule_at(k);
  const TimestepDistribution timesteps =
      config_.uniform_timesteps
          ? uniform_timesteps(schedule)
          : timestep_weights(schedule, config_.p_mean, config_.p_std);
  const ForwardProcess proc = process();
  const Eigen::Index b = config_.batch_size;

  std::uniform_int_distribution<Eigen::Index> pick(0, pool_.cols() - 1);
  Batch x(pool_.rows(), b);
  for (Eigen::Index j = 0; j < b; ++j) x.col(j) = pool_.col(pick(state.rng.data));
  const Batch z = data::sample(setting_.noise, b, state.rng.noise);

  CouplingBatch batch;
  if (config_.batch_ot) {
    batch = batch_ot(x, z);
    batch.timestep = sample_timesteps(timesteps, b, state.rng.timestep);
  } else {
    const CouplingBatch ic = sample_ic(x, z, timesteps, state.rng.timestep);
    const ParamVector& endpoint =
        config_.use_ema_for_gc ? state.ema.params : state.params;
    batch = draw_training_batch(config_.mixing, model_, endpoint, ic, proc,
                                schedule, state.rng.mixing, k);
  }

  const bool want_variance =
      config_.variance_interval > 0 && k % config_.variance_interval == 0;
  LossStep loss = consistency_loss_step(
      model_, state.params, batch, proc, schedule, config_.distance,
      {config_.loss_weight_scale, want_variance, k});

  if (hooks.on_metric) {
    if (k % config_.log_interval == 0 || k + 1 == config_.total_steps) {
      hooks.on_metric({k, "loss", loss.loss});
      hooks.on_metric(
          {k, "gc_batch",
           batch.provenance == Provenance::kGeneratorInduced ? 1.0 : 0.0});
    }
    if (want_variance) {
      const double var = variance_from_moments(*loss.moments);
      hooks.on_metric({k, "grad_variance", var});
    }
  }

  optim::apply_update(state.optimizer, state.params, loss.grad);
  optim::ema_update(state.ema, state.params);
  ++state.step;
  if (hooks.on_checkpoint &&
      ((config_.checkpoint_interval > 0 &&
        state.step % config_.checkpoint_interval == 0) ||
       state.step == config_.total_steps)) {
    hooks.on_checkpoint(state);
  }
}

void Trainer::run(TrainState& state, const TrainHooks& hooks) const {
  while (state.step < config_.total_steps) step(state, hooks);
}

TrainState train(const TrainConfig& config, const TrainHooks& hooks) {
  Trainer trainer(config);
  TrainState state = trainer.initial_state();
  trainer.run(state, hooks);
  return state;
}

Batch generate(const ConsistencyModel& model, const ParamVector& params,
               const Batch& noise, const ForwardProcess& process,
               const NoiseSchedule& schedule) {
  const auto c = process.coefficients(schedule, schedule.n_steps);
  return consistency_eval(
      model, params, c.noise * noise,
      Eigen::VectorXd::Constant(noise.cols(), schedule.sigma_max));
}

}  // namespace cgc
