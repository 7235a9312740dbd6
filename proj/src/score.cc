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

#include "cgc/score.h"

#include <cmath>

#include <fmt/format.h>

#include "cgc/error.h"
#include "cgc/optim.h"

namespace cgc {
namespace {

struct Preconditioning {
  Eigen::VectorXd skip, out, in;
};

Preconditioning preconditioning(double sigma_data, const Eigen::VectorXd& sigma) {
  Preconditioning p;
  const auto s2 = sigma.array().square();
  const double d2 = sigma_data * sigma_data;
  p.skip = (d2 / (s2 + d2)).matrix();
  p.out = (sigma.array() * sigma_data / (s2 + d2).sqrt()).matrix();
  p.in = (1.0 / (s2 + d2).sqrt()).matrix();
  return p;
}

}  // namespace

Batch denoise(const ScoreModel& model, const ParamVector& params, const Batch& y,
              const Eigen::VectorXd& sigma) {
  const auto c = preconditioning(model.sigma_data, sigma);
  Batch d = y * c.skip.asDiagonal();
  d += nn::evaluate(model.spec, params, y * c.in.asDiagonal(), sigma) *
       c.out.asDiagonal();
  return d;
}

Batch model_score(const ScoreModel& model, const Batch& y,
                  const Eigen::VectorXd& sigma) {
  const Batch d = denoise(model, model.params, y, sigma);
  return (d - y) * sigma.array().square().inverse().matrix().asDiagonal();
}

DsmResult dsm_loss(const ScoreModel& model, const ParamVector& params,
                   const Batch& x, const Batch& z, const Eigen::VectorXd& sigma) {
  if (x.rows() != z.rows() || x.cols() != z.cols() || sigma.size() != x.cols()) {
    fail(ErrorKind::kStructural, "score-matching batch shapes differ");
  }
  const Eigen::Index n = x.cols();
  const auto c = preconditioning(model.sigma_data, sigma);
  const Batch y = x + z * sigma.asDiagonal();
  auto fwd = nn::forward(model.spec, params, y * c.in.asDiagonal(), sigma);
  const Batch d = y * c.skip.asDiagonal() + fwd.output * c.out.asDiagonal();
  const double d2 = model.sigma_data * model.sigma_data;
  const Eigen::VectorXd w =
      ((sigma.array().square() + d2) /
       (sigma.array() * model.sigma_data).square())
          .matrix();
  const Batch resid = d - x;
  DsmResult r;
  r.loss = (resid.colwise().squaredNorm().transpose().array() * w.array()).sum() /
           static_cast<double>(n);
  if (!std::isfinite(r.loss)) {
    fail(ErrorKind::kNumeric, "non-finite score-matching loss");
  }
  const Eigen::VectorXd scale =
      (2.0 / static_cast<double>(n)) * (w.array() * c.out.array()).matrix();
  r.grad = nn::backward(model.spec, params, std::move(fwd.tape),
                        resid * scale.asDiagonal())
               .params;
  return r;
}

ScoreFn analytic_score_fn(const data::GaussianMixture& dist) {
  return [dist](const Batch& x, const Eigen::VectorXd& sigma) {
    return data::analytic_perturbed_score(dist, x, sigma);
  };
}

ScoreFn model_score_fn(const ScoreModel& model) {
  return [model](const Batch& x, const Eigen::VectorXd& sigma) {
    return model_score(model, x, sigma);
  };
}

Batch euler_pfode_update(const ScoreFn& score, const Batch& x_next,
                         const Eigen::VectorXd& sigma_i,
                         const Eigen::VectorXd& sigma_next) {
  if (sigma_i.size() != x_next.cols() || sigma_next.size() != x_next.cols()) {
    fail(ErrorKind::kStructural, "one noise-level pair per point required");
  }
  for (Eigen::Index j = 0; j < sigma_i.size(); ++j) {
    if (!(sigma_i[j] <= sigma_next[j])) {
      fail(ErrorKind::kUsage,
           fmt::format("Euler step from sigma {} to larger sigma {}",
                       sigma_next[j], sigma_i[j]));
    }
  }
  const Eigen::VectorXd step =
      ((sigma_i - sigma_next).array() * sigma_next.array()).matrix();
  return x_next - score(x_next, sigma_next) * step.asDiagonal();
}

Batch euler_pfode_update(const ScoreFn& score, const Batch& x_next,
                         double sigma_i, double sigma_next) {
  return euler_pfode_update(score, x_next,
                            Eigen::VectorXd::Constant(x_next.cols(), sigma_i),
                            Eigen::VectorXd::Constant(x_next.cols(), sigma_next));
}

Batch pfode_solve(const ScoreFn& score, const Batch& x_start,
                  const NoiseSchedule& schedule) {
  Batch x = x_start;
  for (int i = schedule.n_steps - 1; i >= 0; --i) {
    x = euler_pfode_update(score, x, schedule.sigma(i), schedule.sigma(i + 1));
    const double worst = x.colwise().norm().maxCoeff();
    if (!std::isfinite(worst) || worst > 1e6) {
      fail(ErrorKind::kNumeric,
           fmt::format("PF-ODE solve diverged at grid index {} (norm {})", i,
                       worst));
    }
  }
  return x;
}

ScoreFitReport score_fit(const ScoreFn& score, const ScoreFn& reference,
                         const Batch& x, const Eigen::VectorXd& sigma) {
  if (sigma.size() != x.cols()) {
    fail(ErrorKind::kStructural, "one noise level per point required");
  }
  const Batch a = score(x, sigma);
  const Batch b = reference(x, sigma);
  ScoreFitReport r;
  r.n = x.cols();
  if (r.n == 0) return r;
  for (Eigen::Index j = 0; j < r.n; ++j) {
    const double na = a.col(j).norm();
    const double nb = b.col(j).norm();
    if (nb == 0.0) continue;
    // atan2 of |a x b| and a.b stays accurate for nearly parallel vectors.
    const double cross = a(0, j) * b(1, j) - a(1, j) * b(0, j);
    const double angle = na == 0.0 ? 0.5 * M_PI
                                   : std::atan2(std::abs(cross), a.col(j).dot(b.col(j)));
    r.angular_error += angle * angle;
    r.magnitude_error += std::pow((na - nb) / nb, 2);
  }
  r.angular_error /= static_cast<double>(r.n);
  r.magnitude_error /= static_cast<double>(r.n);
  return r;
}

ScoreFitReport score_fit_to_mixture(const ScoreFn& score,
                                    const data::GaussianMixture& dist,
                                    double sigma_lo, double sigma_hi,
                                    int levels, Eigen::Index n, Rng& rng) {
  if (levels < 1 || n < 1 || !(sigma_lo > 0.0 && sigma_lo <= sigma_hi)) {
    fail(ErrorKind::kUsage, "score fit needs levels, n >= 1 and 0 < lo <= hi");
  }
  Batch x(dist.dim(), levels * n);
  Eigen::VectorXd sigma(levels * n);
  for (int k = 0; k < levels; ++k) {
    const double t = levels == 1 ? 0.0 : static_cast<double>(k) / (levels - 1);
    const double s = std::exp(std::log(sigma_lo) + t * std::log(sigma_hi / sigma_lo));
    const Batch clean = data::sample(dist, n, rng);
    x.middleCols(k * n, n) = clean + s * standard_normal(dist.dim(), n, rng);
    sigma.segment(k * n, n).setConstant(s);
  }
  return score_fit(score, analytic_score_fn(dist), x, sigma);
}

ScoreModel train_score(const ScoreTrainConfig& config, const Batch& pool,
                       double sigma_data,
                       const std::function<void(std::int64_t, double)>& on_loss) {
  if (pool.cols() < 1 || pool.rows() != config.spec.input_dim) {
    fail(ErrorKind::kStructural, "score training pool does not match network");
  }
  Rng init = make_stream(config.seed, "init");
  Rng data_rng = make_stream(config.seed, "data");
  Rng noise_rng = make_stream(config.seed, "noise");
  Rng level_rng = make_stream(config.seed, "timestep");
  ScoreModel model{config.spec, nn::init_params(config.spec, init), sigma_data};
  auto opt = optim::OptimizerState::make(
      optim::OptimizerHyperparams::adam(config.learning_rate),
      model.params.size());
  optim::EmaState ema{model.params, config.ema_decay};
  std::uniform_int_distribution<Eigen::Index> pick(0, pool.cols() - 1);
  std::uniform_real_distribution<double> log_level(std::log(config.sigma_min),
                                                   std::log(config.sigma_max));
  Batch x(pool.rows(), config.batch_size);
  Eigen::VectorXd sigma(config.batch_size);
  for (std::int64_t k = 0; k < config.steps; ++k) {
    for (Eigen::Index j = 0; j < config.batch_size; ++j) {
      x.col(j) = pool.col(pick(data_rng));
    }
    for (Eigen::Index j = 0; j < config.batch_size; ++j) {
      sigma[j] = std::exp(log_level(level_rng));
    }
    const Batch z = standard_normal(pool.rows(), config.batch_size, noise_rng);
    auto r = dsm_loss(model, model.params, x, z, sigma);
    optim::apply_update(opt, model.params, r.grad);
    optim::ema_update(ema, model.params);
    if (on_loss) on_loss(k, r.loss);
  }
  model.params = ema.params;
  return model;
}

}  // namespace cgc
