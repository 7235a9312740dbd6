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

#include "cgc/cli.h"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include <CLI11.hpp>
#include <fmt/chrono.h>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "cgc/checkpoint.h"
#include "cgc/config.h"
#include "cgc/csv.h"
#include "cgc/diagnostics.h"
#include "cgc/error.h"
#include "cgc/score.h"
#include "cgc/train.h"

namespace cgc {
namespace {

namespace fs = std::filesystem;

std::string now_utc() {
  return fmt::format("{:%Y-%m-%dT%H:%M:%SZ}",
                     fmt::gmtime(std::chrono::system_clock::to_time_t(
                         std::chrono::system_clock::now())));
}

void make_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    fail(ErrorKind::kIo,
         fmt::format("cannot create directory '{}': {}", dir, ec.message()));
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot read '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

class Manifest {
 public:
  Manifest(std::string path, const std::string& command,
           const std::string& config_path, const std::string& config_text)
      : path_(std::move(path)) {
    doc_ = {{"command", command},
            {"config_path", config_path},
            {"config", config_text},
            {"seed", nullptr},
            {"started_at", now_utc()},
            {"finished_at", nullptr},
            {"status", "running"},
            {"artifacts", nlohmann::json::array()},
            {"version", version_string()}};
    write_json_atomic(path_, doc_);
  }

  void set_seed(std::uint64_t seed) {
    doc_["seed"] = seed;
    write_json_atomic(path_, doc_);
  }

  void add_artifact(const std::string& path) { doc_["artifacts"].push_back(path); }

  void finish(const std::string& status) {
    doc_["finished_at"] = now_utc();
    doc_["status"] = status;
    write_json_atomic(path_, doc_);
  }

 private:
  std::string path_;
  nlohmann::json doc_;
};

// Runs `body`, recording failure status in the manifest before rethrowing.
template <typename Fn>
void with_manifest(Manifest& manifest, Fn body) {
  try {
    body();
  } catch (const Error& e) {
    manifest.finish(fmt::format("failed: {}", e.what()));
    throw;
  }
  manifest.finish("completed");
}

TimestepDistribution timesteps_for(const TrainConfig& c,
                                   const NoiseSchedule& schedule) {
  return c.uniform_timesteps ? uniform_timesteps(schedule)
                             : timestep_weights(schedule, c.p_mean, c.p_std);
}

std::string step_name(std::int64_t step) {
  return fmt::format("step_{:06d}", step);
}

}  // namespace

DiagnosticKind parse_diagnostic_kind(const std::string& name) {
  if (name == "variance") return DiagnosticKind::kVariance;
  if (name == "transport") return DiagnosticKind::kTransport;
  if (name == "pfode") return DiagnosticKind::kPfode;
  fail(ErrorKind::kUsage, fmt::format("unknown diagnostic '{}'", name));
}

std::string version_string() { return CGC_VERSION; }

void write_json_atomic(const std::string& path, const nlohmann::json& doc) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << doc.dump(2) << "\n";
    if (!out) fail(ErrorKind::kIo, fmt::format("cannot write '{}'", tmp));
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorKind::kIo,
         fmt::format("cannot move '{}' to '{}': {}", tmp, path, ec.message()));
  }
}

void cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& out_dir,
               const std::optional<std::string>& resume) {
  const std::string text = read_file(config_path);
  make_dir(out_dir);
  Manifest manifest((fs::path(out_dir) / "manifest.json").string(), "train",
                    config_path, text);
  with_manifest(manifest, [&] {
    RunConfig rc = parse_config(text, config_path);
    if (seed) rc.train.seed = *seed;
    manifest.set_seed(rc.train.seed);
    const Trainer trainer(rc.train);
    spdlog::info("training {} steps on {} ({} parameters, sigma_data {:.4f})",
                 rc.train.total_steps, data::to_string(rc.train.setting),
                 trainer.model().spec.param_count(),
                 trainer.model().sigma_data);

    const fs::path ckpt_dir = fs::path(out_dir) / "checkpoints";
    make_dir(ckpt_dir.string());
    const std::string metrics_path = (fs::path(out_dir) / "metrics.csv").string();
    MetricsWriter metrics(metrics_path, resume.has_value());
    manifest.add_artifact(metrics_path);
    const std::string state_path = (ckpt_dir / "state.cgct").string();

    TrainHooks hooks;
    hooks.on_metric = [&](const MetricsRecord& r) {
      metrics.write(r);
      if (r.metric == "loss") spdlog::debug("step {} loss {}", r.step, r.value);
    };
    hooks.on_checkpoint = [&](const TrainState& s) {
      const std::string path =
          (ckpt_dir / (step_name(s.step) + ".ckpt")).string();
      save_checkpoint(make_checkpoint(trainer, s), path);
      save_train_state(s, state_path);
      manifest.add_artifact(path);
      metrics.flush();
      spdlog::info("step {}: wrote {}", s.step, path);
    };

    TrainState state = trainer.initial_state();
    if (resume) {
      TrainState loaded = load_train_state(*resume);
      if (loaded.params.size() != state.params.size()) {
        fail(ErrorKind::kStructural,
             fmt::format("saved state has {} parameters, config expects {}",
                         loaded.params.size(), state.params.size()));
      }
      state = std::move(loaded);
      spdlog::info("resuming from step {}", state.step);
    }
    try {
      trainer.run(state, hooks);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      metrics.flush();
      const std::string dump = (fs::path(out_dir) / "divergence.ckpt").string();
      save_checkpoint(make_checkpoint(trainer, state), dump);
      save_train_state(state, (fs::path(out_dir) / "divergence.cgct").string());
      manifest.add_artifact(dump);
      fail(ErrorKind::kNumeric,
           fmt::format("{}; last good state (step {}) dumped to {}", e.what(),
                       state.step, dump));
    }
    metrics.flush();
  });
}

void cmd_train_score(const std::string& config_path,
                     std::optional<std::uint64_t> seed,
                     const std::string& out_dir) {
  const std::string text = read_file(config_path);
  make_dir(out_dir);
  Manifest manifest((fs::path(out_dir) / "manifest.json").string(),
                    "train-score", config_path, text);
  with_manifest(manifest, [&] {
    RunConfig rc = parse_config(text, config_path);
    if (seed) rc.train.seed = *seed;
    rc.score.seed = rc.train.seed;
    manifest.set_seed(rc.train.seed);
    const auto setting = data::make_setting(rc.train.setting,
                                            rc.train.geometry,
                                            rc.train.n_samples);
    Rng pool_rng = make_stream(rc.train.seed, "pool");
    const Batch pool = data::sample(setting.data, rc.train.n_samples, pool_rng);

    const std::string metrics_path =
        (fs::path(out_dir) / "score_metrics.csv").string();
    MetricsWriter metrics(metrics_path);
    manifest.add_artifact(metrics_path);
    const std::int64_t every = rc.train.log_interval;
    const ScoreModel model = train_score(
        rc.score, pool, setting.data.root_second_moment(),
        [&](std::int64_t step, double loss) {
          if (step % every == 0 || step + 1 == rc.score.steps) {
            metrics.write({step, "dsm_loss", loss});
          }
        });
    Rng fit_rng = make_stream(rc.train.seed, "score_fit");
    const ScoreFitReport fit = score_fit_to_mixture(
        model_score_fn(model), setting.data, rc.score.fit_sigma_min,
        rc.score.sigma_max, 8, 2000, fit_rng);
    metrics.write({rc.score.steps, "score_angular_error", fit.angular_error});
    metrics.write({rc.score.steps, "score_magnitude_error", fit.magnitude_error});
    metrics.flush();
    if (fit.angular_error > rc.score.max_angular_error ||
        fit.magnitude_error > rc.score.max_magnitude_error) {
      spdlog::warn(
          "score fit outside thresholds: angular {:.4f} (max {}), magnitude "
          "{:.4f} (max {}); pfode diagnostics with this model are unreliable",
          fit.angular_error, rc.score.max_angular_error, fit.magnitude_error,
          rc.score.max_magnitude_error);
    } else {
      spdlog::info("score fit: angular {:.4f}, magnitude {:.4f}",
                   fit.angular_error, fit.magnitude_error);
    }
    const std::string path = (fs::path(out_dir) / "score.ckpt").string();
    save_checkpoint(make_checkpoint(model, model.params, rc.score.steps), path);
    manifest.add_artifact(path);
    spdlog::info("wrote {}", path);
  });
}

void cmd_diagnose(const DiagnoseOptions& opt) {
  if (opt.checkpoints.empty()) {
    fail(ErrorKind::kUsage, "diagnose needs at least one --checkpoint");
  }
  const RunConfig rc = load_config(opt.config_path);
  const std::uint64_t seed = opt.seed.value_or(rc.train.seed);
  const auto setting = data::make_setting(rc.train.setting, rc.train.geometry,
                                          rc.train.n_samples);
  const ForwardProcess process{rc.train.process};
  if (opt.kind == DiagnosticKind::kPfode && process.kind != ProcessKind::kEdm) {
    fail(ErrorKind::kUnsupported,
         fmt::format("the pfode diagnostic needs the edm process, config uses "
                     "{}",
                     to_string(process.kind)));
  }
  ScoreFn score;
  if (opt.kind == DiagnosticKind::kPfode) {
    if (opt.analytic_score) {
      score = analytic_score_fn(setting.data);
    } else if (opt.score_checkpoint) {
      const ScoreModel sm = score_model_from(load_checkpoint(*opt.score_checkpoint));
      score = model_score_fn(sm);
    } else {
      fail(ErrorKind::kUsage,
           "pfode needs --score-checkpoint or --analytic-score");
    }
  }
  make_dir(opt.out_dir);

  std::vector<std::pair<std::string, VarianceReport>> variance_rows;
  std::vector<PfodeDistanceReport> pfode_rows;
  for (const std::string& path : opt.checkpoints) {
    const Checkpoint ckpt = load_checkpoint(path);
    require_spec(ckpt, rc.train.network_spec());
    std::int64_t step = 0;
    const ConsistencyModel model = consistency_model_from(ckpt, &step);
    const NoiseSchedule schedule = schedule_from(ckpt);
    const TimestepDistribution timesteps = timesteps_for(rc.train, schedule);
    Rng rng = make_stream(seed, "diagnostic");
    spdlog::info("diagnosing {} (step {})", path, step);

    switch (opt.kind) {
      case DiagnosticKind::kVariance: {
        const Eigen::Index n = rc.diagnostics.variance_batch;
        const Batch x = data::sample(setting.data, n, rng);
        const Batch z = data::sample(setting.noise, n, rng);
        const CouplingBatch ic = sample_ic(x, z, timesteps, rng);
        const CouplingBatch gc =
            induce_gc(model, ckpt.ema, ic, process, schedule, step);
        for (const auto* b : {&ic, &gc}) {
          variance_rows.emplace_back(
              to_string(b->provenance),
              gradient_variance(model, ckpt.params, *b, process, schedule,
                                rc.train.distance, step,
                                rc.train.loss_weight_scale));
        }
        break;
      }
      case DiagnosticKind::kTransport: {
        const TransportReport report = transport_cost(
            consistency_endpoint(model, model.params), setting, process,
            schedule, {rc.diagnostics.transport_n, opt.keep_samples, false},
            rng);
        const std::string stem =
            opt.checkpoints.size() == 1 ? "transport"
                                        : "transport_" + step_name(step);
        write_transport((fs::path(opt.out_dir) / (stem + ".csv")).string(),
                        report);
        if (opt.keep_samples) {
          write_transport_samples(
              (fs::path(opt.out_dir) / (stem + "_samples.csv")).string(),
              report);
        }
        break;
      }
      case DiagnosticKind::kPfode:
        pfode_rows.push_back(pfode_distance(
            consistency_endpoint(model, model.params), score, setting, process,
            schedule, timesteps, rc.diagnostics.pfode_n, rng, step));
        break;
    }
  }
  if (opt.kind == DiagnosticKind::kVariance) {
    write_variance((fs::path(opt.out_dir) / "variance.csv").string(),
                   variance_rows);
  } else if (opt.kind == DiagnosticKind::kPfode) {
    write_pfode((fs::path(opt.out_dir) / "pfode.csv").string(), pfode_rows);
    write_pfode_by_timestep(
        (fs::path(opt.out_dir) / "pfode_by_timestep.csv").string(), pfode_rows);
  }
}

void cmd_sample(const std::string& checkpoint, std::int64_t n,
                std::uint64_t seed, const std::string& out) {
  if (n < 0) fail(ErrorKind::kUsage, fmt::format("--n must be >= 0, got {}", n));
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  const ConsistencyModel model = consistency_model_from(ckpt);
  const auto setting = setting_from(ckpt);
  Rng rng = make_stream(seed, "sample");
  const Batch z = data::sample(setting.noise, n, rng);
  const Batch x = n == 0 ? Batch(2, 0)
                         : generate(model, model.params, z, process_from(ckpt),
                                    schedule_from(ckpt));
  write_samples(out, x);
}

void cmd_eval(const std::string& checkpoint, const std::string& config_path,
              const std::string& out) {
  const RunConfig rc = load_config(config_path);
  const Checkpoint ckpt = load_checkpoint(checkpoint);
  require_spec(ckpt, rc.train.network_spec());
  std::int64_t step = 0;
  const ConsistencyModel model = consistency_model_from(ckpt, &step);
  const auto setting = data::make_setting(rc.train.setting, rc.train.geometry,
                                          rc.train.n_samples);
  const Eigen::Index n = rc.diagnostics.eval_n;
  Rng eval_rng = make_stream(rc.train.seed, "eval");
  Rng heldout_rng = make_stream(rc.train.seed, "heldout");
  const Batch z = data::sample(setting.noise, n, eval_rng);
  const Batch x = generate(model, model.params, z, ForwardProcess{rc.train.process},
                           schedule_from(ckpt));
  const Batch held = data::sample(setting.data, n, heldout_rng);
  const double ed = energy_distance(x, held);
  const std::vector<double> balance = mode_balance(x, setting.data);

  std::vector<std::string> header = {"step", "n", "energy_distance"};
  std::vector<std::string> row = {std::to_string(step), std::to_string(n),
                                  format_real(ed)};
  for (std::size_t k = 0; k < balance.size(); ++k) {
    header.push_back(fmt::format("mode_balance_{}", k));
    row.push_back(format_real(balance[k]));
  }
  CsvWriter w(out, header);
  w.row(row);
  w.flush();
}

int run_cli(int argc, const char* const* argv) {
  if (const char* level = std::getenv("CGC_LOG_LEVEL")) {
    spdlog::set_level(spdlog::level::from_str(level));
  }
  CLI::App app{"Consistency training with data-noise couplings"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  auto* train = app.add_subcommand("train", "Run consistency training");
  train->add_option("--config", config, "Config file")->required();
  train->add_option("--seed", seed, "Master seed (overrides the config)");
  train->add_option("--out", out, "Output directory")->required();
  std::optional<std::string> resume;
  train->add_option("--resume", resume, "Saved training state (.cgct)");

  auto* train_score_cmd =
      app.add_subcommand("train-score", "Train a denoising score model");
  train_score_cmd->add_option("--config", config, "Config file")->required();
  train_score_cmd->add_option("--seed", seed, "Master seed");
  train_score_cmd->add_option("--out", out, "Output directory")->required();

  DiagnoseOptions diag;
  std::string kind;
  auto* diagnose = app.add_subcommand("diagnose", "Run a diagnostic");
  diagnose->add_option("kind", kind, "variance | transport | pfode")
      ->required()
      ->check(CLI::IsMember({"variance", "transport", "pfode"}));
  diagnose->add_option("--checkpoint", diag.checkpoints, "Checkpoint(s)")
      ->required();
  auto* score_opt = diagnose->add_option("--score-checkpoint",
                                         diag.score_checkpoint,
                                         "Score model checkpoint");
  auto* analytic = diagnose->add_flag("--analytic-score", diag.analytic_score,
                                      "Use the exact mixture score");
  score_opt->excludes(analytic);
  diagnose->add_option("--config", diag.config_path, "Config file")->required();
  diagnose->add_option("--out", diag.out_dir, "Output directory")->required();
  diagnose->add_option("--seed", diag.seed, "Diagnostic seed");
  diagnose->add_flag("--samples", diag.keep_samples,
                     "Also write per-sample transport costs");

  std::string checkpoint;
  std::int64_t n = 0;
  std::uint64_t sample_seed = 0;
  auto* sample = app.add_subcommand("sample", "One-step generation");
  sample->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  sample->add_option("--n", n, "Number of samples")->required();
  sample->add_option("--seed", sample_seed, "Seed")->required();
  sample->add_option("--out", out, "Output CSV")->required();

  auto* eval = app.add_subcommand("eval", "Energy distance and mode balance");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint")->required();
  eval->add_option("--config", config, "Config file")->required();
  eval->add_option("--out", out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : exit_code(ErrorKind::kUsage);
  }

  try {
    if (*train) {
      cmd_train(config, seed, out, resume);
    } else if (*train_score_cmd) {
      cmd_train_score(config, seed, out);
    } else if (*diagnose) {
      diag.kind = parse_diagnostic_kind(kind);
      cmd_diagnose(diag);
    } else if (*sample) {
      cmd_sample(checkpoint, n, sample_seed, out);
    } else if (*eval) {
      cmd_eval(checkpoint, config, out);
    }
  } catch (const Error& e) {
    spdlog::error("{}", e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return exit_code(ErrorKind::kIo);
  }
  return 0;
}

}  // namespace cgc
