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

// Command implementations behind the `cgc` executable. Each cmd_* throws
// cgc::Error on failure; run_cli maps errors to exit codes.

#ifndef CGC_CLI_H_
#define CGC_CLI_H_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace cgc {

enum class DiagnosticKind { kVariance, kTransport, kPfode };

DiagnosticKind parse_diagnostic_kind(const std::string& name);

struct DiagnoseOptions {
  DiagnosticKind kind = DiagnosticKind::kVariance;
  std::vector<std::string> checkpoints;
  std::optional<std::string> score_checkpoint;
  bool analytic_score = false;
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;  // defaults to the config's seed
  bool keep_samples = false;          // transport: per-sample costs CSV
};

// Writes manifest.json, metrics.csv, checkpoints/step_<k>.ckpt and the
// resumable checkpoints/state.cgct under out_dir. `seed` overrides the
// config's seed; `resume` continues from a saved training state, appending
// to metrics.csv.
void cmd_train(const std::string& config_path, std::optional<std::uint64_t> seed,
               const std::string& out_dir,
               const std::optional<std::string>& resume = std::nullopt);
// Writes score.ckpt and score_metrics.csv under out_dir.
void cmd_train_score(const std::string& config_path,
                     std::optional<std::uint64_t> seed,
                     const std::string& out_dir);
void cmd_diagnose(const DiagnoseOptions& options);
void cmd_sample(const std::string& checkpoint, std::int64_t n,
                std::uint64_t seed, const std::string& out);
void cmd_eval(const std::string& checkpoint, const std::string& config_path,
              const std::string& out);

// Replaces `path` with `doc` via a temporary file and rename.
void write_json_atomic(const std::string& path, const nlohmann::json& doc);

std::string version_string();

int run_cli(int argc, const char* const* argv);

}  // namespace cgc

#endif  // CGC_CLI_H_
