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

// Run configuration files: INI-style `key = value` lines grouped in sections
// that mirror the hyperparameter tables of the experiments.

#ifndef CGC_CONFIG_H_
#define CGC_CONFIG_H_

#include <cstdint>
#include <string>

#include "cgc/score.h"
#include "cgc/train.h"

namespace cgc {

struct DiagnosticsConfig {
  Eigen::Index transport_n = 10000;
  Eigen::Index pfode_n = 10000;
  Eigen::Index variance_batch = 512;
  Eigen::Index eval_n = 5000;
};

struct RunConfig {
  TrainConfig train;
  ScoreTrainConfig score;
  DiagnosticsConfig diagnostics;
  std::string text;    // file contents, byte-exact
  std::string source;  // path or "<string>"
};

// Throws Error{kConfig} naming the source and line for syntax errors,
// unknown keys and malformed values.
RunConfig parse_config(const std::string& text,
                       const std::string& source = "<string>");
RunConfig load_config(const std::string& path);

}  // namespace cgc

#endif  // CGC_CONFIG_H_
