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

// Binary checkpoint format:
//   "CGCM" | u32 version | u32 model kind | u32 metadata length | metadata
//   (UTF-8 JSON) | u64 parameter count | live params | EMA params
// All integers and reals are little-endian.

#ifndef CGC_CHECKPOINT_H_
#define CGC_CHECKPOINT_H_

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>

#include "cgc/model.h"
#include "cgc/nn.h"
#include "cgc/score.h"
#include "cgc/train.h"

namespace cgc {

inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class ModelKind : std::uint32_t { kConsistency = 0, kScore = 1 };

std::string to_string(ModelKind kind);

struct Checkpoint {
  ModelKind kind = ModelKind::kConsistency;
  std::string metadata;  // JSON text, stored verbatim
  ParamVector params;
  ParamVector ema;

  nlohmann::json metadata_json() const;
};

std::string encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::string& source = "<bytes>");

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

Checkpoint make_checkpoint(const Trainer& trainer, const TrainState& state);
Checkpoint make_checkpoint(const ScoreModel& model, const ParamVector& live,
                           std::int64_t step);

// Rebuilds the model with the EMA parameters; `step` receives the stored
// training step when non-null.
ConsistencyModel consistency_model_from(const Checkpoint& ckpt,
                                        std::int64_t* step = nullptr);
ScoreModel score_model_from(const Checkpoint& ckpt);

// Resumable training state, a separate "CGCT" file:
//   "CGCT" | u32 version | i64 step | u64 n | params | EMA params | EMA decay
//   | u32 optimizer kind | lr, beta1, beta2, epsilon, weight decay, clip
//   | u64 optimizer step | u64 len + first moment | u64 len + second moment
//   | data, noise, timestep, mixing engine states (u32 length + text each)
std::string encode_train_state(const TrainState& state);
TrainState decode_train_state(const std::string& bytes,
                              const std::string& source = "<bytes>");
void save_train_state(const TrainState& state, const std::string& path);
TrainState load_train_state(const std::string& path);

// Setting, process and final-step grid recorded by a consistency
// checkpoint.
data::ExperimentSetting setting_from(const Checkpoint& ckpt);
ForwardProcess process_from(const Checkpoint& ckpt);
NoiseSchedule schedule_from(const Checkpoint& ckpt);

// Throws Error{kStructural} unless the checkpoint's network matches `spec`.
void require_spec(const Checkpoint& ckpt, const nn::NetworkSpec& spec);

}  // namespace cgc

#endif  // CGC_CHECKPOINT_H_
