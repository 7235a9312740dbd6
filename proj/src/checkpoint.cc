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

#include "cgc/checkpoint.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc {
namespace {

constexpr char kMagic[4] = {'C', 'G', 'C', 'M'};

template <typename U>
void put_le(std::string& out, U v) {
  for (std::size_t b = 0; b < sizeof(U); ++b) {
    out.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
  }
}

class Cursor {
 public:
  Cursor(const std::string& bytes, const std::string& source)
      : bytes_(bytes), source_(source) {}

  template <typename U>
  U get_le(const char* what) {
    need(sizeof(U), what);
    U v = 0;
    for (std::size_t b = 0; b < sizeof(U); ++b) {
      v |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + b]))
           << (8 * b);
    }
    pos_ += sizeof(U);
    return v;
  }

  std::string get_bytes(std::size_t n, const char* what) {
    need(n, what);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

  [[noreturn]] void corrupt(const std::string& what) const {
    fail(ErrorKind::kIo, fmt::format("checkpoint {}: {}", source_, what));
  }

 private:
  void need(std::size_t n, const char* what) const {
    if (remaining() < n) corrupt(fmt::format("truncated while reading {}", what));
  }

  const std::string& bytes_;
  const std::string& source_;
  std::size_t pos_ = 0;
};

void put_params(std::string& out, const ParamVector& p) {
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    put_le(out, std::bit_cast<std::uint64_t>(p[i]));
  }
}

ParamVector get_params(Cursor& c, std::uint64_t n) {
  ParamVector p(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    p[i] = std::bit_cast<double>(c.get_le<std::uint64_t>("parameters"));
  }
  return p;
}

nlohmann::json spec_json(const nn::NetworkSpec& spec) {
  return {{"input_dim", spec.input_dim},
          {"hidden_dim", spec.hidden_dim},
          {"depth", spec.depth},
          {"output_dim", spec.output_dim}};
}

nn::NetworkSpec spec_from(const nlohmann::json& meta) {
  try {
    const auto& n = meta.at("network");
    nn::NetworkSpec spec{n.at("input_dim").get<int>(),
                         n.at("hidden_dim").get<int>(),
                         n.at("depth").get<int>(),
                         n.at("output_dim").get<int>()};
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kStructural,
         fmt::format("checkpoint metadata lacks a network spec: {}", e.what()));
  }
}

template <typename T>
T meta_get(const nlohmann::json& meta, const char* key) {
  try {
    return meta.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kStructural,
         fmt::format("checkpoint metadata field '{}': {}", key, e.what()));
  }
}

}  // namespace

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kConsistency ? "consistency" : "score";
}

nlohmann::json Checkpoint::metadata_json() const {
  try {
    return nlohmann::json::parse(metadata);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kIo,
         fmt::format("checkpoint metadata is not valid JSON: {}", e.what()));
  }
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  if (ckpt.params.size() != ckpt.ema.size()) {
    fail(ErrorKind::kStructural,
         fmt::format("live ({}) and EMA ({}) parameter counts differ",
                     ckpt.params.size(), ckpt.ema.size()));
  }
  std::string out(kMagic, sizeof(kMagic));
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint32_t>(ckpt.kind));
  put_le(out, static_cast<std::uint32_t>(ckpt.metadata.size()));
  out += ckpt.metadata;
  put_le(out, static_cast<std::uint64_t>(ckpt.params.size()));
  put_params(out, ckpt.params);
  put_params(out, ckpt.ema);
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes,
                             const std::string& source) {
  Cursor c(bytes, source);
  if (c.get_bytes(4, "magic") != std::string(kMagic, sizeof(kMagic))) {
    c.corrupt("bad magic bytes");
  }
  const auto version = c.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    c.corrupt(fmt::format("unsupported format version {}", version));
  }
  Checkpoint ckpt;
  const auto kind = c.get_le<std::uint32_t>("model kind");
  if (kind > static_cast<std::uint32_t>(ModelKind::kScore)) {
    c.corrupt(fmt::format("unknown model kind {}", kind));
  }
  ckpt.kind = static_cast<ModelKind>(kind);
  const auto meta_len = c.get_le<std::uint32_t>("metadata length");
  ckpt.metadata = c.get_bytes(meta_len, "metadata");
  const auto n = c.get_le<std::uint64_t>("parameter count");
  if (c.remaining() != n * 2 * sizeof(double)) {
    c.corrupt(fmt::format("{} parameters need {} bytes, found {}", n,
                          n * 2 * sizeof(double), c.remaining()));
  }
  ckpt.params = get_params(c, n);
  ckpt.ema = get_params(c, n);
  return ckpt;
}

namespace {

void write_atomic(const std::string& bytes, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorKind::kIo, fmt::format("cannot write '{}'", tmp));
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    fail(ErrorKind::kIo,
         fmt::format("cannot move '{}' to '{}': {}", tmp, path, ec.message()));
  }
}

std::string read_all(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot read '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

constexpr char kStateMagic[4] = {'C', 'G', 'C', 'T'};

void put_real(std::string& out, double v) {
  put_le(out, std::bit_cast<std::uint64_t>(v));
}

void put_vector(std::string& out, const ParamVector& v) {
  put_le(out, static_cast<std::uint64_t>(v.size()));
  put_params(out, v);
}

void put_text(std::string& out, const std::string& s) {
  put_le(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

double get_real(Cursor& c, const char* what) {
  return std::bit_cast<double>(c.get_le<std::uint64_t>(what));
}

ParamVector get_vector(Cursor& c, const char* what) {
  const auto n = c.get_le<std::uint64_t>(what);
  if (n > c.remaining() / sizeof(double)) c.corrupt(fmt::format("bad {} length", what));
  return get_params(c, n);
}

Rng get_rng(Cursor& c, const char* what) {
  const auto n = c.get_le<std::uint32_t>(what);
  return load_rng(c.get_bytes(n, what));
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_atomic(encode_checkpoint(ckpt), path);
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_all(path), path);
}

std::string encode_train_state(const TrainState& s) {
  std::string out(kStateMagic, sizeof(kStateMagic));
  put_le(out, kCheckpointVersion);
  put_le(out, static_cast<std::uint64_t>(s.step));
  put_vector(out, s.params);
  put_vector(out, s.ema.params);
  put_real(out, s.ema.decay);
  const auto& hp = s.optimizer.hyperparams;
  put_le(out, static_cast<std::uint32_t>(hp.kind));
  for (double v : {hp.learning_rate, hp.beta1, hp.beta2, hp.epsilon,
                   hp.weight_decay, hp.max_grad_norm}) {
    put_real(out, v);
  }
  put_le(out, s.optimizer.step_count);
  put_vector(out, s.optimizer.first_moment);
  put_vector(out, s.optimizer.second_moment);
  for (const Rng* r : {&s.rng.data, &s.rng.noise, &s.rng.timestep, &s.rng.mixing}) {
    put_text(out, save_rng(*r));
  }
  return out;
}

TrainState decode_train_state(const std::string& bytes,
                              const std::string& source) {
  Cursor c(bytes, source);
  if (c.get_bytes(4, "magic") != std::string(kStateMagic, sizeof(kStateMagic))) {
    c.corrupt("bad magic bytes");
  }
  const auto version = c.get_le<std::uint32_t>("version");
  if (version != kCheckpointVersion) {
    c.corrupt(fmt::format("unsupported format version {}", version));
  }
  TrainState s;
  s.step = static_cast<std::int64_t>(c.get_le<std::uint64_t>("step"));
  s.params = get_vector(c, "params");
  s.ema.params = get_vector(c, "EMA params");
  s.ema.decay = get_real(c, "EMA decay");
  auto& hp = s.optimizer.hyperparams;
  const auto kind = c.get_le<std::uint32_t>("optimizer kind");
  if (kind > static_cast<std::uint32_t>(optim::OptimizerKind::kLion)) {
    c.corrupt(fmt::format("unknown optimizer kind {}", kind));
  }
  hp.kind = static_cast<optim::OptimizerKind>(kind);
  for (double* v : {&hp.learning_rate, &hp.beta1, &hp.beta2, &hp.epsilon,
                    &hp.weight_decay, &hp.max_grad_norm}) {
    *v = get_real(c, "optimizer hyperparameters");
  }
  s.optimizer.step_count = c.get_le<std::uint64_t>("optimizer step");
  s.optimizer.first_moment = get_vector(c, "first moment");
  s.optimizer.second_moment = get_vector(c, "second moment");
  s.rng.data = get_rng(c, "data stream");
  s.rng.noise = get_rng(c, "noise stream");
  s.rng.timestep = get_rng(c, "timestep stream");
  s.rng.mixing = get_rng(c, "mixing stream");
  if (c.remaining() != 0) c.corrupt("trailing bytes");
  if (s.ema.params.size() != s.params.size() ||
      s.optimizer.first_moment.size() != s.params.size()) {
    c.corrupt("parameter, EMA and moment lengths differ");
  }
  return s;
}

void save_train_state(const TrainState& state, const std::string& path) {
  write_atomic(encode_train_state(state), path);
}

TrainState load_train_state(const std::string& path) {
  return decode_train_state(read_all(path), path);
}

Checkpoint make_checkpoint(const Trainer& trainer, const TrainState& state) {
  const TrainConfig& cfg = trainer.config();
  const ConsistencyModel& m = trainer.model();
  const std::int64_t last = std::min(state.step, cfg.total_steps - 1);
  nlohmann::json meta = {
      {"kind", to_string(ModelKind::kConsistency)},
      {"network", spec_json(m.spec)},
      {"sigma_data", m.sigma_data},
      {"sigma_min", m.sigma_min},
      {"sigma_max", m.sigma_max},
      {"rho", cfg.rho},
      {"n_steps", trainer.schedule_at(last).n_steps},
      {"process", to_string(cfg.process)},
      {"setting", data::to_string(cfg.setting)},
      {"geometry",
       {{"mode_offset", cfg.geometry.mode_offset},
        {"component_std", cfg.geometry.component_std},
        {"noise_std", cfg.geometry.noise_std}}},
      {"seed", cfg.seed},
      {"step", state.step},
  };
  return {ModelKind::kConsistency, meta.dump(), state.params, state.ema.params};
}

Checkpoint make_checkpoint(const ScoreModel& model, const ParamVector& live,
                           std::int64_t step) {
  nlohmann::json meta = {
      {"kind", to_string(ModelKind::kScore)},
      {"network", spec_json(model.spec)},
      {"sigma_data", model.sigma_data},
      {"step", step},
  };
  return {ModelKind::kScore, meta.dump(), live, model.params};
}

ConsistencyModel consistency_model_from(const Checkpoint& ckpt,
                                        std::int64_t* step) {
  if (ckpt.kind != ModelKind::kConsistency) {
    fail(ErrorKind::kStructural,
         fmt::format("expected a consistency checkpoint, got {}",
                     to_string(ckpt.kind)));
  }
  const auto meta = ckpt.metadata_json();
  ConsistencyModel m;
  m.spec = spec_from(meta);
  require_spec(ckpt, m.spec);
  m.params = ckpt.ema;
  m.sigma_data = meta_get<double>(meta, "sigma_data");
  m.sigma_min = meta_get<double>(meta, "sigma_min");
  m.sigma_max = meta_get<double>(meta, "sigma_max");
  if (step) *step = meta_get<std::int64_t>(meta, "step");
  return m;
}

ScoreModel score_model_from(const Checkpoint& ckpt) {
  if (ckpt.kind != ModelKind::kScore) {
    fail(ErrorKind::kStructural,
         fmt::format("expected a score checkpoint, got {}",
                     to_string(ckpt.kind)));
  }
  const auto meta = ckpt.metadata_json();
  ScoreModel m;
  m.spec = spec_from(meta);
  require_spec(ckpt, m.spec);
  m.params = ckpt.ema;
  m.sigma_data = meta_get<double>(meta, "sigma_data");
  return m;
}

data::ExperimentSetting setting_from(const Checkpoint& ckpt) {
  const auto meta = ckpt.metadata_json();
  data::SettingGeometry g;
  try {
    const auto& j = meta.at("geometry");
    g.mode_offset = j.at("mode_offset").get<double>();
    g.component_std = j.at("component_std").get<double>();
    g.noise_std = j.at("noise_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::kStructural,
         fmt::format("checkpoint metadata lacks the setting geometry: {}",
                     e.what()));
  }
  return data::make_setting(
      data::parse_setting_name(meta_get<std::string>(meta, "setting")), g, 1);
}

ForwardProcess process_from(const Checkpoint& ckpt) {
  return {parse_process_kind(meta_get<std::string>(ckpt.metadata_json(),
                                                   "process"))};
}

NoiseSchedule schedule_from(const Checkpoint& ckpt) {
  const auto meta = ckpt.metadata_json();
  return build_grid(meta_get<double>(meta, "sigma_min"),
                    meta_get<double>(meta, "sigma_max"),
                    meta_get<double>(meta, "rho"),
                    meta_get<int>(meta, "n_steps"));
}

void require_spec(const Checkpoint& ckpt, const nn::NetworkSpec& spec) {
  const nn::NetworkSpec stored = spec_from(ckpt.metadata_json());
  if (!(stored == spec) ||
      static_cast<std::size_t>(ckpt.params.size()) != spec.param_count()) {
    fail(ErrorKind::kStructural,
         fmt::format("checkpoint network (depth {}, width {}, {} params) does "
                     "not match the configured network (depth {}, width {}, "
                     "{} params)",
                     stored.depth, stored.hidden_dim, ckpt.params.size(),
                     spec.depth, spec.hidden_dim, spec.param_count()));
  }
}

}  // namespace cgc
