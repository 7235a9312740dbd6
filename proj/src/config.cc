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

#include "cgc/config.h"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <system_error>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc {
namespace {

namespace pt = boost::property_tree;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

// Line number of `section.key` in the source text, 0 if absent.
int locate(const std::string& text, const std::string& section,
           const std::string& key) {
  std::istringstream in(text);
  std::string line;
  std::string current;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string t = trim(line);
    if (t.empty() || t[0] == ';' || t[0] == '#') continue;
    if (t.front() == '[' && t.back() == ']') {
      current = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq != std::string::npos && current == section &&
        trim(t.substr(0, eq)) == key) {
      return n;
    }
  }
  return 0;
}

class Reader {
 public:
  Reader(const pt::ptree& tree, const std::string& text,
         const std::string& source)
      : tree_(tree), text_(text), source_(source) {}

  [[noreturn]] void error(const std::string& section, const std::string& key,
                          const std::string& what) const {
    const int line = locate(text_, section, key);
    fail(ErrorKind::kConfig,
         line > 0 ? fmt::format("{}:{}: [{}] {}: {}", source_, line, section,
                                key, what)
                  : fmt::format("{}: [{}] {}: {}", source_, section, key, what));
  }

  const std::string* raw(const std::string& section, const std::string& key) {
    known_.insert(section + "." + key);
    const auto sec = tree_.find(section);
    if (sec == tree_.not_found()) return nullptr;
    const auto it = sec->second.find(key);
    if (it == sec->second.not_found()) return nullptr;
    return &it->second.data();
  }

  void get(const std::string& section, const std::string& key, double& out) {
    const std::string* v = raw(section, key);
    if (!v) return;
    const std::string t = trim(*v);
    double d = 0.0;
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), d);
    if (ec != std::errc() || end != t.data() + t.size()) {
      error(section, key, fmt::format("expected a number, got '{}'", t));
    }
    out = d;
  }

  template <typename Int>
    requires std::is_integral_v<Int>
  void get(const std::string& section, const std::string& key, Int& out) {
    const std::string* v = raw(section, key);
    if (!v) return;
    const std::string t = trim(*v);
    Int d{};
    const auto [end, ec] = std::from_chars(t.data(), t.data() + t.size(), d);
    if (ec != std::errc() || end != t.data() + t.size()) {
      error(section, key, fmt::format("expected an integer, got '{}'", t));
    }
    out = d;
  }

  void get(const std::string& section, const std::string& key, bool& out) {
    const std::string* v = raw(section, key);
    if (!v) return;
    const std::string t = trim(*v);
    if (t == "true" || t == "1") {
      out = true;
    } else if (t == "false" || t == "0") {
      out = false;
    } else {
      error(section, key, fmt::format("expected true or false, got '{}'", t));
    }
  }

  void get(const std::string& section, const std::string& key,
           std::string& out) {
    if (const std::string* v = raw(section, key)) out = trim(*v);
  }

  // Runs `parse` on the value, re-labelling its Config error with the line.
  template <typename Fn>
  void get_with(const std::string& section, const std::string& key, Fn parse) {
    const std::string* v = raw(section, key);
    if (!v) return;
    try {
      parse(trim(*v));
    } catch (const Error& e) {
      error(section, key, e.what());
    }
  }

  void reject_unknown() const {
    for (const auto& [section, body] : tree_) {
      if (body.empty()) {
        error("", section, "key outside of any section");
      }
      for (const auto& [key, value] : body) {
        if (!known_.count(section + "." + key)) {
          error(section, key, "unknown key");
        }
      }
    }
  }

 private:
  const pt::ptree& tree_;
  const std::string& text_;
  const std::string& source_;
  std::set<std::string> known_;
};

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& source) {
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    fail(ErrorKind::kConfig,
         fmt::format("{}:{}: {}", source, e.line(), e.message()));
  }

  RunConfig rc;
  rc.text = text;
  rc.source = source;
  TrainConfig& c = rc.train;
  Reader r(tree, rc.text, rc.source);

  r.get_with("run", "setting", [&](const std::string& v) {
    c.setting = data::parse_setting_name(v);
  });
  r.get("run", "n_samples", c.n_samples);
  r.get("run", "total_steps", c.total_steps);
  r.get("run", "batch_size", c.batch_size);
  r.get("run", "seed", c.seed);
  r.get("run", "log_interval", c.log_interval);
  r.get("run", "variance_interval", c.variance_interval);
  r.get("run", "checkpoint_interval", c.checkpoint_interval);

  r.get("geometry", "mode_offset", c.geometry.mode_offset);
  r.get("geometry", "component_std", c.geometry.component_std);
  r.get("geometry", "noise_std", c.geometry.noise_std);

  r.get_with("process", "kind", [&](const std::string& v) {
    c.process = parse_process_kind(v);
  });
  r.get("process", "sigma_min", c.sigma_min);
  r.get("process", "sigma_max", c.sigma_max);
  r.get("process", "rho", c.rho);

  r.get_with("schedule", "curriculum", [&](const std::string& v) {
    if (v == "fixed") {
      c.curriculum.mode = CurriculumMode::kFixed;
    } else if (v == "exponential") {
      c.curriculum.mode = CurriculumMode::kExponential;
    } else {
      fail(ErrorKind::kConfig,
           fmt::format("expected fixed or exponential, got '{}'", v));
    }
  });
  r.get("schedule", "n", c.curriculum.fixed_n);
  r.get("schedule", "s0", c.curriculum.s0);
  r.get("schedule", "s1", c.curriculum.s1);
  r.get_with("schedule", "timesteps", [&](const std::string& v) {
    if (v == "erf") {
      c.uniform_timesteps = false;
    } else if (v == "uniform") {
      c.uniform_timesteps = true;
    } else {
      fail(ErrorKind::kConfig,
           fmt::format("expected erf or uniform, got '{}'", v));
    }
  });
  r.get("schedule", "p_mean", c.p_mean);
  r.get("schedule", "p_std", c.p_std);

  r.get("network", "hidden_dim", c.hidden_dim);
  r.get("network", "depth", c.depth);

  r.get_with("optimizer", "kind", [&](const std::string& v) {
    c.optimizer.kind = optim::parse_optimizer_kind(v);
    if (c.optimizer.kind == optim::OptimizerKind::kLion) {
      c.optimizer.beta2 = optim::OptimizerHyperparams::lion(0.0).beta2;
    }
  });
  r.get("optimizer", "learning_rate", c.optimizer.learning_rate);
  r.get("optimizer", "beta1", c.optimizer.beta1);
  r.get("optimizer", "beta2", c.optimizer.beta2);
  r.get("optimizer", "epsilon", c.optimizer.epsilon);
  r.get("optimizer", "weight_decay", c.optimizer.weight_decay);
  r.get("optimizer", "max_grad_norm", c.optimizer.max_grad_norm);
  r.get("optimizer", "ema_decay", c.ema_decay);

  r.get("coupling", "mu", c.mixing.mu);
  r.get("coupling", "per_sample", c.mixing.per_sample);
  r.get("coupling", "use_ema_for_gc", c.use_ema_for_gc);
  r.get("coupling", "batch_ot", c.batch_ot);
  try {
    c.mixing.validate();
  } catch (const Error& e) {
    r.error("coupling", "mu", e.what());
  }

  std::string distance = "squared_l2";
  double huber_c = 0.0;
  r.get("loss", "distance", distance);
  r.get("loss", "huber_c", huber_c);
  try {
    c.distance = parse_distance(distance, huber_c);
  } catch (const Error& e) {
    r.error("loss", "distance", e.what());
  }
  r.get("loss", "weight_scale", c.loss_weight_scale);

  ScoreTrainConfig& s = rc.score;
  s.sigma_min = c.sigma_min;
  s.sigma_max = c.sigma_max;
  r.get("score", "steps", s.steps);
  r.get("score", "batch_size", s.batch_size);
  r.get("score", "learning_rate", s.learning_rate);
  r.get("score", "ema_decay", s.ema_decay);
  r.get("score", "hidden_dim", s.spec.hidden_dim);
  r.get("score", "depth", s.spec.depth);
  r.get("score", "sigma_min", s.sigma_min);
  r.get("score", "sigma_max", s.sigma_max);
  r.get("score", "fit_sigma_min", s.fit_sigma_min);
  r.get("score", "max_angular_error", s.max_angular_error);
  r.get("score", "max_magnitude_error", s.max_magnitude_error);

  DiagnosticsConfig& d = rc.diagnostics;
  r.get("diagnostics", "transport_n", d.transport_n);
  r.get("diagnostics", "pfode_n", d.pfode_n);
  r.get("diagnostics", "variance_batch", d.variance_batch);
  r.get("diagnostics", "eval_n", d.eval_n);

  r.reject_unknown();

  c.curriculum.total_steps = c.total_steps;
  try {
    c.validate();
    s.spec.validate();
    if (s.steps < 1 || s.batch_size < 1 || !(s.learning_rate > 0.0) ||
        !(s.sigma_min > 0.0) || !(s.sigma_max > s.sigma_min) ||
        !(s.fit_sigma_min > 0.0 && s.fit_sigma_min <= s.sigma_max) ||
        !(s.max_angular_error > 0.0) || !(s.max_magnitude_error > 0.0)) {
      fail(ErrorKind::kConfig, "invalid [score] settings");
    }
    if (d.transport_n < 1 || d.pfode_n < 1 || d.variance_batch < 2 ||
        d.eval_n < 1) {
      fail(ErrorKind::kConfig, "invalid [diagnostics] sample sizes");
    }
  } catch (const Error& e) {
    fail(e.kind(), fmt::format("{}: {}", source, e.what()));
  }
  return rc;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot read config '{}'", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path);
}

}  // namespace cgc
