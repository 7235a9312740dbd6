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

#ifndef CGC_RNG_H_
#define CGC_RNG_H_

#include <cstdint>
#include <random>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace cgc {

using Rng = std::mt19937_64;

// Seed for an independent stream: splitmix64 over the master seed mixed with
// an FNV-1a hash of the purpose label. Labels in use: "init", "pool", "data",
// "noise", "timestep", "mixing", "eval", "heldout", "diagnostic".
std::uint64_t derive_seed(std::uint64_t master, std::string_view purpose);
Rng make_stream(std::uint64_t master, std::string_view purpose);

// dim x n matrix of i.i.d. N(0, 1) draws, column by column.
Eigen::MatrixXd standard_normal(Eigen::Index dim, Eigen::Index n, Rng& rng);

std::string save_rng(const Rng& rng);
Rng load_rng(const std::string& text);

}  // namespace cgc

#endif  // CGC_RNG_H_
