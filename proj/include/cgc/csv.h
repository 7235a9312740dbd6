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

#ifndef CGC_CSV_H_
#define CGC_CSV_H_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "cgc/diagnostics.h"
#include "cgc/nn.h"
#include "cgc/train.h"

namespace cgc {

// Shortest decimal text that parses back to the same double.
std::string format_real(double v);

class CsvWriter {
 public:
  // Writes the header row immediately, unless appending to a nonempty file;
  // throws Error{kIo} on failure.
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            bool append = false);

  void row(const std::vector<std::string>& fields);
  void flush();

 private:
  std::string path_;
  std::size_t columns_ = 0;
  std::ofstream out_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of `name` in the header; throws Error{kStructural} if missing.
  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

// metrics.csv: step,metric,value
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path, bool append = false);
  void write(const MetricsRecord& r);
  void flush() { out_.flush(); }

 private:
  CsvWriter out_;
};

// x0,x1[,label]
void write_samples(const std::string& path, const Batch& points,
                   const std::vector<int>* labels = nullptr);

// step,coupling,variance,estimator
void write_variance(const std::string& path,
                    const std::vector<std::pair<std::string, VarianceReport>>&
                        rows);

// timestep,sigma,ic_cost,gc_cost,ic_stderr,gc_stderr
void write_transport(const std::string& path, const TransportReport& report);

// timestep,coupling,cost (one row per sample)
void write_transport_samples(const std::string& path,
                             const TransportReport& report);

// step,n,ic_distance,gc_distance,ic_stderr,gc_stderr
void write_pfode(const std::string& path,
                 const std::vector<PfodeDistanceReport>& reports);

// step,timestep,count,ic_distance,gc_distance
void write_pfode_by_timestep(const std::string& path,
                             const std::vector<PfodeDistanceReport>& reports);

}  // namespace cgc

#endif  // CGC_CSV_H_
