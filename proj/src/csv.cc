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

#include "cgc/csv.h"

#include <filesystem>
#include <sstream>

#include <fmt/format.h>

#include "cgc/error.h"

namespace cgc {

std::string format_real(double v) { return fmt::format("{}", v); }

CsvWriter::CsvWriter(const std::string& path,
                     const std::vector<std::string>& header, bool append)
    : path_(path), columns_(header.size()) {
  std::error_code ec;
  const bool resume = append && std::filesystem::file_size(path, ec) > 0 && !ec;
  out_.open(path, resume ? std::ios::app : std::ios::trunc);
  if (!out_) fail(ErrorKind::kIo, fmt::format("cannot write '{}'", path));
  if (!resume) row(header);
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != columns_) {
    fail(ErrorKind::kStructural,
         fmt::format("CSV row has {} fields, header has {}", fields.size(),
                     columns_));
  }
  out_ << fmt::format("{}\n", fmt::join(fields, ","));
  if (!out_) fail(ErrorKind::kIo, fmt::format("write to '{}' failed", path_));
}

void CsvWriter::flush() {
  out_.flush();
  if (!out_) fail(ErrorKind::kIo, fmt::format("flush of '{}' failed", path_));
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  fail(ErrorKind::kStructural, fmt::format("CSV lacks column '{}'", name));
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kIo, fmt::format("cannot read '{}'", path));
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (first) {
      t.header = std::move(fields);
      first = false;
    } else {
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

MetricsWriter::MetricsWriter(const std::string& path, bool append)
    : out_(path, {"step", "metric", "value"}, append) {}

void MetricsWriter::write(const MetricsRecord& r) {
  out_.row({std::to_string(r.step), r.metric, format_real(r.value)});
}

void write_samples(const std::string& path, const Batch& points,
                   const std::vector<int>* labels) {
  std::vector<std::string> header;
  for (Eigen::Index d = 0; d < points.rows(); ++d) {
    header.push_back(fmt::format("x{}", d));
  }
  if (labels) header.push_back("label");
  CsvWriter out(path, header);
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    std::vector<std::string> f;
    for (Eigen::Index d = 0; d < points.rows(); ++d) {
      f.push_back(format_real(points(d, j)));
    }
    if (labels) f.push_back(std::to_string((*labels)[static_cast<std::size_t>(j)]));
    out.row(f);
  }
  out.flush();
}

void write_variance(
    const std::string& path,
    const std::vector<std::pair<std::string, VarianceReport>>& rows) {
  CsvWriter out(path, {"step", "coupling", "variance", "estimator"});
  for (const auto& [coupling, r] : rows) {
    out.row({std::to_string(r.step), coupling, format_real(r.variance),
             r.estimator});
  }
  out.flush();
}

void write_transport(const std::string& path, const TransportReport& r) {
  CsvWriter out(path, {"timestep", "sigma", "ic_cost", "gc_cost", "ic_stderr",
                       "gc_stderr"});
  for (std::size_t i = 0; i < r.timestep.size(); ++i) {
    const bool gc = i < r.gc_cost.size();
    out.row({std::to_string(r.timestep[i]), format_real(r.sigma[i]),
             format_real(r.ic_cost[i]), gc ? format_real(r.gc_cost[i]) : "",
             format_real(r.ic_stderr[i]), gc ? format_real(r.gc_stderr[i]) : ""});
  }
  out.flush();
}

void write_transport_samples(const std::string& path,
                             const TransportReport& r) {
  CsvWriter out(path, {"timestep", "coupling", "cost"});
  auto emit = [&](const std::vector<std::vector<double>>& s, const char* tag) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (double c : s[i]) {
        out.row({std::to_string(r.timestep[i]), tag, format_real(c)});
      }
    }
  };
  emit(r.ic_samples, "ic");
  emit(r.gc_samples, "gc");
  out.flush();
}

void write_pfode(const std::string& path,
                 const std::vector<PfodeDistanceReport>& reports) {
  CsvWriter out(path, {"step", "n", "ic_distance", "gc_distance", "ic_stderr",
                       "gc_stderr"});
  for (const auto& r : reports) {
    out.row({std::to_string(r.step), std::to_string(r.n),
             format_real(r.ic_distance), format_real(r.gc_distance),
             format_real(r.ic_stderr), format_real(r.gc_stderr)});
  }
  out.flush();
}

void write_pfode_by_timestep(const std::string& path,
                             const std::vector<PfodeDistanceReport>& reports) {
  CsvWriter out(path,
                {"step", "timestep", "count", "ic_distance", "gc_distance"});
  for (const auto& r : reports) {
    for (std::size_t t = 0; t < r.count_by_timestep.size(); ++t) {
      out.row({std::to_string(r.step), std::to_string(t),
               std::to_string(r.count_by_timestep[t]),
               format_real(r.ic_by_timestep[t]),
               format_real(r.gc_by_timestep[t])});
    }
  }
  out.flush();
}

}  // namespace cgc
