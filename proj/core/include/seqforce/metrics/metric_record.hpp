// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace seqforce::metrics {

/// One logged scalar. Serialized as a single JSON object per line.
struct MetricRecord {
  std::string name;
  double value = 0.0;
  std::size_t step = 0;
  std::string split = "train";
  std::map<std::string, std::variant<double, std::string>> extra;

  friend bool operator==(const MetricRecord&, const MetricRecord&) = default;
};

using MetricSink = std::function<void(const MetricRecord&)>;

/// Throws ContractError when the value is not finite.
std::string to_json_line(const MetricRecord& r);
MetricRecord from_json_line(const std::string& line);

void write_metrics(std::ostream& out, const std::vector<MetricRecord>& records);
std::vector<MetricRecord> read_metrics(std::istream& in);

}  // namespace seqforce::metrics
