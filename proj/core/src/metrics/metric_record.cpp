// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/metrics/metric_record.hpp"

#include <cmath>
#include <istream>
#include <ostream>

#include <nlohmann/json.hpp>

#include "seqforce/errors.hpp"

namespace seqforce::metrics {

std::string to_json_line(const MetricRecord& r) {
  if (!std::isfinite(r.value)) throw ContractError("metric '" + r.name + "' is not finite");
  nlohmann::ordered_json j;
  j["name"] = r.name;
  j["value"] = r.value;
  j["step"] = r.step;
  j["split"] = r.split;
  for (const auto& [key, v] : r.extra) {
    std::visit([&](const auto& x) { j[key] = x; }, v);
  }
  return j.dump();
}

MetricRecord from_json_line(const std::string& line) {
  const auto j = nlohmann::json::parse(line);
  MetricRecord r;
  r.name = j.at("name").get<std::string>();
  r.value = j.at("value").get<double>();
  r.step = j.at("step").get<std::size_t>();
  r.split = j.at("split").get<std::string>();
  for (const auto& [key, v] : j.items()) {
    if (key == "name" || key == "value" || key == "step" || key == "split") continue;
    if (v.is_string()) {
      r.extra[key] = v.get<std::string>();
    } else {
      r.extra[key] = v.get<double>();
    }
  }
  return r;
}

void write_metrics(std::ostream& out, const std::vector<MetricRecord>& records) {
  for (const auto& r : records) out << to_json_line(r) << '\n';
}

std::vector<MetricRecord> read_metrics(std::istream& in) {
  std::vector<MetricRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(from_json_line(line));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("metrics line " + std::to_string(line_no) + ": " + e.what(), {line_no});
    }
  }
  return out;
}

}  // namespace seqforce::metrics
