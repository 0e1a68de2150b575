// Copyright 2026 The seqforce Authors
// SPDX-License-Identifier: Apache-2.0

#include "seqforce/tasks/dataset_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>

#include "record_json.hpp"
#include "seqforce/errors.hpp"

namespace seqforce::tasks {

namespace detail {

using nlohmann::json;

json matrix_to_json(const ad::Tensor& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    rows.push_back(json(std::vector<double>(row.begin(), row.end())));
  }
  return rows;
}

ad::Tensor matrix_from_json(const json& j, const char* field) {
  const std::string name(field);
  if (!j.is_array() || j.empty()) throw DataError("'" + name + "' must be a non-empty array of rows");
  std::size_t cols = 0;
  std::vector<double> values;
  for (const auto& row : j) {
    if (!row.is_array() || row.empty()) throw DataError("'" + name + "' rows must be non-empty arrays");
    if (cols == 0) cols = row.size();
    if (row.size() != cols) throw DataError("'" + name + "' rows have unequal lengths");
    for (const auto& v : row) {
      if (!v.is_number()) throw DataError("'" + name + "' entries must be numbers");
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw DataError("'" + name + "' entries must be finite");
      values.push_back(x);
    }
  }
  return ad::Tensor({j.size(), cols}, std::move(values));
}

namespace {

TokenSeq tokens_from_json(const json& j, const char* field) {
  if (!j.is_array()) throw DataError(std::string("'") + field + "' must be an array");
  TokenSeq out;
  for (const auto& v : j) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
      throw DataError(std::string("'") + field + "' must hold non-negative integers");
    }
    out.push_back(v.get<Token>());
  }
  return out;
}

}  // namespace

json pair_to_json(const AlignedPair& pair) {
  json j;
  j["src"] = pair.src;
  if (pair.discrete()) {
    j["tgt"] = pair.tokens();
  } else {
    j["tgt"] = matrix_to_json(pair.frames());
  }
  if (pair.align) j["align"] = matrix_to_json(*pair.align);
  return j;
}

AlignedPair pair_from_json(const json& j, const DatasetFormat& format) {
  if (!j.is_object()) throw DataError("record is not an object");
  if (!j.contains("src")) throw DataError("missing field 'src'");
  AlignedPair pair;
  pair.src = tokens_from_json(j["src"], "src");
  if (pair.src.empty()) throw DataError("'src' must be non-empty");
  if (!j.contains("tgt")) {
    if (!format.allow_missing_target) throw DataError("missing field 'tgt'");
    pair.tgt = TokenSeq{};
    return pair;
  }
  const auto& tgt = j["tgt"];
  if (!tgt.is_array()) throw DataError("'tgt' must be an array");
  TargetFormat kind = format.target;
  if (kind == TargetFormat::Auto) kind = (!tgt.empty() && tgt.front().is_array()) ? TargetFormat::Frames : TargetFormat::Tokens;
  if (kind == TargetFormat::Frames) {
    pair.tgt = matrix_from_json(tgt, "tgt");
  } else {
    pair.tgt = tokens_from_json(tgt, "tgt");
  }
  if (j.contains("align")) {
    auto align = matrix_from_json(j["align"], "align");
    if (align.rows() != pair.target_length() || align.cols() != pair.src.size()) {
      throw DataError("'align' must be " + std::to_string(pair.target_length()) + " x " +
                      std::to_string(pair.src.size()));
    }
    if (!is_row_stochastic(align)) throw DataError("'align' rows must be probability vectors");
    pair.align = std::move(align);
  } else if (format.require_alignment) {
    throw DataError("missing field 'align'");
  }
  return pair;
}

}  // namespace detail

Dataset read_dataset(std::istream& in, const DatasetFormat& format) {
  Dataset out;
  std::vector<std::size_t> bad_lines;
  std::ostringstream problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(detail::pair_from_json(nlohmann::json::parse(line), format));
    } catch (const nlohmann::json::exception& e) {
      bad_lines.push_back(line_no);
      problems << "\n  line " << line_no << ": invalid JSON (" << e.what() << ")";
    } catch (const DataError& e) {
      bad_lines.push_back(line_no);
      problems << "\n  line " << line_no << ": " << e.what();
    }
  }
  if (!bad_lines.empty()) {
    throw DataError(std::to_string(bad_lines.size()) + " malformed record(s):" + problems.str(), bad_lines);
  }
  return out;
}

Dataset load_dataset(const std::filesystem::path& path, const DatasetFormat& format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset " + path.string());
  try {
    return read_dataset(in, format);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what(), e.lines());
  }
}

void write_dataset(std::ostream& out, const Dataset& data) {
  for (const auto& pair : data) out << detail::pair_to_json(pair).dump() << '\n';
}

void save_dataset(const std::filesystem::path& path, const Dataset& data) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset " + path.string());
  write_dataset(out, data);
}

}  // namespace seqforce::tasks
