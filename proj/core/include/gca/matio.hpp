#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "gca/matrix.hpp"

namespace gca {

// CSV: no header, comma separated, one matrix row per line.
DenseMatrix parse_matrix_csv(std::string_view text);
std::string format_matrix_csv(const DenseMatrix& m);
DenseMatrix read_matrix_csv(const std::filesystem::path& path);
void write_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path);

// "GCAM" | version 1 | u64 rows | u64 cols | rows*cols f64, all little-endian.
DenseMatrix read_matrix_bin(const std::filesystem::path& path);
void write_matrix_bin(const DenseMatrix& m, const std::filesystem::path& path);

// Dispatches on extension: .gcam and .bin are binary, anything else CSV.
DenseMatrix read_matrix(const std::filesystem::path& path);
void write_matrix(const DenseMatrix& m, const std::filesystem::path& path);

// Reads a single row or single column file as a flat vector.
Vector read_vector(const std::filesystem::path& path);

std::span<const std::string_view> metric_registry();

struct MetricsRecord {
  std::int64_t step = 0;
  std::map<std::string, double> values;

  void validate() const;
};

std::string format_metrics_json(const MetricsRecord& record);
void append_metrics_jsonl(const MetricsRecord& record, const std::filesystem::path& path);

}  // namespace gca
