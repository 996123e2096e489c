#include "gca/matio.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "gca/error.hpp"

namespace gca {

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw Error(Errc::io, "read failed for " + path.string());
  return ss.str();
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  cell = trim(cell);
  if (!cell.empty() && cell.front() == '+') cell.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  const std::string where = " at row " + std::to_string(row + 1) + ", column " + std::to_string(col + 1);
  if (ec == std::errc::result_out_of_range)
    throw Error(Errc::non_finite, "value out of range" + where);
  if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size())
    throw Error(Errc::parse, "invalid number '" + std::string(cell) + "'" + where);
  if (!std::isfinite(value)) throw Error(Errc::non_finite, "non-finite value" + where);
  return value;
}

static_assert(std::endian::native == std::endian::little, "binary I/O assumes a little-endian host");

}  // namespace

DenseMatrix parse_matrix_csv(std::string_view text) {
  std::vector<double> data;
  std::size_t rows = 0, cols = 0;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (trim(line).empty()) continue;

    std::size_t count = 0;
    while (true) {
      auto comma = line.find(',');
      data.push_back(parse_cell(line.substr(0, comma), line_no - 1, count));
      ++count;
      if (comma == std::string_view::npos) break;
      line.remove_prefix(comma + 1);
    }
    if (rows == 0) {
      cols = count;
    } else if (count != cols) {
      throw Error(Errc::parse, "ragged row " + std::to_string(line_no) + ": expected " +
                                   std::to_string(cols) + " columns, got " + std::to_string(count) +
                                   " (column " + std::to_string(std::min(count, cols) + 1) + ")");
    }
    ++rows;
  }
  if (rows == 0) throw Error(Errc::parse, "empty matrix");
  return DenseMatrix(rows, cols, std::move(data));
}

std::string format_matrix_csv(const DenseMatrix& m) {
  if (!m.all_finite()) throw Error(Errc::non_finite, "matrix contains non-finite values");
  std::string out;
  out.reserve(m.size() * 24);
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < m.rows(); ++i) {
    for (std::size_t j = 0; j < m.cols(); ++j) {
      if (j) out.push_back(',');
      auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), m(i, j),
                                     std::chars_format::general, 17);
      out.append(buf.data(), ptr);
    }
    out.push_back('\n');
  }
  return out;
}

DenseMatrix read_matrix_csv(const std::filesystem::path& path) {
  return parse_matrix_csv(read_file(path));
}

void write_matrix_csv(const DenseMatrix& m, const std::filesystem::path& path) {
  const std::string text = format_matrix_csv(m);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

DenseMatrix read_matrix_bin(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  constexpr std::size_t header = 4 + 1 + 8 + 8;
  if (bytes.size() < 5 || std::memcmp(bytes.data(), "GCAM", 4) != 0)
    throw Error(Errc::bad_magic, path.string() + " is not a GCAM file");
  if (static_cast<unsigned char>(bytes[4]) != 1)
    throw Error(Errc::bad_magic, "unsupported GCAM version " +
                                     std::to_string(static_cast<unsigned char>(bytes[4])));
  if (bytes.size() < header) throw Error(Errc::truncated, "header shorter than 21 bytes");
  std::uint64_t rows = 0, cols = 0;
  std::memcpy(&rows, bytes.data() + 5, 8);
  std::memcpy(&cols, bytes.data() + 13, 8);
  if (cols != 0 && rows > (bytes.size() / 8) / cols)
    throw Error(Errc::truncated, "payload shorter than " + std::to_string(rows) + "x" + std::to_string(cols));
  const std::size_t n = rows * cols;
  if (bytes.size() - header < n * 8)
    throw Error(Errc::truncated, "payload has " + std::to_string((bytes.size() - header) / 8) +
                                     " values, dims promise " + std::to_string(n));
  std::vector<double> data(n);
  std::memcpy(data.data(), bytes.data() + header, n * 8);
  DenseMatrix m(rows, cols, std::move(data));
  if (!m.all_finite()) throw Error(Errc::non_finite, path.string() + " contains non-finite values");
  return m;
}

void write_matrix_bin(const DenseMatrix& m, const std::filesystem::path& path) {
  if (!m.all_finite()) throw Error(Errc::non_finite, "matrix contains non-finite values");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for writing");
  const std::uint64_t rows = m.rows(), cols = m.cols();
  const char version = 1;
  out.write("GCAM", 4);
  out.write(&version, 1);
  out.write(reinterpret_cast<const char*>(&rows), 8);
  out.write(reinterpret_cast<const char*>(&cols), 8);
  out.write(reinterpret_cast<const char*>(m.data().data()), static_cast<std::streamsize>(m.size() * 8));
  if (!out) throw Error(Errc::io, "write failed for " + path.string());
}

static bool is_binary_path(const std::filesystem::path& path) {
  const auto ext = path.extension();
  return ext == ".gcam" || ext == ".bin";
}

DenseMatrix read_matrix(const std::filesystem::path& path) {
  return is_binary_path(path) ? read_matrix_bin(path) : read_matrix_csv(path);
}

void write_matrix(const DenseMatrix& m, const std::filesystem::path& path) {
  if (is_binary_path(path))
    write_matrix_bin(m, path);
  else
    write_matrix_csv(m, path);
}

Vector read_vector(const std::filesystem::path& path) {
  DenseMatrix m = read_matrix(path);
  if (m.rows() != 1 && m.cols() != 1)
    throw Error(Errc::dimension_mismatch, path.string() + " is not a vector");
  return m.data();
}

std::span<const std::string_view> metric_registry() {
  static constexpr std::array<std::string_view, 5> names = {
      "loss", "alignment", "uniformity", "marginal_error", "probe_accuracy"};
  return names;
}

void MetricsRecord::validate() const {
  if (step < 0) throw Error(Errc::invalid_argument, "negative step");
  const auto names = metric_registry();
  for (const auto& [name, value] : values) {
    if (std::find(names.begin(), names.end(), name) == names.end())
      throw Error(Errc::invalid_argument, "unknown metric '" + name + "'");
    if (!std::isfinite(value)) throw Error(Errc::non_finite, "metric '" + name + "' is not finite");
  }
}

std::string format_metrics_json(const MetricsRecord& record) {
  record.validate();
  nlohmann::json j = nlohmann::json::object();
  j["step"] = record.step;
  for (const auto& [name, value] : record.values) j[name] = value;
  return j.dump();
}

void append_metrics_jsonl(const MetricsRecord& record, const std::filesystem::path& path) {
  const std::string line = format_metrics_json(record);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw Error(Errc::io, "cannot open " + path.string() + " for append");
  out << line << '\n';
  if (!out) throw Error(Errc::io, "append failed for " + path.string());
}

}  // namespace gca
