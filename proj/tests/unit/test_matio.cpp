#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>

#include "gca/error.hpp"
#include "gca/matio.hpp"
#include "test_util.hpp"

using namespace gca;
using gca::testing::TempDir;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const std::filesystem::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary);
  out << s;
}

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected gca::Error";
  return Errc::io;
}

}  // namespace

TEST(MatioCsv, ParsesRectangular) {
  const DenseMatrix m = parse_matrix_csv("1,2\n3,4");
  EXPECT_EQ(m, (DenseMatrix{{1, 2}, {3, 4}}));
}

TEST(MatioCsv, RaggedRowReportsRow) {
  try {
    parse_matrix_csv("1,2\n3");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse);
    EXPECT_NE(std::string(e.what()).find("row 2"), std::string::npos) << e.what();
  }
}

TEST(MatioCsv, RejectsNan) { EXPECT_EQ(code_of([] { parse_matrix_csv("1,nan"); }), Errc::non_finite); }

TEST(MatioCsv, RejectsInfAndGarbage) {
  EXPECT_EQ(code_of([] { parse_matrix_csv("inf,1"); }), Errc::non_finite);
  try {
    parse_matrix_csv("1,2\n3,x");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::parse);
    EXPECT_NE(std::string(e.what()).find("row 2, column 2"), std::string::npos) << e.what();
  }
}

TEST(MatioCsv, MissingFileIsIoError) {
  EXPECT_EQ(code_of([] { read_matrix_csv("/nonexistent/dir/m.csv"); }), Errc::io);
}

TEST(MatioCsv, WritesExactText) {
  TempDir dir;
  write_matrix_csv(DenseMatrix{{0}}, dir / "a.csv");
  EXPECT_EQ(slurp(dir / "a.csv"), "0\n");
  write_matrix_csv(DenseMatrix::identity(2), dir / "b.csv");
  EXPECT_EQ(slurp(dir / "b.csv"), "1,0\n0,1\n");
}

TEST(MatioCsv, RandomRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(7);
  DenseMatrix m = gca::testing::gaussian(8, 8, rng, 1e3);
  m(0, 0) = 1e-300;
  m(1, 1) = -2.5e17;
  write_matrix_csv(m, dir / "r.csv");
  const DenseMatrix back = read_matrix_csv(dir / "r.csv");
  ASSERT_EQ(back.rows(), 8u);
  for (std::size_t n = 0; n < m.size(); ++n)
    EXPECT_LE(std::abs(back.data()[n] - m.data()[n]), 1e-15 * std::abs(m.data()[n]));
}

TEST(MatioCsv, RefusesToWriteNonFinite) {
  TempDir dir;
  DenseMatrix m{{1, NAN}};
  EXPECT_EQ(code_of([&] { write_matrix_csv(m, dir / "x.csv"); }), Errc::non_finite);
}

TEST(MatioBin, BitExactRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(11);
  const DenseMatrix m = gca::testing::gaussian(3, 3, rng);
  write_matrix_bin(m, dir / "m.gcam");
  EXPECT_EQ(read_matrix_bin(dir / "m.gcam"), m);
  EXPECT_EQ(slurp(dir / "m.gcam").size(), 4u + 1 + 16 + 72);
  EXPECT_EQ(slurp(dir / "m.gcam").substr(0, 5), std::string("GCAM\x01", 5));
}

TEST(MatioBin, BadMagic) {
  TempDir dir;
  spit(dir / "m.gcam", std::string("GCAX\x01", 5) + std::string(16, '\0'));
  EXPECT_EQ(code_of([&] { read_matrix_bin(dir / "m.gcam"); }), Errc::bad_magic);
}

TEST(MatioBin, TruncatedPayload) {
  TempDir dir;
  write_matrix_bin(DenseMatrix(2, 2, 1.0), dir / "m.gcam");
  std::string bytes = slurp(dir / "m.gcam");
  bytes.resize(bytes.size() - 8);
  spit(dir / "m.gcam", bytes);
  EXPECT_EQ(code_of([&] { read_matrix_bin(dir / "m.gcam"); }), Errc::truncated);
}

TEST(MatioBin, DispatchByExtension) {
  TempDir dir;
  const DenseMatrix m{{1.5, -2}};
  write_matrix(m, dir / "m.bin");
  write_matrix(m, dir / "m.csv");
  EXPECT_EQ(read_matrix(dir / "m.bin"), m);
  EXPECT_EQ(read_matrix(dir / "m.csv"), m);
  EXPECT_EQ(slurp(dir / "m.bin").substr(0, 4), "GCAM");
}

TEST(MatioMetrics, SortedKeys) {
  MetricsRecord r;
  r.step = 0;
  r.values["loss"] = 1.5;
  EXPECT_EQ(format_metrics_json(r), R"({"loss":1.5,"step":0})");
}

TEST(MatioMetrics, AppendsInOrder) {
  TempDir dir;
  MetricsRecord a{0, {{"loss", 1.5}}};
  MetricsRecord b{1, {{"loss", 1.25}, {"alignment", 0.5}}};
  append_metrics_jsonl(a, dir / "m.jsonl");
  append_metrics_jsonl(b, dir / "m.jsonl");
  EXPECT_EQ(slurp(dir / "m.jsonl"), "{\"loss\":1.5,\"step\":0}\n{\"alignment\":0.5,\"loss\":1.25,\"step\":1}\n");
}

TEST(MatioMetrics, RejectsNonFiniteBeforeWriting) {
  TempDir dir;
  MetricsRecord r{0, {{"loss", INFINITY}}};
  EXPECT_EQ(code_of([&] { append_metrics_jsonl(r, dir / "m.jsonl"); }), Errc::non_finite);
  EXPECT_FALSE(std::filesystem::exists(dir / "m.jsonl"));
}

TEST(MatioMetrics, RejectsUnknownName) {
  MetricsRecord r{0, {{"accuracy", 1.0}}};
  EXPECT_EQ(code_of([&] { r.validate(); }), Errc::invalid_argument);
}
