#include "gca/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "gca/error.hpp"

namespace gca {

const char* errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::io: return "io-error";
    case Errc::parse: return "parse-error";
    case Errc::non_finite: return "non-finite";
    case Errc::bad_magic: return "bad-magic";
    case Errc::truncated: return "truncated";
    case Errc::zero_row: return "zero-row";
    case Errc::dimension_mismatch: return "dimension-mismatch";
    case Errc::invalid_argument: return "invalid-argument";
    case Errc::non_positive: return "non-positive";
    case Errc::overflow: return "overflow";
    case Errc::support_violation: return "support-violation";
    case Errc::empty_class: return "empty-class";
    case Errc::stale_cache: return "stale-cache";
    case Errc::degenerate_split: return "degenerate-split";
    case Errc::non_finite_loss: return "non-finite-loss";
  }
  return "unknown";
}

Error::Error(Errc code, const std::string& what)
    : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw Error(Errc::dimension_mismatch,
                "data length " + std::to_string(data_.size()) + " != " + std::to_string(rows) +
                    "x" + std::to_string(cols));
  }
}

DenseMatrix::DenseMatrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error(Errc::dimension_mismatch, "ragged initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::transpose() const {
  DenseMatrix t(cols_, rows_);
  for (std::size_t i = 0; i < rows_; ++i)
    for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
  return t;
}

bool DenseMatrix::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

static std::string shape(const DenseMatrix& a) {
  return std::to_string(a.rows()) + "x" + std::to_string(a.cols());
}

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw Error(Errc::dimension_mismatch, std::string(what) + ": " + shape(a) + " vs " + shape(b));
}

void require_square(const DenseMatrix& a, const char* what) {
  if (a.rows() != a.cols())
    throw Error(Errc::dimension_mismatch, std::string(what) + " must be square, got " + shape(a));
}

DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.cols()) throw Error(Errc::dimension_mismatch, "matmul_nt " + shape(a) + " " + shape(b));
  DenseMatrix c(a.rows(), b.rows());
  const std::size_t d = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data().data() + i * d;
    double* ci = c.data().data() + i * b.rows();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* bj = b.data().data() + j * d;
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += ai[k] * bj[k];
      ci[j] = s;
    }
  }
  return c;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.cols() != b.rows()) throw Error(Errc::dimension_mismatch, "matmul " + shape(a) + " " + shape(b));
  DenseMatrix c(a.rows(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* ci = c.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      const double* bk = b.data().data() + k * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
  }
  return c;
}

DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b) {
  if (a.rows() != b.rows()) throw Error(Errc::dimension_mismatch, "matmul_tn " + shape(a) + " " + shape(b));
  DenseMatrix c(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t k = 0; k < a.rows(); ++k) {
    const double* bk = b.data().data() + k * n;
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double aki = a(k, i);
      if (aki == 0.0) continue;
      double* ci = c.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
  }
  return c;
}

Vector matvec(const DenseMatrix& a, std::span<const double> x) {
  if (a.cols() != x.size()) throw Error(Errc::dimension_mismatch, "matvec");
  Vector y(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data().data() + i * a.cols();
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += ai[j] * x[j];
    y[i] = s;
  }
  return y;
}

Vector matvec_t(const DenseMatrix& a, std::span<const double> x) {
  if (a.rows() != x.size()) throw Error(Errc::dimension_mismatch, "matvec_t");
  Vector y(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* ai = a.data().data() + i * a.cols();
    const double xi = x[i];
    for (std::size_t j = 0; j < a.cols(); ++j) y[j] += ai[j] * xi;
  }
  return y;
}

Vector row_sums(const DenseMatrix& a) {
  Vector s(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) s[i] = sum(a.row(i));
  return s;
}

Vector col_sums(const DenseMatrix& a) {
  Vector s(a.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) s[j] += a(i, j);
  return s;
}

double total(const DenseMatrix& a) { return sum(a.data()); }

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "max_abs_diff");
  return max_abs_diff(std::span<const double>(a.data()), std::span<const double>(b.data()));
}

double l1_diff(const DenseMatrix& a, const DenseMatrix& b) {
  require_same_shape(a, b, "l1_diff");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += std::abs(a.data()[k] - b.data()[k]);
  return s;
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double x : a.data()) m = std::max(m, std::abs(x));
  return m;
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "dot");
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

double sum(std::span<const double> a) { return std::accumulate(a.begin(), a.end(), 0.0); }

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw Error(Errc::dimension_mismatch, "max_abs_diff");
  double m = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) m = std::max(m, std::abs(a[k] - b[k]));
  return m;
}

}  // namespace gca
