#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace gca {

using Vector = std::vector<double>;

// Row-major dense matrix of doubles.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  DenseMatrix(std::initializer_list<std::initializer_list<double>> rows);

  static DenseMatrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

  DenseMatrix transpose() const;
  bool all_finite() const noexcept;

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

void require_same_shape(const DenseMatrix& a, const DenseMatrix& b, const char* what);
void require_square(const DenseMatrix& a, const char* what);

// A * B^T, the shape used for pairwise inner products of row batches.
DenseMatrix matmul_nt(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
// A^T * B
DenseMatrix matmul_tn(const DenseMatrix& a, const DenseMatrix& b);

Vector matvec(const DenseMatrix& a, std::span<const double> x);
// A^T x
Vector matvec_t(const DenseMatrix& a, std::span<const double> x);

Vector row_sums(const DenseMatrix& a);
Vector col_sums(const DenseMatrix& a);
double total(const DenseMatrix& a);

double max_abs_diff(const DenseMatrix& a, const DenseMatrix& b);
double l1_diff(const DenseMatrix& a, const DenseMatrix& b);
double max_abs(const DenseMatrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double sum(std::span<const double> a);
double max_abs_diff(std::span<const double> a, std::span<const double> b);

}  // namespace gca
