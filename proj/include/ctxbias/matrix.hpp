#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace ctxbias {

// Dense row-major matrix of doubles.
//
// Activations follow the batch-as-rows convention: a batch of n samples with
// d features is an n x d matrix. Layer weights are stored out x in, so a dense
// layer computes X * A^T for a batch X.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }

  // Bounds-checked access.
  double at(std::size_t r, std::size_t c) const;

  std::span<double> row(std::size_t r) noexcept { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const noexcept {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  double* data() noexcept { return data_.data(); }
  const double* data() const noexcept { return data_.data(); }

  std::string shape_string() const;

  bool all_finite() const noexcept;

  // Exact element-wise equality, shapes included.
  friend bool operator==(const Matrix& a, const Matrix& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materialising the transpose.
Matrix matmul_transposed_b(const Matrix& a, const Matrix& b);
// a^T * b without materialising the transpose.
Matrix matmul_transposed_a(const Matrix& a, const Matrix& b);

// Adds the 1 x m.cols() row vector v to every row of m.
Matrix add_broadcast_row(const Matrix& m, const Matrix& v);

Matrix transpose(const Matrix& m);
Matrix scale(const Matrix& m, double c);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);

// Column j as a rows x 1 matrix.
Matrix col_select(const Matrix& m, std::size_t j);
// Rows picked by index, in the given order.
Matrix row_select(const Matrix& m, std::span<const std::size_t> indices);

// Sum over rows, returned as 1 x cols.
Matrix column_sums(const Matrix& m);

// Largest absolute element-wise difference; shapes must agree.
double max_abs_diff(const Matrix& a, const Matrix& b);

void require_same_shape(const Matrix& a, const Matrix& b, const char* op);

}  // namespace ctxbias
