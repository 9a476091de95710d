#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ctxsel/errors.hpp"

namespace ctxsel {

using Vector = std::vector<double>;

// Dense row-major matrix of 64-bit reals. Everything in the engine is small
// enough that plain loops over contiguous storage are all we need.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_row(const Vector& v);     // 1 x n
  static Matrix from_column(const Vector& v);  // n x 1

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& storage() { return data_; }
  const std::vector<double>& storage() const { return data_; }

  Vector row(std::size_t i) const;
  void set_row(std::size_t i, const Vector& v);

  bool all_finite() const;
  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool operator==(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_ && data_ == other.data_;
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& m);
Matrix add(const Matrix& a, const Matrix& b);
// Adds a 1 x cols row vector to every row of m.
Matrix add_rowvec(const Matrix& m, const Matrix& row);
Matrix scale(const Matrix& m, double s);

// Max-shifted softmax; entries positive and summing to one.
Vector softmax(const Vector& v);
// Max-shifted log(sum(exp(v))).
double logsumexp(const Vector& v);
// Applies softmax independently to every row.
Matrix softmax_rows(const Matrix& m);

double dot(const Vector& a, const Vector& b);
double norm(const Vector& v);
// a.b / (|a| |b|); throws DegenerateVectorError on a zero-norm input.
double cosine(const Vector& a, const Vector& b);

// Softmax(q k^T / sqrt(dim)) v. Requires q.cols == k.cols == dim and
// k.rows == v.rows; zero key rows is an empty-context error.
Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t dim);

}  // namespace ctxsel
