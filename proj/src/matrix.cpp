#include "ctxsel/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ctxsel {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ShapeError("matrix data length " + std::to_string(data_.size()) +
                     " does not match " + std::to_string(rows_) + "x" + std::to_string(cols_));
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_row(const Vector& v) { return Matrix(1, v.size(), v); }

Matrix Matrix::from_column(const Vector& v) { return Matrix(v.size(), 1, v); }

Vector Matrix::row(std::size_t i) const {
  return Vector(data_.begin() + static_cast<std::ptrdiff_t>(i * cols_),
                data_.begin() + static_cast<std::ptrdiff_t>((i + 1) * cols_));
}

void Matrix::set_row(std::size_t i, const Vector& v) {
  if (v.size() != cols_) throw ShapeError("set_row length mismatch");
  std::copy(v.begin(), v.end(), data_.begin() + static_cast<std::ptrdiff_t>(i * cols_));
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double x) { return std::isfinite(x); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul shape mismatch: " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " * " + std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      for (std::size_t j = 0; j < b.cols(); ++j) {
        c(i, j) += aik * b(k, j);
      }
    }
  }
  return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_nt inner dimension mismatch");
  }
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      c(i, j) = s;
    }
  }
  return c;
}

Matrix transpose(const Matrix& m) {
  Matrix t(m.cols(), m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) t(j, i) = m(i, j);
  return t;
}

Matrix add(const Matrix& a, const Matrix& b) {
  if (!a.same_shape(b)) throw ShapeError("add shape mismatch");
  Matrix c = a;
  for (std::size_t i = 0; i < c.size(); ++i) c.storage()[i] += b.storage()[i];
  return c;
}

Matrix add_rowvec(const Matrix& m, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != m.cols()) throw ShapeError("add_rowvec shape mismatch");
  Matrix c = m;
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) c(i, j) += row(0, j);
  return c;
}

Matrix scale(const Matrix& m, double s) {
  Matrix c = m;
  for (double& x : c.storage()) x *= s;
  return c;
}

Vector softmax(const Vector& v) {
  if (v.empty()) throw DomainError("softmax of empty vector");
  for (double x : v) {
    if (!std::isfinite(x)) throw DomainError("softmax input not finite");
  }
  const double m = *std::max_element(v.begin(), v.end());
  Vector out(v.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::exp(v[i] - m);
    sum += out[i];
  }
  for (double& x : out) x /= sum;
  return out;
}

double logsumexp(const Vector& v) {
  if (v.empty()) throw DomainError("logsumexp of empty vector");
  const double m = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double x : v) sum += std::exp(x - m);
  return m + std::log(sum);
}

Matrix softmax_rows(const Matrix& m) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i) out.set_row(i, softmax(m.row(i)));
  return out;
}

double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) throw ShapeError("dot length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

double cosine(const Vector& a, const Vector& b) {
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw DegenerateVectorError("cosine of zero-norm vector");
  return dot(a, b) / (na * nb);
}

Matrix attention(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t dim) {
  if (k.rows() == 0) throw EmptyContextError("attention over zero context tokens");
  if (q.cols() != dim || k.cols() != dim) throw ShapeError("attention query/key width != dim");
  if (k.rows() != v.rows()) throw ShapeError("attention key/value row mismatch");
  const Matrix logits = scale(matmul_nt(q, k), 1.0 / std::sqrt(static_cast<double>(dim)));
  return matmul(softmax_rows(logits), v);
}

}  // namespace ctxsel
