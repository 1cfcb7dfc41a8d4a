#include "aesl/matrix.hpp"

#include <cmath>
#include <utility>

#include "aesl/error.hpp"
#include "aesl/kernels.hpp"

namespace aesl {

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), data_(std::move(values)) {
  if (data_.size() != rows * cols)
    throw ShapeError("Matrix: " + std::to_string(data_.size()) + " values for shape " +
                     std::to_string(rows) + "x" + std::to_string(cols));
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ == 0 ? 0 : rows.begin()->size();
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("Matrix: ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::column(std::span<const double> values) {
  return Matrix(values.size(), 1, std::vector<double>(values.begin(), values.end()));
}

Matrix Matrix::row(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
  return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> idx) const {
  Matrix out(idx.size(), cols_);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= rows_) throw ShapeError("select_rows: index out of range");
    auto src = row_span(idx[i]);
    std::copy(src.begin(), src.end(), out.row_span(i).begin());
  }
  return out;
}

Matrix Matrix::col_block(std::size_t begin, std::size_t count) const {
  if (begin + count > cols_) throw ShapeError("col_block: range exceeds " + shape_string());
  Matrix out(rows_, count);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = (*this)(r, begin + c);
  return out;
}

void Matrix::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

bool Matrix::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows())
    throw ShapeError("matmul: " + a.shape_string() + " x " + b.shape_string());
  Matrix c(a.rows(), b.cols());
  kernels::gemm(a.values().data(), b.values().data(), c.values().data(),
                {a.rows(), a.cols(), b.cols()});
  return c;
}

namespace {
void require_same(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(op) + ": " + a.shape_string() + " vs " + b.shape_string());
}
}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
  require_same(a, b, "add");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] += bv[i];
  return c;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  require_same(a, b, "sub");
  Matrix c = a;
  auto cv = c.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] -= bv[i];
  return c;
}

Matrix operator*(double s, const Matrix& a) {
  Matrix c = a;
  for (double& v : c.values()) v *= s;
  return c;
}

Matrix hconcat(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.rows() != b.rows())
    throw ShapeError("hconcat: " + a.shape_string() + " | " + b.shape_string());
  Matrix out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(r, c) = a(r, c);
    for (std::size_t c = 0; c < b.cols(); ++c) out(r, a.cols() + c) = b(r, c);
  }
  return out;
}

Matrix vconcat(const Matrix& a, const Matrix& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  if (a.cols() != b.cols())
    throw ShapeError("vconcat: " + a.shape_string() + " ; " + b.shape_string());
  std::vector<double> v(a.values().begin(), a.values().end());
  v.insert(v.end(), b.values().begin(), b.values().end());
  return Matrix(a.rows() + b.rows(), a.cols(), std::move(v));
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  require_same(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

Matrix solve(Matrix a, Matrix b) {
  const std::size_t n = a.rows();
  if (a.cols() != n || b.rows() != n)
    throw ShapeError("solve: " + a.shape_string() + " \\ " + b.shape_string());
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a(r, col)) > std::abs(a(piv, col))) piv = r;
    if (a(piv, col) == 0.0) throw DomainError("solve: singular matrix");
    if (piv != col) {
      for (std::size_t c = 0; c < n; ++c) std::swap(a(col, c), a(piv, c));
      for (std::size_t c = 0; c < b.cols(); ++c) std::swap(b(col, c), b(piv, c));
    }
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a(r, col) / a(col, col);
      if (f == 0.0) continue;
      for (std::size_t c = col; c < n; ++c) a(r, c) -= f * a(col, c);
      for (std::size_t c = 0; c < b.cols(); ++c) b(r, c) -= f * b(col, c);
    }
  }
  Matrix x(n, b.cols());
  for (std::size_t rr = n; rr-- > 0;) {
    for (std::size_t c = 0; c < b.cols(); ++c) {
      double acc = b(rr, c);
      for (std::size_t k = rr + 1; k < n; ++k) acc -= a(rr, k) * x(k, c);
      x(rr, c) = acc / a(rr, rr);
    }
  }
  return x;
}

}  // namespace aesl
