#pragma once

#include <complex>
#include <cstddef>
#include <initializer_list>
#include <vector>

namespace ngmpn {

/// Small dense row-major matrix. Sized for next-generation matrices, which
/// rarely exceed a few dozen rows.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool square() const noexcept { return rows_ == cols_; }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  const std::vector<double>& data() const noexcept { return data_; }

  double norm1() const;    // max column sum
  double norm_inf() const; // max row sum
  bool finite() const;

  friend Matrix operator*(const Matrix& a, const Matrix& b);
  friend Matrix operator-(const Matrix& a);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// LU factorization with partial pivoting.
class LuDecomposition {
 public:
  explicit LuDecomposition(const Matrix& a);

  /// True when some pivot is below tol * ||A||_inf.
  bool singular(double rel_tol = 1e-14) const;
  std::vector<double> solve(std::vector<double> b) const;
  Matrix inverse() const;

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  double scale_ = 0.0;
  double min_pivot_ = 0.0;
};

struct InverseResult {
  Matrix inverse;
  double condition = 0.0;  // 1-norm condition number ||A||_1 ||A^-1||_1
};

/// Inverts `a` by pivoted elimination. Throws NumericError when a pivot
/// vanishes or the condition number exceeds `max_condition`.
InverseResult invert(const Matrix& a, double max_condition = 1e14);

/// Numerical rank by Gaussian elimination with complete pivoting; entries
/// below tol * max|a_ij| are treated as zero.
std::size_t numerical_rank(const Matrix& a, double rel_tol = 1e-10);

/// Row indices of a maximal linearly independent subset of the rows of `a`,
/// chosen greedily in row order.
std::vector<std::size_t> independent_rows(const Matrix& a, double rel_tol = 1e-10);

struct EigenResult {
  std::vector<std::complex<double>> values;
  bool converged = true;
  int iterations = 0;
};

/// All eigenvalues of a real square matrix: balancing, Hessenberg reduction,
/// then Francis double-shift QR. On non-convergence, `converged` is false and
/// `values` holds whatever deflated before the iteration cap.
EigenResult eigenvalues(const Matrix& a, double tol = 1e-12);

}  // namespace ngmpn
