#include "ngmpn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ngmpn/error.hpp"

namespace ngmpn {

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows) {
  rows_ = rows.size();
  cols_ = rows_ ? rows.begin()->size() : 0;
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw Error("ragged matrix initializer");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

double Matrix::norm1() const {
  double best = 0.0;
  for (std::size_t c = 0; c < cols_; ++c) {
    double s = 0.0;
    for (std::size_t r = 0; r < rows_; ++r) s += std::abs((*this)(r, c));
    best = std::max(best, s);
  }
  return best;
}

double Matrix::norm_inf() const {
  double best = 0.0;
  for (std::size_t r = 0; r < rows_; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) s += std::abs((*this)(r, c));
    best = std::max(best, s);
  }
  return best;
}

bool Matrix::finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw Error("matrix dimension mismatch");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  return out;
}

Matrix operator-(const Matrix& a) {
  Matrix out = a;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(i, j) = -a(i, j);
  return out;
}

// ---------------------------------------------------------------------------

LuDecomposition::LuDecomposition(const Matrix& a) : lu_(a), perm_(a.rows()) {
  if (!a.square()) throw Error("LU of a non-square matrix");
  const std::size_t n = a.rows();
  std::iota(perm_.begin(), perm_.end(), 0);
  scale_ = a.norm_inf();
  min_pivot_ = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t p = k;
    for (std::size_t r = k + 1; r < n; ++r)
      if (std::abs(lu_(r, k)) > std::abs(lu_(p, k))) p = r;
    if (p != k) {
      for (std::size_t c = 0; c < n; ++c) std::swap(lu_(k, c), lu_(p, c));
      std::swap(perm_[k], perm_[p]);
    }
    double pivot = lu_(k, k);
    min_pivot_ = std::min(min_pivot_, std::abs(pivot));
    if (pivot == 0.0) continue;
    for (std::size_t r = k + 1; r < n; ++r) {
      double f = lu_(r, k) / pivot;
      lu_(r, k) = f;
      if (f == 0.0) continue;
      for (std::size_t c = k + 1; c < n; ++c) lu_(r, c) -= f * lu_(k, c);
    }
  }
  if (n == 0) min_pivot_ = 0.0;
}

bool LuDecomposition::singular(double rel_tol) const {
  return lu_.rows() == 0 || min_pivot_ <= rel_tol * scale_ || min_pivot_ == 0.0;
}

std::vector<double> LuDecomposition::solve(std::vector<double> b) const {
  const std::size_t n = lu_.rows();
  if (b.size() != n) throw Error("right-hand side has wrong length");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = b[perm_[i]];
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < i; ++k) x[i] -= lu_(i, k) * x[k];
  for (std::size_t i = n; i-- > 0;) {
    for (std::size_t k = i + 1; k < n; ++k) x[i] -= lu_(i, k) * x[k];
    if (lu_(i, i) == 0.0) throw NumericError("singular matrix");
    x[i] /= lu_(i, i);
  }
  return x;
}

Matrix LuDecomposition::inverse() const {
  const std::size_t n = lu_.rows();
  Matrix inv(n, n);
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0);
    e[c] = 1.0;
    auto col = solve(std::move(e));
    for (std::size_t r = 0; r < n; ++r) inv(r, c) = col[r];
  }
  return inv;
}

InverseResult invert(const Matrix& a, double max_condition) {
  if (!a.square()) throw NumericError("cannot invert a non-square matrix");
  if (!a.finite()) throw NumericError("matrix has non-finite entries");
  LuDecomposition lu(a);
  if (lu.singular(0.0)) throw NumericError("matrix is singular");
  InverseResult out{lu.inverse(), 0.0};
  out.condition = a.norm1() * out.inverse.norm1();
  if (!std::isfinite(out.condition) || out.condition > max_condition)
    throw NumericError("matrix is numerically singular (condition " + std::to_string(out.condition) + ")");
  return out;
}

std::size_t numerical_rank(const Matrix& a, double rel_tol) {
  Matrix m = a;
  const std::size_t rows = m.rows(), cols = m.cols();
  double biggest = 0.0;
  for (double v : m.data()) biggest = std::max(biggest, std::abs(v));
  if (biggest == 0.0) return 0;
  const double tol = rel_tol * biggest;
  std::size_t rank = 0;
  std::vector<bool> row_used(rows, false), col_used(cols, false);
  for (;;) {
    double best = 0.0;
    std::size_t br = 0, bc = 0;
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_used[r]) continue;
      for (std::size_t c = 0; c < cols; ++c) {
        if (col_used[c]) continue;
        if (std::abs(m(r, c)) > best) {
          best = std::abs(m(r, c));
          br = r;
          bc = c;
        }
      }
    }
    if (best <= tol) break;
    row_used[br] = col_used[bc] = true;
    ++rank;
    for (std::size_t r = 0; r < rows; ++r) {
      if (row_used[r]) continue;
      double f = m(r, bc) / m(br, bc);
      for (std::size_t c = 0; c < cols; ++c) m(r, c) -= f * m(br, c);
    }
  }
  return rank;
}

std::vector<std::size_t> independent_rows(const Matrix& a, double rel_tol) {
  std::vector<std::size_t> keep;
  std::size_t rank = 0;
  for (std::size_t r = 0; r < a.rows(); ++r) {
    Matrix trial(keep.size() + 1, a.cols());
    for (std::size_t i = 0; i < keep.size(); ++i)
      for (std::size_t c = 0; c < a.cols(); ++c) trial(i, c) = a(keep[i], c);
    for (std::size_t c = 0; c < a.cols(); ++c) trial(keep.size(), c) = a(r, c);
    std::size_t next = numerical_rank(trial, rel_tol);
    if (next > rank) {
      keep.push_back(r);
      rank = next;
    }
  }
  return keep;
}

// ---------------------------------------------------------------------------
// Eigenvalues

namespace {

// Parlett-Reinsch balancing by powers of two; eigenvalues are unchanged.
void balance(Matrix& a) {
  const std::size_t n = a.rows();
  constexpr double radix = 2.0;
  bool done = false;
  while (!done) {
    done = true;
    for (std::size_t i = 0; i < n; ++i) {
      double r = 0.0, c = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        c += std::abs(a(j, i));
        r += std::abs(a(i, j));
      }
      if (c == 0.0 || r == 0.0) continue;
      double g = r / radix, f = 1.0, s = c + r;
      while (c < g) {
        f *= radix;
        c *= radix * radix;
      }
      g = r * radix;
      while (c > g) {
        f /= radix;
        c /= radix * radix;
      }
      if ((c + r) / f < 0.95 * s) {
        done = false;
        for (std::size_t j = 0; j < n; ++j) a(i, j) /= f;
        for (std::size_t j = 0; j < n; ++j) a(j, i) *= f;
      }
    }
  }
}

// Reduction to upper Hessenberg form by stabilized elementary similarity
// transformations.
void to_hessenberg(Matrix& a) {
  const std::size_t n = a.rows();
  for (std::size_t m = 1; m + 1 < n; ++m) {
    double x = 0.0;
    std::size_t i = m;
    for (std::size_t j = m; j < n; ++j) {
      if (std::abs(a(j, m - 1)) > std::abs(x)) {
        x = a(j, m - 1);
        i = j;
      }
    }
    if (i != m) {
      for (std::size_t j = m - 1; j < n; ++j) std::swap(a(i, j), a(m, j));
      for (std::size_t j = 0; j < n; ++j) std::swap(a(j, i), a(j, m));
    }
    if (x == 0.0) continue;
    for (i = m + 1; i < n; ++i) {
      double y = a(i, m - 1);
      if (y == 0.0) continue;
      y /= x;
      a(i, m - 1) = y;
      for (std::size_t j = m; j < n; ++j) a(i, j) -= y * a(m, j);
      for (std::size_t j = 0; j < n; ++j) a(j, m) += y * a(j, i);
    }
  }
  for (std::size_t i = 2; i < n; ++i)
    for (std::size_t j = 0; j + 1 < i; ++j) a(i, j) = 0.0;
}

}  // namespace

EigenResult eigenvalues(const Matrix& input, double tol) {
  if (!input.square()) throw NumericError("eigenvalues of a non-square matrix");
  if (!input.finite()) throw NumericError("matrix has non-finite entries");
  const int n = static_cast<int>(input.rows());
  EigenResult out;
  if (n == 0) return out;
  Matrix a = input;
  balance(a);
  to_hessenberg(a);

  const int max_iterations = std::max(30, 100 * n * n);
  std::vector<std::complex<double>> found;
  double anorm = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = std::max(i - 1, 0); j < n; ++j) anorm += std::abs(a(i, j));

  int nn = n - 1;
  double t = 0.0;  // accumulated exceptional shift
  int its = 0;
  while (nn >= 0) {
    int l = 0;
    for (;;) {
      // Find a negligible subdiagonal element to split the matrix.
      for (l = nn; l >= 1; --l) {
        double s = std::abs(a(l - 1, l - 1)) + std::abs(a(l, l));
        if (s == 0.0) s = anorm;
        if (std::abs(a(l, l - 1)) <= tol * s) {
          a(l, l - 1) = 0.0;
          break;
        }
      }
      double x = a(nn, nn);
      if (l == nn) {
        found.emplace_back(x + t, 0.0);
        --nn;
        its = 0;
        break;
      }
      double y = a(nn - 1, nn - 1);
      double w = a(nn, nn - 1) * a(nn - 1, nn);
      if (l == nn - 1) {
        double p = 0.5 * (y - x);
        double q = p * p + w;
        double z = std::sqrt(std::abs(q));
        x += t;
        if (q >= 0.0) {
          z = p + std::copysign(z, p);
          double r1 = x + z;
          double r2 = z != 0.0 ? x - w / z : x + z;
          found.emplace_back(r1, 0.0);
          found.emplace_back(r2, 0.0);
        } else {
          found.emplace_back(x + p, z);
          found.emplace_back(x + p, -z);
        }
        nn -= 2;
        its = 0;
        break;
      }
      if (out.iterations >= max_iterations) {
        out.converged = false;
        out.values = std::move(found);
        return out;
      }
      if (its == 10 || its == 20) {
        // Exceptional shift.
        t += x;
        for (int i = 0; i <= nn; ++i) a(i, i) -= x;
        double s = std::abs(a(nn, nn - 1)) + std::abs(a(nn - 1, nn - 2));
        y = x = 0.75 * s;
        w = -0.4375 * s * s;
      }
      ++its;
      ++out.iterations;
      int m = nn - 2;
      double p = 0.0, q = 0.0, r = 0.0, z = 0.0;
      for (; m >= l; --m) {
        z = a(m, m);
        double rr = x - z;
        double ss = y - z;
        p = (rr * ss - w) / a(m + 1, m) + a(m, m + 1);
        q = a(m + 1, m + 1) - z - rr - ss;
        r = a(m + 2, m + 1);
        double s = std::abs(p) + std::abs(q) + std::abs(r);
        p /= s;
        q /= s;
        r /= s;
        if (m == l) break;
        double u = std::abs(a(m, m - 1)) * (std::abs(q) + std::abs(r));
        double v = std::abs(p) * (std::abs(a(m - 1, m - 1)) + std::abs(z) + std::abs(a(m + 1, m + 1)));
        if (u + v == v) break;
      }
      for (int i = m; i < nn - 1; ++i) {
        a(i + 2, i) = 0.0;
        if (i != m) a(i + 2, i - 1) = 0.0;
      }
      // Double-shift QR sweep on rows/columns l..nn.
      for (int k = m; k < nn; ++k) {
        if (k != m) {
          p = a(k, k - 1);
          q = a(k + 1, k - 1);
          r = k + 1 != nn ? a(k + 2, k - 1) : 0.0;
          x = std::abs(p) + std::abs(q) + std::abs(r);
          if (x == 0.0) continue;
          p /= x;
          q /= x;
          r /= x;
        }
        double s = std::copysign(std::sqrt(p * p + q * q + r * r), p);
        if (s == 0.0) continue;
        if (k == m) {
          if (l != m) a(k, k - 1) = -a(k, k - 1);
        } else {
          a(k, k - 1) = -s * x;
        }
        p += s;
        x = p / s;
        y = q / s;
        z = r / s;
        q /= p;
        r /= p;
        for (int j = k; j <= nn; ++j) {
          p = a(k, j) + q * a(k + 1, j);
          if (k + 1 != nn) {
            p += r * a(k + 2, j);
            a(k + 2, j) -= p * z;
          }
          a(k + 1, j) -= p * y;
          a(k, j) -= p * x;
        }
        int mmin = nn < k + 3 ? nn : k + 3;
        for (int i = l; i <= mmin; ++i) {
          p = x * a(i, k) + y * a(i, k + 1);
          if (k + 1 != nn) {
            p += z * a(i, k + 2);
            a(i, k + 2) -= p * r;
          }
          a(i, k + 1) -= p * q;
          a(i, k) -= p;
        }
      }
    }
  }
  out.values = std::move(found);
  return out;
}

}  // namespace ngmpn
