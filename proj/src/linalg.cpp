#include "dirsel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace dirsel {

namespace {

void require_square(const Matrix& a, const char* op) {
  if (a.rows() != a.cols()) {
    throw ShapeError(std::string(op) + ": matrix is " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + ", expected square");
  }
}

void require_symmetric(const Matrix& a, const char* op) {
  const double tol = 1e-12 * std::max(1.0, max_abs(a));
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = i + 1; j < a.cols(); ++j)
      if (std::fabs(a(i, j) - a(j, i)) > tol) {
        throw ShapeError(std::string(op) + ": matrix not symmetric at (" + std::to_string(i) +
                         "," + std::to_string(j) + ")");
      }
}

void require_nonzero_diag(const Matrix& l, const char* op) {
  for (std::size_t i = 0; i < l.rows(); ++i)
    if (l(i, i) == 0.0) {
      throw NumericError(std::string(op) + ": singular factor, zero diagonal at " +
                         std::to_string(i));
    }
}

}  // namespace

CholeskyFactor cholesky(const Matrix& a) {
  require_square(a, "cholesky");
  require_symmetric(a, "cholesky");
  const std::size_t n = a.rows();
  Matrix l(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (d <= 0.0 || !std::isfinite(d)) {
      throw NumericError("cholesky: matrix not positive definite at pivot " + std::to_string(j));
    }
    l(j, j) = std::sqrt(d);
    const double inv = 1.0 / l(j, j);
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s * inv;
    }
  }
  return CholeskyFactor{std::move(l)};
}

SymEig jacobi_eigh(const Matrix& a_in) {
  require_square(a_in, "jacobi_eigh");
  require_symmetric(a_in, "jacobi_eigh");
  const std::size_t n = a_in.rows();
  Matrix a = a_in;
  Matrix v = Matrix::identity(n);

  auto off_norm = [&]() {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) s += 2.0 * a(i, j) * a(i, j);
    return std::sqrt(s);
  };

  // Machine-level threshold: downstream uses amplify the residual A - V diag Vt
  // by inverse factors, so stopping early is not safe.
  const double tol = 1e-14 * std::max(1.0, frobenius_norm(a_in));
  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        // tan of the smaller rotation angle; stable form of t = sgn/ (|θ|+√(θ²+1))
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        // rows/cols p and q of a
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = v(k, p);
          const double vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  SymEig out;
  out.values.resize(n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = a(i, i);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return diag[x] < diag[y]; });
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = diag[order[j]];
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
  }
  return out;
}

Matrix solve_lower(const Matrix& l, const Matrix& b) {
  require_square(l, "solve_lower");
  if (l.rows() != b.rows()) throw ShapeError("solve_lower: row count mismatch");
  require_nonzero_diag(l, "solve_lower");
  const std::size_t n = l.rows();
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      double s = x(i, c);
      for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * x(k, c);
      x(i, c) = s / l(i, i);
    }
  }
  return x;
}

Matrix solve_lower_transposed(const Matrix& l, const Matrix& b) {
  require_square(l, "solve_lower_transposed");
  if (l.rows() != b.rows()) throw ShapeError("solve_lower_transposed: row count mismatch");
  require_nonzero_diag(l, "solve_lower_transposed");
  const std::size_t n = l.rows();
  Matrix x = b;
  for (std::size_t c = 0; c < b.cols(); ++c) {
    for (std::size_t ii = n; ii-- > 0;) {
      double s = x(ii, c);
      for (std::size_t k = ii + 1; k < n; ++k) s -= l(k, ii) * x(k, c);
      x(ii, c) = s / l(ii, ii);
    }
  }
  return x;
}

Matrix solve_right_lower(const Matrix& b, const Matrix& l) {
  require_square(l, "solve_right_lower");
  if (b.cols() != l.rows()) throw ShapeError("solve_right_lower: column count mismatch");
  require_nonzero_diag(l, "solve_right_lower");
  const std::size_t n = l.rows();
  Matrix x = b;
  // X L = B: back substitution along each row, high column first.
  for (std::size_t r = 0; r < b.rows(); ++r) {
    double* xr = x.row_ptr(r);
    for (std::size_t jj = n; jj-- > 0;) {
      double s = xr[jj];
      for (std::size_t k = jj + 1; k < n; ++k) s -= xr[k] * l(k, jj);
      xr[jj] = s / l(jj, jj);
    }
  }
  return x;
}

Matrix solve_right_lower_transposed(const Matrix& b, const Matrix& l) {
  require_square(l, "solve_right_lower_transposed");
  if (b.cols() != l.rows()) throw ShapeError("solve_right_lower_transposed: column count mismatch");
  require_nonzero_diag(l, "solve_right_lower_transposed");
  const std::size_t n = l.rows();
  Matrix x = b;
  // X L^T = B: forward substitution along each row.
  for (std::size_t r = 0; r < b.rows(); ++r) {
    double* xr = x.row_ptr(r);
    for (std::size_t j = 0; j < n; ++j) {
      double s = xr[j];
      const double* lj = l.row_ptr(j);
      for (std::size_t k = 0; k < j; ++k) s -= xr[k] * lj[k];
      xr[j] = s / l(j, j);
    }
  }
  return x;
}

Matrix inverse_lower(const Matrix& l) {
  require_square(l, "inverse_lower");
  if (l.rows() > 512) {
    throw ShapeError("inverse_lower: explicit inverse only permitted up to 512x512, got " +
                     std::to_string(l.rows()) + "; use a triangular solve");
  }
  return solve_lower(l, Matrix::identity(l.rows()));
}

Matrix pairwise_sq_dists(const Matrix& x) {
  const std::size_t n = x.rows();
  const std::size_t m = x.cols();
  std::vector<double> sq(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row_ptr(i);
    double s = 0.0;
    for (std::size_t k = 0; k < m; ++k) s += xi[k] * xi[k];
    sq[i] = s;
  }
  Matrix e(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* xi = x.row_ptr(i);
    for (std::size_t j = i + 1; j < n; ++j) {
      const double* xj = x.row_ptr(j);
      double dot = 0.0;
      for (std::size_t k = 0; k < m; ++k) dot += xi[k] * xj[k];
      const double d = std::max(0.0, sq[i] + sq[j] - 2.0 * dot);
      e(i, j) = d;
      e(j, i) = d;
    }
  }
  return e;
}

}  // namespace dirsel
