#ifndef DIRSEL_LINALG_HPP
#define DIRSEL_LINALG_HPP

#include <vector>

#include "dirsel/matrix.hpp"

namespace dirsel {

// Lower-triangular Cholesky factor: lower * lower^T reconstructs the input.
struct CholeskyFactor {
  Matrix lower;
};

// Symmetric eigendecomposition, eigenvalues ascending, eigenvectors in the
// matching columns of `vectors`.
struct SymEig {
  std::vector<double> values;
  Matrix vectors;
};

// Cholesky factorization of a symmetric positive definite matrix. Symmetry is
// checked to 1e-12 (relative to the largest entry); a non-positive pivot
// raises NumericError naming the pivot index.
CholeskyFactor cholesky(const Matrix& a);

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// 1e-10 or 100 sweeps pass. Input must be symmetric (checked to 1e-12).
SymEig jacobi_eigh(const Matrix& a);

// Triangular solves against a lower factor L. Zero diagonal raises
// NumericError naming the index.
Matrix solve_lower(const Matrix& l, const Matrix& b);              // L X = B
Matrix solve_lower_transposed(const Matrix& l, const Matrix& b);   // L^T X = B
Matrix solve_right_lower(const Matrix& b, const Matrix& l);        // X L = B
Matrix solve_right_lower_transposed(const Matrix& b, const Matrix& l);  // X L^T = B

// Explicit inverse of a lower-triangular matrix. Only permitted for small
// factors (m <= 512); larger inputs must use the solves above.
Matrix inverse_lower(const Matrix& l);

// All pairwise squared Euclidean distances between rows of x. Symmetric with
// zero diagonal; round-off negatives are clamped to 0.
Matrix pairwise_sq_dists(const Matrix& x);

}  // namespace dirsel

#endif  // DIRSEL_LINALG_HPP
