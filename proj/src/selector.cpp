#include "dirsel/selector.hpp"

#include <cmath>

#include "dirsel/errors.hpp"
#include "dirsel/linalg.hpp"

namespace dirsel {

using namespace ad;

double gumbel_from_uniform(double u) {
  if (!(u > 0.0 && u < 1.0)) throw DomainError("gumbel_from_uniform: u must lie in (0,1)");
  return -std::log(-std::log(u));
}

Matrix sample_gumbel(std::size_t rows, std::size_t cols, CounterRng& rng) {
  Matrix g(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) g(i, j) = gumbel_from_uniform(rng.next_uniform());
  }
  return g;
}

double anneal_temperature(std::size_t epoch, std::size_t total_epochs, double t0, double t_min) {
  if (total_epochs == 0) throw ConfigError("anneal_temperature: total_epochs must be positive");
  if (!(t0 > 0.0) || !(t_min > 0.0) || t_min > t0) {
    throw ConfigError("anneal_temperature: need 0 < t_min <= t0");
  }
  if (epoch >= total_epochs) epoch = total_epochs - 1;
  if (total_epochs == 1) return t_min;
  const double frac =
      static_cast<double>(epoch) / static_cast<double>(total_epochs - 1);
  return t0 * std::pow(t_min / t0, frac);
}

Var soft_selection(Tape& tape, const Var& theta, const Matrix& gumbel, double temperature) {
  if (!(temperature > 0.0)) throw ConfigError("soft_selection: temperature must be positive");
  if (gumbel.rows() != theta.rows() || gumbel.cols() != theta.cols()) {
    throw ShapeError("soft_selection: gumbel shape does not match theta");
  }
  const Var noise = tape.constant(gumbel);
  const Var logits = smul(add(theta, noise), 1.0 / temperature);
  // Softmax over columns, done by transposing around the row-wise kernel.
  return transpose(row_softmax(transpose(logits)));
}

Matrix orthogonalize_exact(const Matrix& f_hat, double epsilon) {
  const std::size_t d = f_hat.rows();
  const std::size_t m = f_hat.cols();
  if (m == 0 || d < m) throw ShapeError("orthogonalize_exact: need d >= m >= 1");
  Matrix a = matmul(transpose(f_hat), f_hat);
  for (std::size_t i = 0; i < m; ++i) a(i, i) += epsilon;
  const CholeskyFactor chol = cholesky(a);
  const SymEig eig = jacobi_eigh(a);
  Matrix b(d, m);
  for (std::size_t i = 0; i < m; ++i) {
    const double root = std::sqrt(eig.values[i]);
    for (std::size_t j = 0; j < m; ++j) b(i, j) = root * eig.vectors(j, i);
  }
  return solve_right_lower_transposed(b, chol.lower);
}

Var orthogonalize_practical(Tape& tape, const Var& f_hat, double epsilon) {
  const std::size_t m = f_hat.cols();
  if (m == 0 || f_hat.rows() < m) throw ShapeError("orthogonalize_practical: need d >= m >= 1");
  Matrix eps_eye = Matrix::identity(m);
  for (std::size_t i = 0; i < m; ++i) eps_eye(i, i) = epsilon;
  const Var a = add(matmul(transpose(f_hat), f_hat), tape.constant(std::move(eps_eye)));
  const Var lower = cholesky(a);
  return tri_solve_right_transposed(f_hat, lower);
}

HardSelection hard_selection(const Matrix& f_hat) {
  HardSelection sel;
  sel.indices.resize(f_hat.cols());
  for (std::size_t j = 0; j < f_hat.cols(); ++j) {
    std::size_t arg = 0;
    double best = f_hat(0, j);
    for (std::size_t i = 1; i < f_hat.rows(); ++i) {
      if (f_hat(i, j) > best) {
        best = f_hat(i, j);
        arg = i;
      }
    }
    sel.indices[j] = arg;
  }
  for (std::size_t a = 0; a < sel.indices.size() && !sel.has_duplicates; ++a) {
    for (std::size_t b = a + 1; b < sel.indices.size(); ++b) {
      if (sel.indices[a] == sel.indices[b]) {
        sel.has_duplicates = true;
        break;
      }
    }
  }
  return sel;
}

}  // namespace dirsel
