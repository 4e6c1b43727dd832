#pragma once

#include <cstddef>
#include <vector>

#include "dirsel/autodiff.hpp"
#include "dirsel/matrix.hpp"
#include "dirsel/rng.hpp"

namespace dirsel {

using ad::Tape;
using ad::Var;

struct SelectorParams {
  std::size_t m = 2;      // number of features to keep
  double epsilon = 1e-4;  // diagonal damping; keeps the Gram factor positive definite
  double t0 = 10.0;       // initial softmax temperature
  double t_min = 0.01;    // final softmax temperature
};

// Standard Gumbel deviate from a uniform in (0,1): -log(-log(u)).
double gumbel_from_uniform(double u);

Matrix sample_gumbel(std::size_t rows, std::size_t cols, CounterRng& rng);

// Geometric schedule from t0 down to t_min; epoch 0 gives t0, the last epoch
// gives t_min exactly.
double anneal_temperature(std::size_t epoch, std::size_t total_epochs, double t0, double t_min);

// Column-stochastic soft selector: softmax over each column of
// (theta + gumbel) / temperature. theta is d x m.
Var soft_selection(Tape& tape, const Var& theta, const Matrix& gumbel, double temperature);

// De-duplicated selector with exactly orthonormal columns. With
// A = Fhat^T Fhat + eps I = L L^T = P diag(lam) P^T, returns
// [diag(lam)^{1/2} P^T; 0] L^{-T}, a d x m matrix satisfying F^T F = I.
Matrix orthogonalize_exact(const Matrix& f_hat, double epsilon);

// Differentiable variant used in training: F = Fhat L^{-T}, which satisfies
// F^T F = I - eps L^{-1} L^{-T} (near-orthonormal, off by O(eps)).
Var orthogonalize_practical(Tape& tape, const Var& f_hat, double epsilon);

struct HardSelection {
  std::vector<std::size_t> indices;  // per column, the argmax row (ties: lowest)
  bool has_duplicates = false;       // two columns picked the same feature
};

HardSelection hard_selection(const Matrix& f_hat);

}  // namespace dirsel
