#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "dirsel/autodiff.hpp"
#include "dirsel/errors.hpp"
#include "dirsel/linalg.hpp"
#include "dirsel/matrix.hpp"
#include "dirsel/rng.hpp"
#include "dirsel/selector.hpp"
#include "doctest.h"

using namespace dirsel;
using namespace dirsel::ad;

namespace {

Matrix random_soft_selector(std::size_t d, std::size_t m, CounterRng& rng, double spread) {
  // Column softmax of random logits; columns are strictly positive and sum to 1.
  Matrix f(d, m);
  for (std::size_t j = 0; j < m; ++j) {
    double total = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      f(i, j) = std::exp(spread * rng.next_gaussian());
      total += f(i, j);
    }
    for (std::size_t i = 0; i < d; ++i) f(i, j) /= total;
  }
  return f;
}

Matrix gram(const Matrix& f) { return matmul(transpose(f), f); }

}  // namespace

TEST_CASE("gumbel transform hits the analytic point") {
  // u = 1/e gives -log(-log(1/e)) = -log(1) = 0.
  CHECK(std::abs(gumbel_from_uniform(1.0 / std::exp(1.0))) < 1e-12);
  CHECK_THROWS_AS(gumbel_from_uniform(0.0), DomainError);
  CHECK_THROWS_AS(gumbel_from_uniform(1.0), DomainError);
}

TEST_CASE("gumbel sample statistics match the distribution") {
  CounterRng rng("test.gumbel", 0);
  const Matrix g = sample_gumbel(400, 250, rng);
  double mean = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) mean += g(i, j);
  const double count = static_cast<double>(g.rows() * g.cols());
  mean /= count;
  double var = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j) {
      const double v = g(i, j) - mean;
      var += v * v;
    }
  var /= count - 1.0;
  const double euler_mascheroni = 0.57721566490153286;
  const double pi = 3.14159265358979324;
  CHECK(mean == doctest::Approx(euler_mascheroni).epsilon(0.02));
  CHECK(var == doctest::Approx(pi * pi / 6.0).epsilon(0.02));
}

TEST_CASE("temperature anneal endpoints and midpoint") {
  CHECK(anneal_temperature(0, 1000, 10.0, 0.01) == doctest::Approx(10.0));
  CHECK(anneal_temperature(999, 1000, 10.0, 0.01) == doctest::Approx(0.01));
  // Eleven epochs, halfway point: 10 * (0.001)^(1/2) = 10^(-1/2).
  CHECK(anneal_temperature(5, 11, 10.0, 0.01) ==
        doctest::Approx(std::pow(10.0, -0.5)).epsilon(1e-12));
  for (std::size_t e = 1; e < 50; ++e) {
    CHECK(anneal_temperature(e, 50, 10.0, 0.01) < anneal_temperature(e - 1, 50, 10.0, 0.01));
  }
  CHECK(anneal_temperature(0, 1, 10.0, 0.01) == doctest::Approx(0.01));
  CHECK_THROWS_AS(anneal_temperature(0, 0, 10.0, 0.01), ConfigError);
  CHECK_THROWS_AS(anneal_temperature(0, 10, 0.01, 10.0), ConfigError);
}

TEST_CASE("soft selection columns are probability vectors") {
  Tape tape;
  CounterRng rng("test.soft", 3);
  Matrix theta(20, 2);
  for (std::size_t i = 0; i < 20; ++i)
    for (std::size_t j = 0; j < 2; ++j) theta(i, j) = rng.next_gaussian();
  const Var th = tape.leaf(theta, true);
  const Matrix g = sample_gumbel(20, 2, rng);
  const Var f = soft_selection(tape, th, g, 1.0);
  CHECK(f.rows() == 20);
  CHECK(f.cols() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < 20; ++i) {
      CHECK(f.value()(i, j) > 0.0);
      s += f.value()(i, j);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("soft selection with zero logits is uniform") {
  Tape tape;
  const Var th = tape.leaf(Matrix(10, 3), true);
  const Var f = soft_selection(tape, th, Matrix(10, 3), 5.0);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(f.value()(i, j) == doctest::Approx(0.1).epsilon(1e-14));
}

TEST_CASE("low temperature sharpens toward the argmax") {
  Matrix theta(5, 1);
  theta(2, 0) = 1.0;
  Tape tape;
  const Var th = tape.leaf(theta, true);
  const Var f = soft_selection(tape, th, Matrix(5, 1), 0.01);
  CHECK(f.value()(2, 0) > 1.0 - 1e-12);
}

TEST_CASE("soft selection gradient matches finite differences") {
  CounterRng rng("test.soft.grad", 1);
  Matrix point(6, 2);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) point(i, j) = 0.5 * rng.next_gaussian();
  const Matrix g = sample_gumbel(6, 2, rng);
  Matrix w(6, 2);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 2; ++j) w(i, j) = rng.next_gaussian();
  const double err = gradcheck(
      [&](Tape& t, const Var& x) {
        const Var f = soft_selection(t, x, g, 0.7);
        return sum_all(mul(f, t.constant(w)));
      },
      point);
  CHECK(err < 1e-5);
}

TEST_CASE("exact orthogonalization returns orthonormal columns") {
  CounterRng rng("test.orth.exact", 0);
  double worst = 0.0;
  for (int rep = 0; rep < 50; ++rep) {
    // Spread 4 makes near-one-hot columns, including near-duplicate pairs;
    // spread 0.2 makes near-uniform (nearly collinear) columns.
    const double spread = rep % 2 == 0 ? 4.0 : 0.2;
    const Matrix f_hat = random_soft_selector(20, 2, rng, spread);
    const Matrix f = orthogonalize_exact(f_hat, 1e-4);
    const Matrix err = sub(gram(f), Matrix::identity(2));
    worst = std::max(worst, max_abs(err));
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("exact orthogonalization handles exactly duplicated columns") {
  Matrix f_hat(20, 2);
  for (std::size_t i = 0; i < 20; ++i) {
    f_hat(i, 0) = 0.05;
    f_hat(i, 1) = 0.05;  // rank-one Gram; epsilon keeps the factor invertible
  }
  const Matrix f = orthogonalize_exact(f_hat, 1e-4);
  CHECK(max_abs(sub(gram(f), Matrix::identity(2))) < 1e-8);
}

TEST_CASE("practical orthogonalization satisfies its Gram identity") {
  CounterRng rng("test.orth.practical", 0);
  const double eps = 1e-4;
  for (int rep = 0; rep < 20; ++rep) {
    const Matrix f_hat = random_soft_selector(20, 2, rng, rep % 2 == 0 ? 4.0 : 0.2);
    Tape tape;
    const Var fh = tape.leaf(f_hat, true);
    const Var f = orthogonalize_practical(tape, fh, eps);

    Matrix a = matmul(transpose(f_hat), f_hat);
    for (std::size_t i = 0; i < 2; ++i) a(i, i) += eps;
    const Matrix linv = inverse_lower(cholesky(a).lower);
    // F^T F = I - eps L^{-1} L^{-T}
    const Matrix expected = sub(Matrix::identity(2), scale(matmul(linv, transpose(linv)), eps));
    CHECK(max_abs_diff(gram(f.value()), expected) < 1e-8);
  }
}

TEST_CASE("practical orthogonalization gradient matches finite differences") {
  CounterRng rng("test.orth.grad", 7);
  Matrix point(8, 2);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 2; ++j) point(i, j) = rng.next_gaussian();
  Matrix w(8, 2);
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 2; ++j) w(i, j) = rng.next_gaussian();
  const double err = gradcheck(
      [&](Tape& t, const Var& x) {
        // Softmax first keeps the Gram matrix well conditioned under the
        // finite-difference perturbations.
        const Var f_hat = transpose(row_softmax(transpose(x)));
        const Var f = orthogonalize_practical(t, f_hat, 1e-4);
        return sum_all(mul(f, t.constant(w)));
      },
      point);
  CHECK(err < 1e-5);
}

TEST_CASE("hard selection takes per-column argmax with lowest-index ties") {
  Matrix f(4, 3);
  f(1, 0) = 0.9;
  f(2, 1) = 0.8;
  f(0, 2) = 0.5;
  f(3, 2) = 0.5;  // tie; lowest row index wins
  const HardSelection sel = hard_selection(f);
  CHECK(sel.indices == std::vector<std::size_t>{1, 2, 0});
  CHECK_FALSE(sel.has_duplicates);
}

TEST_CASE("hard selection flags duplicate picks") {
  Matrix f(4, 2);
  f(2, 0) = 0.9;
  f(2, 1) = 0.7;
  const HardSelection sel = hard_selection(f);
  CHECK(sel.indices == std::vector<std::size_t>{2, 2});
  CHECK(sel.has_duplicates);
}

TEST_CASE("selector input validation") {
  Tape tape;
  const Var th = tape.leaf(Matrix(5, 2), true);
  CHECK_THROWS_AS(soft_selection(tape, th, Matrix(5, 3), 1.0), ShapeError);
  CHECK_THROWS_AS(soft_selection(tape, th, Matrix(5, 2), 0.0), ConfigError);
  CHECK_THROWS_AS(orthogonalize_exact(Matrix(2, 5), 1e-4), ShapeError);
}
