#include "dirsel/checks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dirsel/autodiff.hpp"
#include "dirsel/errors.hpp"
#include "dirsel/graph_learner.hpp"
#include "dirsel/linalg.hpp"
#include "dirsel/matrix.hpp"
#include "dirsel/rng.hpp"
#include "dirsel/selector.hpp"
#include "dirsel/train.hpp"

namespace dirsel::checks {

namespace {

using ad::Tape;
using ad::Var;

Matrix gauss(std::size_t rows, std::size_t cols, CounterRng& rng, double scale = 1.0) {
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = scale * rng.next_gaussian();
  }
  return out;
}

Matrix unif(std::size_t rows, std::size_t cols, CounterRng& rng, double lo, double hi) {
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) out(i, j) = lo + (hi - lo) * rng.next_uniform();
  }
  return out;
}

// Shuffled jittered grid on (0,1]: consecutive sorted gaps stay within
// [0.5/n, 1.5/n], so no two entries come close enough to act as a tie.
std::vector<double> tie_free_row(std::size_t n, CounterRng& rng) {
  std::vector<double> row(n);
  for (std::size_t l = 0; l < n; ++l) {
    row[l] = (static_cast<double>(l) + 0.5 + 0.5 * rng.next_uniform()) / static_cast<double>(n);
  }
  for (std::size_t i = n - 1; i > 0; --i) {
    std::swap(row[i], row[rng.next_below(i + 1)]);
  }
  return row;
}

Matrix tie_free_matrix(std::size_t rows, std::size_t cols, CounterRng& rng) {
  const std::vector<double> flat = tie_free_row(rows * cols, rng);
  Matrix out(rows, cols);
  std::memcpy(out.data(), flat.data(), flat.size() * sizeof(double));
  return out;
}

double sup_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]));
  return worst;
}

CheckResult make_result(std::string name, double max_error, double tolerance,
                        std::string detail = "") {
  CheckResult r;
  r.name = std::move(name);
  r.max_error = max_error;
  r.tolerance = tolerance;
  r.pass = max_error < tolerance;
  r.detail = std::move(detail);
  return r;
}

// ---------------------------------------------------------------------------
// Gradient checks

using BuildFn = std::function<Var(Tape&, const Var&)>;

Var weighted(Tape& tape, const Var& v, const Matrix& w) {
  return ad::sum_all(ad::mul(tape.constant(w), v));
}

struct GradCase {
  std::string name;
  double tolerance = 1e-5;
  // Draws a fresh point and a deterministic build closure around it.
  std::function<std::pair<Matrix, BuildFn>(CounterRng&)> make;
};

std::vector<GradCase> grad_cases() {
  std::vector<GradCase> cases;
  auto push = [&](std::string name,
                  std::function<std::pair<Matrix, BuildFn>(CounterRng&)> make,
                  double tol = 1e-5) {
    cases.push_back({std::move(name), tol, std::move(make)});
  };

  push("add", [](CounterRng& rng) {
    const Matrix c = gauss(3, 4, rng), w = gauss(3, 4, rng);
    BuildFn build = [c, w](Tape& t, const Var& x) {
      return weighted(t, ad::add(x, t.constant(c)), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("sub", [](CounterRng& rng) {
    const Matrix c = gauss(3, 4, rng), w = gauss(3, 4, rng);
    BuildFn build = [c, w](Tape& t, const Var& x) {
      return weighted(t, ad::sub(t.constant(c), x), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("mul", [](CounterRng& rng) {
    const Matrix c = gauss(3, 4, rng), w = gauss(3, 4, rng);
    BuildFn build = [c, w](Tape& t, const Var& x) {
      return weighted(t, ad::mul(x, t.constant(c)), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("div numerator", [](CounterRng& rng) {
    const Matrix den = unif(3, 4, rng, 1.5, 3.5), w = gauss(3, 4, rng);
    BuildFn build = [den, w](Tape& t, const Var& x) {
      return weighted(t, ad::div(x, t.constant(den)), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("div denominator", [](CounterRng& rng) {
    const Matrix num = gauss(3, 4, rng), w = gauss(3, 4, rng);
    const Matrix off(3, 4, 2.5);
    BuildFn build = [num, w, off](Tape& t, const Var& x) {
      return weighted(t, ad::div(t.constant(num), ad::add(x, t.constant(off))), w);
    };
    return std::make_pair(unif(3, 4, rng, -1.0, 1.0), build);
  });
  push("smul", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::smul(x, 1.7), w); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("matmul left", [](CounterRng& rng) {
    const Matrix c = gauss(4, 2, rng), w = gauss(3, 2, rng);
    BuildFn build = [c, w](Tape& t, const Var& x) {
      return weighted(t, ad::matmul(x, t.constant(c)), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("matmul right", [](CounterRng& rng) {
    const Matrix c = gauss(2, 3, rng), w = gauss(2, 4, rng);
    BuildFn build = [c, w](Tape& t, const Var& x) {
      return weighted(t, ad::matmul(t.constant(c), x), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("transpose", [](CounterRng& rng) {
    const Matrix w = gauss(4, 3, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::transpose(x), w); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("exp", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::exp(x), w); };
    return std::make_pair(unif(3, 4, rng, -1.0, 1.0), build);
  });
  push("log", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    const Matrix off(3, 4, 2.5);
    BuildFn build = [w, off](Tape& t, const Var& x) {
      return weighted(t, ad::log(ad::add(x, t.constant(off))), w);
    };
    return std::make_pair(unif(3, 4, rng, -1.0, 1.0), build);
  });
  push("square", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::square(x), w); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("relu", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    // Entries stay at least 0.3 away from the kink.
    Matrix point(3, 4);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 4; ++j) {
        const double mag = 0.3 + rng.next_uniform();
        point(i, j) = ((i + j) % 2 == 0) ? mag : -mag;
      }
    }
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::relu(x), w); };
    return std::make_pair(point, build);
  });
  push("row softmax", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::row_softmax(x), w); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("sum all", [](CounterRng& rng) {
    BuildFn build = [](Tape&, const Var& x) { return ad::smul(ad::sum_all(x), 1.3); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("row sum", [](CounterRng& rng) {
    const Matrix w = gauss(3, 1, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::row_sum(x), w); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("col sum", [](CounterRng& rng) {
    const Matrix w = gauss(1, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::col_sum(x), w); };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("gather cols", [](CounterRng& rng) {
    const Matrix w = gauss(3, 3, rng);
    BuildFn build = [w](Tape& t, const Var& x) {
      return weighted(t, ad::gather_cols(x, {2, 0, 2}), w);  // repeats must accumulate
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("gather rows", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) {
      return weighted(t, ad::gather_rows(x, {1, 0, 1}), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("set entries", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) {
      return weighted(t, ad::set_entries(x, {{0, 1}, {2, 3}}, 5.0), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("reduce max", [](CounterRng& rng) {
    BuildFn build = [](Tape&, const Var& x) { return ad::smul(ad::reduce_max(x), 1.3); };
    return std::make_pair(tie_free_matrix(3, 4, rng), build);
  });
  push("div by scalar", [](CounterRng& rng) {
    const Matrix w = gauss(3, 4, rng);
    const Matrix one(1, 1, 1.0);
    BuildFn build = [w, one](Tape& t, const Var& x) {
      const Var s = ad::add(ad::sum_all(ad::square(x)), t.constant(one));
      return weighted(t, ad::div_by_scalar(x, s), w);
    };
    return std::make_pair(gauss(3, 4, rng), build);
  });
  push("make diag", [](CounterRng& rng) {
    const Matrix w = gauss(4, 4, rng);
    BuildFn build = [w](Tape& t, const Var& x) { return weighted(t, ad::make_diag(x), w); };
    return std::make_pair(gauss(4, 1, rng), build);
  });
  push("stack rows", [](CounterRng& rng) {
    const Matrix w = gauss(3, 5, rng);
    BuildFn build = [w](Tape& t, const Var& x) {
      const std::vector<Var> rows = {ad::gather_rows(x, {2}), ad::gather_rows(x, {0}),
                                     ad::gather_rows(x, {1})};
      return weighted(t, ad::stack_rows(rows), w);
    };
    return std::make_pair(gauss(3, 5, rng), build);
  });
  push("quad form trace signal", [](CounterRng& rng) {
    Matrix l = gauss(4, 4, rng);
    for (std::size_t i = 0; i < 4; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        const double s = 0.5 * (l(i, j) + l(j, i));
        l(i, j) = l(j, i) = s;
      }
    }
    BuildFn build = [l](Tape& t, const Var& x) {
      return ad::smul(ad::quad_form_trace(x, t.constant(l)), 1.3);
    };
    return std::make_pair(gauss(4, 2, rng), build);
  });
  push("quad form trace laplacian", [](CounterRng& rng) {
    const Matrix sig = gauss(4, 2, rng);
    BuildFn build = [sig](Tape& t, const Var& x) {
      return ad::smul(ad::quad_form_trace(t.constant(sig), x), 1.3);
    };
    return std::make_pair(gauss(4, 4, rng), build);
  });
  push("cholesky", [](CounterRng& rng) {
    const Matrix w = gauss(3, 3, rng);
    const Matrix bump = Matrix::identity(3);
    BuildFn build = [w, bump](Tape& t, const Var& x) {
      const Var spd =
          ad::add(ad::matmul(ad::transpose(x), x), ad::smul(t.constant(bump), 0.75));
      return weighted(t, ad::cholesky(spd), w);
    };
    return std::make_pair(gauss(3, 3, rng, 0.5), build);
  });
  push("tri solve rhs", [](CounterRng& rng) {
    const Matrix m = gauss(3, 3, rng, 0.5);
    Matrix spd(3, 3);
    for (std::size_t i = 0; i < 3; ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        double acc = i == j ? 0.75 : 0.0;
        for (std::size_t t = 0; t < 3; ++t) acc += m(t, i) * m(t, j);
        spd(i, j) = acc;
      }
    }
    const Matrix lower = cholesky(spd).lower;
    const Matrix w = gauss(3, 3, rng);
    BuildFn build = [lower, w](Tape& t, const Var& x) {
      return weighted(t, ad::tri_solve_right_transposed(x, t.constant(lower)), w);
    };
    return std::make_pair(gauss(3, 3, rng), build);
  });
  push("tri solve factor", [](CounterRng& rng) {
    const Matrix b = gauss(3, 3, rng), w = gauss(3, 3, rng);
    const Matrix bump = Matrix::identity(3);
    BuildFn build = [b, w, bump](Tape& t, const Var& x) {
      const Var spd =
          ad::add(ad::matmul(ad::transpose(x), x), ad::smul(t.constant(bump), 0.75));
      return weighted(t, ad::tri_solve_right_transposed(t.constant(b), ad::cholesky(spd)), w);
    };
    return std::make_pair(gauss(3, 3, rng, 0.5), build);
  });
  push("transport plan", [](CounterRng& rng) {
    GraphLearnerConfig cfg;
    cfg.k = 2;
    cfg.gamma = 0.1;
    cfg.zeta = 40;
    const Matrix w = gauss(8, 4, rng);
    BuildFn build = [cfg, w](Tape& t, const Var& x) {
      return weighted(t, sinkhorn_plan_on_tape(t, x, cfg), w);
    };
    return std::make_pair(unif(1, 8, rng, 0.1, 0.9), build);
  });
  push(
      "end-to-end loss",
      [](CounterRng& rng) {
        const Matrix data = gauss(8, 4, rng);
        const Matrix gumbel = gauss(4, 2, rng);
        TrainConfig cfg;
        cfg.m = 2;
        cfg.k = 2;
        cfg.gamma = 0.1;
        cfg.zeta = 50;
        cfg.log_every = 0;
        BuildFn build = [data, gumbel, cfg](Tape& t, const Var& theta) {
          return loss_forward(t, data, theta, gumbel, 1.0, cfg, 0, nullptr);
        };
        return std::make_pair(gauss(4, 2, rng, 0.05), build);
      },
      1e-4);
  return cases;
}

// ---------------------------------------------------------------------------
// Simplex-QP reference for the closed-form row weights

// Exhaustive active-set solution of min ||s - z||^2 over the probability
// simplex: every support is tried and validated against the KKT conditions.
std::vector<double> simplex_project_bruteforce(const std::vector<double>& z) {
  const std::size_t n = z.size();
  std::vector<double> best;
  for (std::size_t mask = 1; mask < (1u << n); ++mask) {
    double sum_z = 0.0;
    std::size_t size = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (mask & (1u << j)) {
        sum_z += z[j];
        size += 1;
      }
    }
    const double tau = (1.0 - sum_z) / static_cast<double>(size);
    bool valid = true;
    std::vector<double> s(n, 0.0);
    for (std::size_t j = 0; j < n && valid; ++j) {
      if (mask & (1u << j)) {
        s[j] = z[j] + tau;
        if (s[j] < -1e-12) valid = false;
      } else if (z[j] + tau > 1e-12) {
        valid = false;  // excluded coordinate would want to grow
      }
    }
    if (valid) {
      best = std::move(s);
      break;
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Two-bubble energy ordering

Matrix standardized_column(const std::vector<double>& v) {
  const std::size_t n = v.size();
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(n);
  double norm = 0.0;
  for (double x : v) norm += (x - mean) * (x - mean);
  norm = std::sqrt(norm);
  Matrix out(n, 1);
  for (std::size_t i = 0; i < n; ++i) out(i, 0) = (v[i] - mean) / norm;
  return out;
}

}  // namespace

std::vector<CheckResult> gradcheck_suite(std::size_t points, std::uint64_t seed) {
  std::vector<CheckResult> results;
  for (const GradCase& c : grad_cases()) {
    CounterRng rng("checks.grad." + c.name, seed);
    double worst = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
      auto [point, build] = c.make(rng);
      worst = std::max(worst, ad::gradcheck(build, point));
    }
    results.push_back(make_result("gradcheck: " + c.name, worst, c.tolerance));
  }

  // detach must pass no gradient: the backward map simply has no entry for
  // the original leaf.
  {
    CounterRng rng("checks.grad.detach", seed);
    double worst = 0.0;
    for (std::size_t p = 0; p < points; ++p) {
      Tape tape;
      const Var x = tape.leaf(gauss(3, 4, rng), true);
      const Var loss = ad::sum_all(ad::detach(ad::square(x)));
      const auto grads = tape.backward(loss);
      if (const auto it = grads.find(x.id); it != grads.end()) {
        for (std::size_t i = 0; i < 3; ++i) {
          for (std::size_t j = 0; j < 4; ++j) {
            worst = std::max(worst, std::fabs(it->second(i, j)));
          }
        }
      }
    }
    results.push_back(make_result("gradcheck: detach blocks gradients", worst, 1e-15));
  }
  return results;
}

CheckResult ot_vs_sort_check(std::size_t rows, std::uint64_t seed) {
  CounterRng rng("checks.ot_vs_sort", seed);
  double worst_selector = 0.0;
  double worst_weight = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t n = 6 + rng.next_below(45);
    const std::size_t k = std::min<std::size_t>(1 + rng.next_below(5), n - 2);
    const std::vector<double> e = tie_free_row(n, rng);

    const SelectorPair soft =
        extract_selectors(sinkhorn_bregman(build_cost(e, k), k, 1e-3, 200), k);
    const SelectorPair hard = exact_knn_row(e, k);
    worst_selector = std::max(worst_selector, sup_diff(soft.delta, hard.delta));
    worst_selector = std::max(worst_selector, sup_diff(soft.xi, hard.xi));

    const std::vector<double> w_soft = graph_row_weights(e, soft, k);
    const std::vector<double> w_hard = graph_row_weights(e, hard, k);
    worst_weight = std::max(worst_weight, sup_diff(w_soft, w_hard));
  }
  return make_result("transport selectors and weights vs exact sort",
                     std::max(worst_selector, worst_weight), 1e-2,
                     "selector gap " + std::to_string(worst_selector) + ", weight gap " +
                         std::to_string(worst_weight));
}

CheckResult kkt_check(std::size_t instances, std::uint64_t seed) {
  CounterRng rng("checks.kkt", seed);
  double worst = 0.0;
  for (std::size_t r = 0; r < instances; ++r) {
    const std::size_t n = 5 + rng.next_below(8);  // 5..12
    const std::size_t k = std::min<std::size_t>(1 + rng.next_below(4), n - 2);
    const std::vector<double> e = tie_free_row(n, rng);
    const SelectorPair sel = exact_knn_row(e, k);

    double e_delta = 0.0, e_xi = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      e_delta += sel.delta[j] * e[j];
      e_xi += sel.xi[j] * e[j];
    }
    const double alpha = 0.5 * (static_cast<double>(k) * e_xi - e_delta);
    std::vector<double> z(n);
    for (std::size_t j = 0; j < n; ++j) z[j] = -e[j] / (2.0 * alpha);

    const std::vector<double> reference = simplex_project_bruteforce(z);
    const std::vector<double> closed_form = graph_row_weights(e, sel, k);
    worst = std::max(worst, sup_diff(reference, closed_form));
  }
  return make_result("closed-form weights vs simplex-QP active set", worst, 1e-8);
}

CheckResult marginals_check(std::size_t matrices, std::uint64_t seed) {
  CounterRng rng("checks.marginals", seed);
  double worst = 0.0;
  for (std::size_t r = 0; r < matrices; ++r) {
    // Kept at n <= 15: near-degenerate nearest-target competition at larger n
    // stretches the gamma=1e-2 tail past 200 iterations.
    const std::size_t n = 6 + rng.next_below(10);
    const std::size_t k = std::min<std::size_t>(1 + rng.next_below(4), n - 2);
    const std::vector<double> e = tie_free_row(n, rng);
    const Matrix cost = build_cost(e, k);
    for (const double gamma : {1e-3, 1e-2, 1e-1}) {
      const TransportPlan plan = sinkhorn_bregman(cost, k, gamma, 200);
      const Matrix& g = plan.gamma_matrix;
      const double inv_n = 1.0 / static_cast<double>(n);
      for (std::size_t i = 0; i < n; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j + 1 <= g.cols(); ++j) row += g(i, j);
        worst = std::max(worst, std::fabs(row - inv_n));
      }
      for (std::size_t j = 0; j < g.cols(); ++j) {
        double col = 0.0;
        for (std::size_t i = 0; i < n; ++i) col += g(i, j);
        const double target =
            j + 1 < g.cols() ? inv_n : static_cast<double>(n - k - 1) * inv_n;
        worst = std::max(worst, std::fabs(col - target));
      }
    }
  }
  return make_result("transport marginal feasibility", worst, 1e-6);
}

CheckResult orthogonality_check(std::size_t reps, std::uint64_t seed) {
  CounterRng rng("checks.orthogonality", seed);
  const double epsilon = 1e-4;
  double worst_exact = 0.0;
  double worst_practical = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    const std::size_t d = 4 + rng.next_below(9);
    const std::size_t m = 2 + rng.next_below(std::min<std::size_t>(4, d - 1));
    Matrix f_hat(d, m);
    for (std::size_t j = 0; j < m; ++j) {
      double total = 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        f_hat(i, j) = std::exp(1.5 * rng.next_gaussian());
        total += f_hat(i, j);
      }
      for (std::size_t i = 0; i < d; ++i) f_hat(i, j) /= total;
    }
    if (r % 3 == 0 && m >= 2) {
      for (std::size_t i = 0; i < d; ++i) f_hat(i, 1) = f_hat(i, 0);  // duplicate column
    }

    const Matrix f_exact = orthogonalize_exact(f_hat, epsilon);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += f_exact(i, a) * f_exact(i, b);
        worst_exact = std::max(worst_exact, std::fabs(dot - (a == b ? 1.0 : 0.0)));
      }
    }

    Tape tape;
    const Matrix f_prac =
        orthogonalize_practical(tape, tape.constant(f_hat), epsilon).value();
    Matrix a_mat(m, m);
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        double dot = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += f_hat(i, p) * f_hat(i, q);
        a_mat(p, q) = dot + (p == q ? epsilon : 0.0);
      }
    }
    const Matrix inv_l = inverse_lower(cholesky(a_mat).lower);
    for (std::size_t p = 0; p < m; ++p) {
      for (std::size_t q = 0; q < m; ++q) {
        double dot = 0.0;
        double linv = 0.0;
        for (std::size_t i = 0; i < d; ++i) dot += f_prac(i, p) * f_prac(i, q);
        for (std::size_t t = 0; t < m; ++t) linv += inv_l(p, t) * inv_l(q, t);
        const double expected = (p == q ? 1.0 : 0.0) - epsilon * linv;
        worst_practical = std::max(worst_practical, std::fabs(dot - expected));
      }
    }
  }
  return make_result("orthogonalization identities", std::max(worst_exact, worst_practical),
                     1e-8,
                     "exact gap " + std::to_string(worst_exact) + ", practical gap " +
                         std::to_string(worst_practical));
}

CheckResult scale_invariance_check(std::size_t rows, std::uint64_t seed) {
  CounterRng rng("checks.scale", seed);
  double worst = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t n = 6 + rng.next_below(25);
    const std::size_t k = std::min<std::size_t>(1 + rng.next_below(5), n - 2);
    const std::vector<double> e = tie_free_row(n, rng);
    const std::vector<double> base = graph_row_weights(e, exact_knn_row(e, k), k);
    for (const double c : {0.1, 1.0, 17.3}) {
      std::vector<double> scaled(e.size());
      for (std::size_t j = 0; j < e.size(); ++j) scaled[j] = c * e[j];
      const std::vector<double> w = graph_row_weights(scaled, exact_knn_row(scaled, k), k);
      worst = std::max(worst, sup_diff(base, w));
    }
  }
  return make_result("hard-path weight scale invariance", worst, 1e-10);
}

CheckResult energy_ordering_check(std::size_t seeds) {
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < seeds; ++seed) {
    CounterRng rng("checks.energy", seed);
    const std::size_t half = 30;
    const std::size_t n = 2 * half;
    Matrix coords(n, 2);
    std::vector<double> first_coord(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double cx = i < half ? -2.0 : 2.0;
      coords(i, 0) = cx + 0.5 * rng.next_gaussian();
      coords(i, 1) = 0.5 * rng.next_gaussian();
      first_coord[i] = coords(i, 0);
    }
    const SimilarityGraph matched_graph = heat_kernel_graph(coords, 1.0, 2);
    const SimilarityGraph random_graph = heat_kernel_graph(gauss(n, 2, rng), 1.0, 2);

    std::vector<double> noise(n);
    for (std::size_t i = 0; i < n; ++i) noise[i] = rng.next_gaussian();

    const Matrix signal = standardized_column(first_coord);
    const Matrix noise_signal = standardized_column(noise);

    const double matched = dirichlet_energy(matched_graph.laplacian, signal);
    const double wrong_signal = dirichlet_energy(matched_graph.laplacian, noise_signal);
    const double wrong_graph = dirichlet_energy(random_graph.laplacian, signal);
    if (!(matched < wrong_signal && matched < wrong_graph)) failures += 1;
  }
  CheckResult r = make_result("two-bubble smoothness ordering",
                              static_cast<double>(failures), 2.0,
                              std::to_string(seeds - failures) + "/" +
                                  std::to_string(seeds) + " orderings held");
  return r;
}

std::vector<CheckResult> run_all(std::uint64_t seed) {
  std::vector<CheckResult> results = gradcheck_suite(10, seed);
  results.push_back(ot_vs_sort_check(1000, seed));
  results.push_back(kkt_check(500, seed));
  results.push_back(marginals_check(100, seed));
  results.push_back(orthogonality_check(100, seed));
  results.push_back(scale_invariance_check(100, seed));
  results.push_back(energy_ordering_check(10));
  return results;
}

}  // namespace dirsel::checks
