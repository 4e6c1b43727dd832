#ifndef DIRSEL_CHECKS_HPP
#define DIRSEL_CHECKS_HPP

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace dirsel::checks {

// One verification outcome. `max_error` is the worst observed statistic and
// must stay below `tolerance`; count-based checks store the number of failed
// repetitions and allow `tolerance` of them. `detail` is a human note.
struct CheckResult {
  std::string name;
  double max_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

// Central-difference gradient checks: one case per registered tape operation
// (tolerance 1e-5, `points` random points each) plus the end-to-end training
// loss at zeta=50 (tolerance 1e-4).
std::vector<CheckResult> gradcheck_suite(std::size_t points = 10, std::uint64_t seed = 0);

// Soft transport selectors and the resulting row weights against exact
// sorting on random tie-free rows (n in [6,50], k in [1,5], gamma 1e-3,
// zeta 200); both sup-norm gaps must stay below 1e-2.
CheckResult ot_vs_sort_check(std::size_t rows = 1000, std::uint64_t seed = 0);

// Closed-form row weights against an exhaustive active-set solution of the
// simplex-constrained quadratic subproblem (n <= 12), tolerance 1e-8.
CheckResult kkt_check(std::size_t instances = 500, std::uint64_t seed = 0);

// Sinkhorn marginal feasibility after zeta=200 across gamma in
// {1e-3, 1e-2, 1e-1}; worst violation must stay below 1e-6.
CheckResult marginals_check(std::size_t matrices = 100, std::uint64_t seed = 0);

// Orthogonalization identities on random selectors including duplicate
// columns: exact path F^T F = I, practical path F^T F = I - eps L^{-1}L^{-T},
// both to 1e-8.
CheckResult orthogonality_check(std::size_t reps = 100, std::uint64_t seed = 0);

// Hard-path row weights are invariant to distance scaling by c in
// {0.1, 1, 17.3} to 1e-10.
CheckResult scale_invariance_check(std::size_t rows = 100, std::uint64_t seed = 0);

// Two-bubble smoothness ordering: the planted coordinate on its own 2-NN
// graph scores a lower Dirichlet energy than a noise signal on that graph and
// than the same coordinate on a random graph; at most one seed may fail.
CheckResult energy_ordering_check(std::size_t seeds = 10);

// Everything above with default counts, in a stable order.
std::vector<CheckResult> run_all(std::uint64_t seed = 0);

}  // namespace dirsel::checks

#endif  // DIRSEL_CHECKS_HPP
