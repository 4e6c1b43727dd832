#include "dirsel/rng.hpp"

#include <cmath>

namespace dirsel {

double CounterRng::next_gaussian() {
  const double u1 = next_uniform();
  const double u2 = next_uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace dirsel
