#include "tdr/distribution.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tdr/errors.hpp"

namespace tdr {

StateDistribution::StateDistribution(State first, std::vector<double> mass)
    : first_(first), mass_(std::move(mass)) {
  for (double m : mass_)
    if (!(m >= 0.0) || !std::isfinite(m)) throw InvalidInput("StateDistribution: negative or non-finite mass");
}

StateDistribution StateDistribution::point_mass(State s) { return StateDistribution(s, {1.0}); }

double StateDistribution::operator()(State s) const {
  if (s < first_ || s > last_state()) return 0.0;
  return mass_[static_cast<std::size_t>(s - first_)];
}

double StateDistribution::total() const { return std::accumulate(mass_.begin(), mass_.end(), 0.0); }

State StateDistribution::sample(RandomStream& rng) const {
  if (mass_.empty()) throw InvalidInput("StateDistribution::sample: empty distribution");
  const double u = rng.uniform01() * total();
  double cdf = 0.0;
  for (std::size_t i = 0; i < mass_.size(); ++i) {
    cdf += mass_[i];
    if (u < cdf) return first_ + static_cast<State>(i);
  }
  // Rounding left u at the top of the range; return the last state with mass.
  for (std::size_t i = mass_.size(); i-- > 0;)
    if (mass_[i] > 0.0) return first_ + static_cast<State>(i);
  throw InvalidInput("StateDistribution::sample: zero total mass");
}

double total_variation(const StateDistribution& p, const StateDistribution& q) {
  if (p.empty() && q.empty()) return 0.0;
  const State lo = std::min(p.empty() ? q.first_state() : p.first_state(),
                            q.empty() ? p.first_state() : q.first_state());
  const State hi = std::max(p.empty() ? q.last_state() : p.last_state(),
                            q.empty() ? p.last_state() : q.last_state());
  double acc = 0.0;
  for (State s = lo; s <= hi; ++s) acc += std::abs(p(s) - q(s));
  return 0.5 * acc;
}

}  // namespace tdr
