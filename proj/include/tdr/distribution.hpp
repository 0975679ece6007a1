#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tdr/random.hpp"

namespace tdr {

using State = int;
using Action = int;

/// Probability mass over a contiguous block of states [first, first + size).
class StateDistribution {
 public:
  StateDistribution() = default;
  StateDistribution(State first, std::vector<double> mass);

  static StateDistribution point_mass(State s);

  State first_state() const { return first_; }
  State last_state() const { return first_ + static_cast<State>(mass_.size()) - 1; }
  std::size_t size() const { return mass_.size(); }
  bool empty() const { return mass_.empty(); }

  /// Mass at s; zero outside the stored block.
  double operator()(State s) const;

  std::span<const double> mass() const { return mass_; }
  double total() const;

  /// Inversion sampling against the cumulative mass.
  State sample(RandomStream& rng) const;

  template <class F>
  double expectation(F&& f) const {
    double acc = 0.0;
    for (std::size_t i = 0; i < mass_.size(); ++i)
      if (mass_[i] != 0.0) acc += mass_[i] * f(first_ + static_cast<State>(i));
    return acc;
  }

 private:
  State first_ = 0;
  std::vector<double> mass_;
};

/// Half the L1 distance; states outside either block carry zero mass.
double total_variation(const StateDistribution& p, const StateDistribution& q);

}  // namespace tdr
