#include "tdr/adaptive_truncation.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "tdr/errors.hpp"

namespace tdr {

std::size_t default_block_length(std::size_t horizon) {
  if (horizon == 0) return 1;
  auto len = static_cast<std::size_t>(std::cbrt(static_cast<double>(horizon)));
  while ((len + 1) * (len + 1) * (len + 1) <= horizon) ++len;
  while (len > 1 && len * len * len > horizon) --len;
  return std::max<std::size_t>(len, 1);
}

std::size_t LepskiConfig::effective_block_len(std::size_t horizon) const {
  return block_len == 0 ? default_block_length(horizon) : block_len;
}

void LepskiConfig::validate(std::size_t horizon) const {
  if (grid.empty()) throw InvalidInput("Lepski: truncation grid is empty");
  if (draws < 2) throw InvalidInput("Lepski: need at least two bootstrap draws");
  const std::size_t len = effective_block_len(horizon);
  if (len < 1 || len > horizon)
    throw InvalidInput(fmt::format("Lepski: block length {} outside [1, {}]", len, horizon));
}

Trajectory moving_block_resample(const Trajectory& traj, std::size_t block_len, RandomStream& rng) {
  const std::size_t T = traj.size();
  if (block_len < 1 || block_len > T)
    throw InvalidInput(fmt::format("moving_block_resample: block length {} outside [1, {}]", block_len, T));
  const std::size_t windows = T - block_len + 1;
  const std::size_t blocks = (T + block_len - 1) / block_len;
  Trajectory out;
  out.steps.reserve(blocks * block_len);
  for (std::size_t b = 0; b < blocks; ++b) {
    const std::size_t start = rng.uniform_index(windows);
    const auto first = traj.steps.begin() + static_cast<std::ptrdiff_t>(start);
    out.steps.insert(out.steps.end(), first, first + static_cast<std::ptrdiff_t>(block_len));
  }
  out.steps.resize(T);
  return out;
}

BootstrapInterval bootstrap_ci(const Trajectory& traj, const std::function<double(const Trajectory&)>& statistic,
                               std::size_t draws, std::size_t block_len, double z, RandomStream& rng,
                               std::size_t max_retries) {
  if (draws < 2) throw InvalidInput("bootstrap_ci: need at least two draws");
  const std::uint64_t base = rng.next_u64();
  std::vector<double> values(draws);
  for (std::size_t b = 0; b < draws; ++b) {
    for (std::size_t attempt = 0;; ++attempt) {
      RandomStream draw_rng(base, {b, attempt});
      const Trajectory resample = moving_block_resample(traj, block_len, draw_rng);
      try {
        values[b] = statistic(resample);
        break;
      } catch (const NumericalError& e) {
        if (attempt >= max_retries)
          throw NumericalError(fmt::format("bootstrap_ci: draw {} failed {} times: {}", b, attempt + 1, e.what()));
      }
    }
  }
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(draws);
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(draws - 1));
  return {mean, sd, mean - z * sd, mean + z * sd};
}

std::size_t lepski_index(std::span<const BootstrapInterval> intervals) {
  if (intervals.empty()) throw InvalidInput("lepski_index: no intervals");
  double lo = intervals[0].lo;
  double hi = intervals[0].hi;
  std::size_t selected = 0;
  for (std::size_t g = 1; g < intervals.size(); ++g) {
    lo = std::max(lo, intervals[g].lo);
    hi = std::min(hi, intervals[g].hi);
    if (lo > hi) break;
    selected = g;
  }
  return selected;
}

LepskiOutcome lepski_select(const Trajectory& traj, const LepskiConfig& config, const TruncatedEstimator& estimator,
                            RandomStream& rng) {
  config.validate(traj.size());
  const std::size_t len = config.effective_block_len(traj.size());
  LepskiOutcome out;
  out.grid = config.grid;
  for (const auto& sched : config.grid) {
    out.intervals.push_back(bootstrap_ci(
        traj, [&](const Trajectory& resample) { return estimator(resample, sched); }, config.draws, len, config.z,
        rng));
    out.estimates.push_back(estimator(traj, sched));
  }
  out.selected_index = lepski_index(out.intervals);
  return out;
}

}  // namespace tdr
