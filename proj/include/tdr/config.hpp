#pragma once

#include <filesystem>
#include <iosfwd>

#include "tdr/experiment.hpp"

namespace tdr {

/// Reads an experiment config: one `key = value` per line, grouped in
/// [experiment], [mdp], [policy], [objective], [nuisance] and [estimators]
/// sections, with `#` or `;` comments. Unknown sections or keys, bad values
/// and failed validation all throw ConfigError. See configs/ for examples.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace tdr
