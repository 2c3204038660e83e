#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "hetsis/config.hpp"
#include "hetsis/warnsign.hpp"

namespace hetsis {

const std::vector<std::string>& experiment_names();

struct ExperimentSpec {
  std::string name;
  KeyValueConfig params;  // dotted overrides, e.g. sim.dt or sweep.p
  std::uint64_t seed = 1;
  std::size_t paths = 100;
  std::filesystem::path output_dir = "out";
  unsigned threads = 0;  // does not affect outputs

  /// Reads `experiment`, `seed`, `paths`, `output_dir` and `threads`; every
  /// other key is kept as a parameter override.
  static ExperimentSpec from_config(const KeyValueConfig& config);
  void validate() const;
};

/// Full parameter set for an experiment: the built-in defaults with the
/// overrides applied on top. Unknown override keys are rejected.
KeyValueConfig resolve_parameters(const std::string& name, const KeyValueConfig& overrides);

struct ManifestEntry {
  std::string file;
  std::uintmax_t bytes = 0;
  std::uint32_t crc32 = 0;
};

struct RunRecord {
  std::uint32_t spec_hash = 0;
  std::uint64_t seed = 0;
  std::string version;
  std::vector<ManifestEntry> files;
  // In-memory copies of what was written, for callers that want numbers.
  std::vector<std::pair<double, FitResult>> fits;  // keyed by sweep parameter, 0 for single runs
  SweepSummary sweep;
};

inline constexpr const char* kVersionTag = "hetsis-0.1.0";

/// Runs the named experiment and writes its CSV/JSON outputs plus
/// manifest.json into spec.output_dir. Holds a lock file while running.
RunRecord run_experiment(const ExperimentSpec& spec);

/// Parameter list used by the sweeps, e.g. 12 log-spaced integers in [2, 100].
std::vector<double> log_spaced_integers(double lo, double hi, std::size_t count);

}  // namespace hetsis
