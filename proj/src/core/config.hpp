#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "core/analysis.hpp"
#include "core/trainer.hpp"

namespace mlada {

// Everything a CLI run needs: the training hyperparameters, where the data
// comes from, and command-specific options.
//
// Seeds: one top-level `seed`. Consumers derive fixed offsets from it:
// parameter init +0, batch sampling +1, blob generation +2, source
// downsampling +3, VAT noise +4. Repeat r of a grid uses seed + 100 r.
struct RunConfig {
  TrainConfig train;
  std::size_t eval_every = 100;

  // Generated blobs.
  std::size_t classes = 3;
  std::size_t n_per_class = 100;
  std::size_t dim = 2;
  double rotation_deg = 35.0;
  std::vector<double> translation;
  double scale = 1.0;
  double noise_sigma = 0.0;

  // File-based data (both paths or neither).
  std::string source_csv;
  std::string target_csv;
  bool csv_header = false;

  std::size_t downsample = 1;
  std::string out_dir = "out";
  std::string params;  // parameter snapshot for eval / perturb / analyze
  std::vector<double> intensities = {0.0, 3.5, 5.0};
  std::size_t repeats = 5;
  std::vector<double> margin_sweep = {1.0, 5.0, 10.0, 20.0};
  PairSpace pair_space = PairSpace::feature;
  PairLabels pair_labels = PairLabels::pseudo;

  // Keys assigned from a file or flag, as opposed to left at their default.
  std::set<std::string> explicit_keys;

  bool uses_csv() const { return !source_csv.empty() || !target_csv.empty(); }

  // Throws UsageError naming the key on unknown keys or malformed values.
  void set(std::string_view key, std::string_view value);
  std::string get(std::string_view key) const;
  // Data-source and cross-key checks.
  void validate() const;
};

std::vector<std::string> config_keys();

// Reads a flat `key = value` file (# comments, blank lines ignored) or a
// manifest.json written by a previous run, applying its values over `cfg`.
void load_config_file(RunConfig& cfg, const std::filesystem::path& path);
RunConfig parse_config(const std::filesystem::path& path);

// Resolved configuration plus command and seed, sufficient to replay the run
// through load_config_file().
std::string manifest_json(const RunConfig& cfg, std::string_view command);

}  // namespace mlada
