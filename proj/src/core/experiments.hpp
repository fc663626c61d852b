#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "core/config.hpp"

namespace mlada {

// Source and target for one run: generated blobs (seed + 2) or the CSV pair,
// then source downsampling (seed + 3) when downsample > 1. The target's
// labels are moved to held_out_labels.
DomainPair load_domains(const RunConfig& cfg, std::uint64_t seed);

struct Setting {
  std::string name;
  std::function<void(TrainConfig&)> apply;
};

// The six loss combinations of the ablation grid, smallest first; the last
// one is the full objective.
std::vector<Setting> loss_combinations();
// Constant margins (mu = 0, alpha0 = value) followed by the dynamic margin.
std::vector<Setting> margin_settings(std::span<const double> constants);

struct SettingSummary {
  std::string name;
  std::vector<std::uint64_t> seeds;
  std::vector<double> source_acc;
  std::vector<double> target_acc;
  // Repeats whose training hit a non-finite value; their accuracies are NaN.
  std::vector<bool> diverged;
  // Medians over the repeats that converged; NaN when none did.
  double median_source = 0.0;
  double median_target = 0.0;

  std::size_t diverged_count() const;
};

// Trains every setting for cfg.repeats repeats (repeat r uses seed + 100 r,
// shared by all settings) and scores final accuracies. A run that raises
// NumericError is recorded as diverged instead of aborting the grid.
std::vector<SettingSummary> run_grid(const RunConfig& cfg, std::span<const Setting> settings);

double median(std::vector<double> values);

// setting,repeat,seed,source_acc,target_acc,diverged
std::string grid_csv(std::span<const SettingSummary> rows);
// setting,median_source_acc,median_target_acc,min_target_acc,max_target_acc,diverged
std::string summary_csv(std::span<const SettingSummary> rows);
std::string summary_table(std::span<const SettingSummary> rows);

}  // namespace mlada
