#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/networks.hpp"

namespace mlada {

struct NoiseConfig {
  double intensity = 0.0;
  std::uint64_t seed = 0;
};

// Pieces of one VAT draw: standard-normal noise N, pseudo labels from the
// clean input, and the gradient of the pseudo-label cross-entropy taken at
// x + N.
struct VatDirection {
  Tensor noise;
  std::vector<int> pseudo_labels;
  Tensor gradient;
};

VatDirection vat_direction(const ModelParams& params, const Tensor& x, std::uint64_t seed);

// x + intensity * gradient, with the gradient of vat_direction().
Tensor vat_noise(const ModelParams& params, const Tensor& x, const NoiseConfig& cfg);

// Mean cross-entropy of the classifier at x against the given labels.
double pseudo_label_loss(const ModelParams& params, const Tensor& x, std::span<const int> labels);

struct RobustnessRow {
  double intensity = 0.0;
  double accuracy = 0.0;
};

// Perturbs the whole set in chunks of batch_size (batch k uses a noise seed
// derived from (seed, k)) and scores each intensity against the scoring labels.
std::vector<RobustnessRow> evaluate_noisy(const ModelParams& params, const Dataset& target,
                                          std::span<const double> intensities, std::uint64_t seed,
                                          std::size_t batch_size = 32);

std::string robustness_csv(std::span<const RobustnessRow> rows);

}  // namespace mlada
