#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "core/data.hpp"
#include "core/networks.hpp"

namespace mlada {

// Row with the largest second-peak probability; ties go to the lower index.
std::size_t most_uncertain(const Tensor& probs);

struct PairHit {
  std::size_t index = 0;
  int label = 0;
  double distance = 0.0;  // cosine distance to the anchor
};

struct CriticalPairReport {
  std::size_t anchor_index = 0;
  int anchor_label = 0;
  double anchor_second_prob = 0.0;
  std::optional<PairHit> farthest_positive;
  std::optional<PairHit> nearest_negative;
};

// Farthest same-label row and nearest different-label row from the anchor
// under cosine distance. Ties go to the lower index; a slot with no candidate
// is left empty. Throws NumericError naming a zero-norm row.
CriticalPairReport critical_pairs(const Tensor& features, std::span<const int> labels,
                                  std::size_t anchor);

std::string report_json(const CriticalPairReport& report);
std::string report_table(const CriticalPairReport& report);

// CSV header f0..f{d-1},true_label,predicted_label then one row per sample.
void export_embeddings(const Tensor& features, std::span<const int> labels,
                       std::span<const int> predictions, const std::filesystem::path& path);

enum class PairSpace { feature, metric };
enum class PairLabels { pseudo, truth };

struct TargetAnalysis {
  CriticalPairReport report;
  Tensor embedding;  // rows of the chosen space
  std::vector<int> predictions;
  std::vector<int> truth;  // -1 where unknown
};

// Locates the most uncertain target row and its critical pairs.
TargetAnalysis analyze_target(const ModelParams& params, const Dataset& target, PairSpace space,
                              PairLabels grouping);

}  // namespace mlada
