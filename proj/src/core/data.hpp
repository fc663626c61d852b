#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <vector>

#include "core/tensor.hpp"

namespace mlada {

enum class Domain { source, target };

struct Dataset {
  Tensor features;
  // Supervision visible to training. Absent for an unlabeled target.
  std::optional<std::vector<int>> labels;
  // Target ground truth, used only when scoring accuracy.
  std::optional<std::vector<int>> held_out_labels;
  Domain domain = Domain::source;
  std::size_t classes = 0;

  std::size_t size() const noexcept { return features.rows(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool labeled() const noexcept { return labels.has_value(); }
  // Labels to score against: supervision if present, else held-out truth.
  const std::vector<int>* scoring_labels() const;
  // Throws DataError when a label is outside [0, classes) or lengths differ.
  void validate() const;
};

// Moves supervision into held_out_labels and tags the set as target.
Dataset as_unlabeled_target(Dataset ds);

struct ShiftSpec {
  double rotation = 0.0;             // radians, in the plane of the first two dims
  std::vector<double> translation;   // empty means zero
  double scale = 1.0;
  double noise_sigma = 0.0;
};

struct DomainPair {
  Dataset source;
  Dataset target;
};

// Source class c is a unit-variance Gaussian centred on a radius-4 circle at
// angle 2*pi*c/K (first two dims). Target rows are fresh draws from the same
// blobs pushed through scale * rotate(x) + translation, plus noise_sigma noise.
DomainPair gen_shifted_blobs(std::size_t classes, std::size_t n_per_class, std::size_t dim,
                             const ShiftSpec& shift, std::uint64_t seed);

// Comma-separated reals; with labeled, the last column is an integer label and
// classes = max label + 1. Blank lines are skipped.
Dataset load_csv(const std::filesystem::path& path, bool labeled, bool skip_header = false);
// Writes features and, when present, the scoring labels as a final column.
void save_csv(const Dataset& ds, const std::filesystem::path& path);

// Keeps ceil(count_c / divisor) randomly chosen rows of each class, in their
// original order.
Dataset downsample_source(const Dataset& ds, std::size_t divisor, std::uint64_t seed);

struct Batch {
  Tensor source_x;
  std::vector<int> source_y;
  Tensor target_x;
  std::vector<std::size_t> source_indices;
  std::vector<std::size_t> target_indices;
};

// Source: seeded shuffle per epoch, consumed in chunks of b, short tail
// dropped. Target: its own shuffle, reshuffled whenever fewer than b rows
// remain, so every batch pairs b source rows with b target rows.
class BatchIterator {
 public:
  BatchIterator(const Dataset& source, const Dataset& target, std::size_t batch_size,
                std::uint64_t seed);

  Batch next();
  std::size_t batches_per_epoch() const noexcept { return source_->size() / batch_size_; }

 private:
  const Dataset* source_;
  const Dataset* target_;
  std::size_t batch_size_;
  std::mt19937_64 source_rng_;
  std::mt19937_64 target_rng_;
  std::vector<std::size_t> source_order_;
  std::vector<std::size_t> target_order_;
  std::size_t source_pos_;
  std::size_t target_pos_;
};

}  // namespace mlada
