#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace mlada {

// Per-class triplet margin, indexed by class.
struct MarginTable {
  std::vector<double> alpha;

  std::size_t classes() const noexcept { return alpha.size(); }
  static MarginTable constant(std::size_t classes, double value) {
    return {std::vector<double>(classes, value)};
  }
  friend bool operator==(const MarginTable&, const MarginTable&) = default;
};

// per_group: each class averages the second peaks of the target rows
// pseudo-labelled with it. batch_mean: one average over the whole batch,
// shared by every class.
enum class MarginMode { per_group, batch_mean };

struct LossBreakdown {
  double l_class = 0.0;
  double l_domain = 0.0;
  double l_triplet = 0.0;
  double l_entropy = 0.0;
  double total = 0.0;
};

// total = l_class + l_domain + gamma * l_triplet + lambda * l_entropy
LossBreakdown total_loss(double l_class, double l_domain, double l_triplet, double l_entropy,
                         double gamma, double lambda);
Var total_loss(Var l_class, Var l_domain, Var l_triplet, Var l_entropy, double gamma, double lambda);

// Mean negative log-likelihood of the labelled class; probabilities are
// clamped before the log.
Var cross_entropy(Var probs, std::span<const int> labels);
// Same loss taken from logits through a fused log-softmax.
Var cross_entropy_logits(Var logits, std::span<const int> labels);

// -mean log d_source - mean log(1 - d_target).
Var domain_loss(Var d_source, Var d_target);

// Mean Shannon entropy of the rows (minimised during training).
Var entropy_loss(Var probs);
Var entropy_loss_logits(Var logits);

struct SecondPeak {
  std::size_t pseudo_label = 0;
  double second_prob = 0.0;
};

// Argmax (lowest index on ties) and the largest probability among the other
// classes. Needs at least two classes.
SecondPeak second_peak(std::span<const double> probs);

// alpha[c] = alpha0 + mu * mean second peak of the rows pseudo-labelled c.
// Classes without rows keep alpha0.
MarginTable dynamic_margins(const Tensor& target_probs, double alpha0, double mu,
                            std::size_t classes, MarginMode mode = MarginMode::per_group);

// Batch-hard pair per anchor: farthest same-label sample (excluding the
// anchor) and nearest different-label sample. Ties resolve to the lower index.
struct HardPair {
  std::optional<std::size_t> positive;
  std::optional<std::size_t> negative;
};
std::vector<HardPair> mine_hard_pairs(const Tensor& sq_dist, std::span<const int> labels);

// (1/b) sum_i max(d2(i, p_i) - d2(i, n_i) + alpha[y_i], 0) over anchors with
// both a positive and a negative; the rest contribute zero.
Var triplet_loss(Var metric, std::span<const int> labels, const MarginTable& margins);

// 1 - f.g / (|f| |g|), in [0, 2]. Throws UsageError on a zero vector.
double cosine_distance(std::span<const double> f, std::span<const double> g);

}  // namespace mlada
