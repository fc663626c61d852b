#include "core/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "core/error.hpp"

namespace mlada {

LossBreakdown total_loss(double l_class, double l_domain, double l_triplet, double l_entropy,
                         double gamma, double lambda) {
  if (!(gamma >= 0.0) || !(lambda >= 0.0)) throw UsageError("gamma and lambda must be non-negative");
  LossBreakdown out{l_class, l_domain, l_triplet, l_entropy, 0.0};
  out.total = l_class + l_domain + gamma * l_triplet + lambda * l_entropy;
  return out;
}

Var total_loss(Var l_class, Var l_domain, Var l_triplet, Var l_entropy, double gamma, double lambda) {
  if (!(gamma >= 0.0) || !(lambda >= 0.0)) throw UsageError("gamma and lambda must be non-negative");
  // Same association order as the scalar overload.
  Var t = add(l_class, l_domain);
  t = add(t, mul_scalar(l_triplet, gamma));
  return add(t, mul_scalar(l_entropy, lambda));
}

Var cross_entropy(Var probs, std::span<const int> labels) {
  const std::size_t b = probs.rows();
  if (b == 0) throw UsageError("cross_entropy: empty batch");
  Var picked = pick(probs, labels);
  return mul_scalar(sum(log_clamped(picked)), -1.0 / static_cast<double>(b));
}

Var cross_entropy_logits(Var logits, std::span<const int> labels) {
  const std::size_t b = logits.rows();
  if (b == 0) throw UsageError("cross_entropy: empty batch");
  Var picked = pick(log_softmax_rows(logits), labels);
  return mul_scalar(sum(picked), -1.0 / static_cast<double>(b));
}

namespace {

void require_unit_interval(const Tensor& t, const char* what) {
  if (t.cols() != 1 || t.rows() == 0) {
    throw ShapeError(std::string(what) + " must be a non-empty column, got " + t.shape_string());
  }
  for (double v : t.values()) {
    if (!(v >= 0.0 && v <= 1.0)) throw UsageError(std::string(what) + " outside [0, 1]");
  }
}

}  // namespace

Var domain_loss(Var d_source, Var d_target) {
  require_unit_interval(d_source.value(), "domain_loss: source output");
  require_unit_interval(d_target.value(), "domain_loss: target output");
  Var src = mean(log_clamped(d_source));
  Var tgt = mean(log_clamped(add_scalar(mul_scalar(d_target, -1.0), 1.0)));
  return mul_scalar(add(src, tgt), -1.0);
}

Var entropy_loss(Var probs) {
  const std::size_t b = probs.rows();
  if (b == 0) throw UsageError("entropy_loss: empty batch");
  return mul_scalar(sum(mul(probs, log_clamped(probs))), -1.0 / static_cast<double>(b));
}

Var entropy_loss_logits(Var logits) {
  const std::size_t b = logits.rows();
  if (b == 0) throw UsageError("entropy_loss: empty batch");
  Var p = softmax_rows(logits);
  Var lp = log_softmax_rows(logits);
  return mul_scalar(sum(mul(p, lp)), -1.0 / static_cast<double>(b));
}

SecondPeak second_peak(std::span<const double> probs) {
  if (probs.size() < 2) throw UsageError("second_peak needs at least two classes");
  const std::size_t top = argmax(probs);
  double second = -1.0;
  for (std::size_t c = 0; c < probs.size(); ++c) {
    if (c != top && probs[c] > second) second = probs[c];
  }
  return {top, second};
}

MarginTable dynamic_margins(const Tensor& target_probs, double alpha0, double mu,
                            std::size_t classes, MarginMode mode) {
  if (!(alpha0 > 0.0)) throw UsageError("alpha0 must be positive");
  if (!(mu >= 0.0)) throw UsageError("mu must be non-negative");
  if (target_probs.cols() != classes) {
    throw ShapeError("dynamic_margins: predictions have " + std::to_string(target_probs.cols()) +
                     " columns for " + std::to_string(classes) + " classes");
  }
  MarginTable table = MarginTable::constant(classes, alpha0);
  const std::size_t b = target_probs.rows();
  if (b == 0) return table;

  if (mode == MarginMode::batch_mean) {
    double total = 0.0;
    for (std::size_t r = 0; r < b; ++r) total += second_peak(target_probs.row(r)).second_prob;
    const double value = alpha0 + mu * (total / static_cast<double>(b));
    for (double& a : table.alpha) a = value;
    return table;
  }

  std::vector<double> totals(classes, 0.0);
  std::vector<std::size_t> counts(classes, 0);
  for (std::size_t r = 0; r < b; ++r) {
    const SecondPeak peak = second_peak(target_probs.row(r));
    totals[peak.pseudo_label] += peak.second_prob;
    ++counts[peak.pseudo_label];
  }
  for (std::size_t c = 0; c < classes; ++c) {
    if (counts[c] > 0) table.alpha[c] = alpha0 + mu * (totals[c] / static_cast<double>(counts[c]));
  }
  return table;
}

std::vector<HardPair> mine_hard_pairs(const Tensor& sq_dist, std::span<const int> labels) {
  const std::size_t b = sq_dist.rows();
  if (sq_dist.cols() != b || labels.size() != b) {
    throw ShapeError("mine_hard_pairs: distance matrix " + sq_dist.shape_string() + " with " +
                     std::to_string(labels.size()) + " labels");
  }
  std::vector<HardPair> pairs(b);
  for (std::size_t i = 0; i < b; ++i) {
    for (std::size_t j = 0; j < b; ++j) {
      if (j == i) continue;
      const double d = sq_dist(i, j);
      HardPair& p = pairs[i];
      if (labels[j] == labels[i]) {
        if (!p.positive || d > sq_dist(i, *p.positive)) p.positive = j;
      } else {
        if (!p.negative || d < sq_dist(i, *p.negative)) p.negative = j;
      }
    }
  }
  return pairs;
}

Var triplet_loss(Var metric, std::span<const int> labels, const MarginTable& margins) {
  const std::size_t b = metric.rows();
  if (b == 0) throw UsageError("triplet_loss: empty batch");
  if (labels.size() != b) throw ShapeError("triplet_loss: label count differs from batch size");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= margins.classes()) {
      throw UsageError("triplet_loss: label " + std::to_string(y) + " has no margin");
    }
  }
  Graph& graph = metric.graph();
  Var dist = pairwise_sq_dist(metric);
  const std::vector<HardPair> pairs = mine_hard_pairs(dist.value(), labels);

  std::vector<std::size_t> pos_idx;
  std::vector<std::size_t> neg_idx;
  std::vector<double> alpha;
  for (std::size_t i = 0; i < b; ++i) {
    if (!pairs[i].positive || !pairs[i].negative) continue;
    pos_idx.push_back(i * b + *pairs[i].positive);
    neg_idx.push_back(i * b + *pairs[i].negative);
    alpha.push_back(margins.alpha[static_cast<std::size_t>(labels[i])]);
  }
  const double scale = 1.0 / static_cast<double>(b);
  if (alpha.empty()) return mul_scalar(sum(gather(dist, {})), scale);

  const std::size_t n = alpha.size();
  Var gap = sub(gather(dist, std::move(pos_idx)), gather(dist, std::move(neg_idx)));
  Var hinge = relu(add(gap, graph.constant(Tensor(n, 1, std::move(alpha)))));
  return mul_scalar(sum(hinge), scale);
}

double cosine_distance(std::span<const double> f, std::span<const double> g) {
  if (f.size() != g.size()) throw ShapeError("cosine_distance: vectors differ in length");
  double dot = 0.0, ff = 0.0, gg = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) {
    dot += f[i] * g[i];
    ff += f[i] * f[i];
    gg += g[i] * g[i];
  }
  if (ff == 0.0 || gg == 0.0) throw UsageError("cosine_distance: zero vector");
  const double cosine = std::clamp(dot / (std::sqrt(ff) * std::sqrt(gg)), -1.0, 1.0);
  return 1.0 - cosine;
}

}  // namespace mlada
