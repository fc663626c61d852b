#include "core/robustness.hpp"

#include <algorithm>
#include <random>

#include "core/error.hpp"
#include "core/io.hpp"
#include "core/losses.hpp"
#include "core/trainer.hpp"

namespace mlada {

namespace {

std::uint64_t batch_seed(std::uint64_t seed, std::size_t batch) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(batch)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

VatDirection vat_direction(const ModelParams& params, const Tensor& x, std::uint64_t seed) {
  if (x.cols() != params.input_dim()) {
    throw ShapeError("vat_noise: input has " + std::to_string(x.cols()) + " columns, extractor expects " +
                     std::to_string(params.input_dim()));
  }
  VatDirection dir;
  dir.noise = Tensor(x.rows(), x.cols());
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& v : dir.noise.values()) v = normal(rng);

  dir.pseudo_labels = predict_labels(params, x);

  Tensor shifted = x;
  for (std::size_t i = 0; i < shifted.size(); ++i) shifted[i] += dir.noise[i];
  // d/dN of the loss at x + N equals its gradient with respect to the input.
  Graph graph;
  Var input = graph.leaf(std::move(shifted), true);
  Var features = forward_mlp(bind(graph, params.extractor, false), input);
  Var logits = forward_mlp(bind(graph, params.classifier, false), features);
  Var loss = cross_entropy_logits(logits, dir.pseudo_labels);
  graph.backward(loss);
  dir.gradient = input.adjoint();
  if (!dir.gradient.all_finite()) throw NumericError("vat_noise: non-finite gradient");
  return dir;
}

Tensor vat_noise(const ModelParams& params, const Tensor& x, const NoiseConfig& cfg) {
  if (!(cfg.intensity >= 0.0)) throw UsageError("noise intensity must be non-negative");
  const VatDirection dir = vat_direction(params, x, cfg.seed);
  Tensor out = x;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += cfg.intensity * dir.gradient[i];
  return out;
}

double pseudo_label_loss(const ModelParams& params, const Tensor& x, std::span<const int> labels) {
  Graph graph;
  Var features = forward_mlp(bind(graph, params.extractor, false), graph.constant(x));
  Var logits = forward_mlp(bind(graph, params.classifier, false), features);
  return cross_entropy_logits(logits, labels).item();
}

std::vector<RobustnessRow> evaluate_noisy(const ModelParams& params, const Dataset& target,
                                          std::span<const double> intensities, std::uint64_t seed,
                                          std::size_t batch_size) {
  const std::vector<int>* labels = target.scoring_labels();
  if (!labels) throw UsageError("evaluate_noisy: target carries no labels to score against");
  if (target.size() == 0) throw UsageError("evaluate_noisy: empty dataset");
  if (batch_size == 0) throw UsageError("evaluate_noisy: batch size must be positive");
  for (double in : intensities) {
    if (!(in >= 0.0)) throw UsageError("noise intensity must be non-negative");
  }

  // The VAT direction does not depend on the intensity, so compute it once per batch.
  std::vector<std::size_t> starts;
  std::vector<Tensor> clean;
  std::vector<Tensor> grads;
  for (std::size_t start = 0, k = 0; start < target.size(); start += batch_size, ++k) {
    const std::size_t end = std::min(target.size(), start + batch_size);
    std::vector<std::size_t> rows(end - start);
    for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = start + i;
    clean.push_back(target.features.select_rows(rows));
    grads.push_back(vat_direction(params, clean.back(), batch_seed(seed, k)).gradient);
    starts.push_back(start);
  }

  std::vector<RobustnessRow> out;
  for (double intensity : intensities) {
    Tensor noisy(target.size(), target.dim());
    for (std::size_t k = 0; k < clean.size(); ++k) {
      for (std::size_t i = 0; i < clean[k].size(); ++i) {
        noisy[starts[k] * target.dim() + i] = clean[k][i] + intensity * grads[k][i];
      }
    }
    out.push_back({intensity, evaluate_accuracy(params, noisy, *labels)});
  }
  return out;
}

std::string robustness_csv(std::span<const RobustnessRow> rows) {
  std::string out = "intensity,accuracy\n";
  for (const RobustnessRow& r : rows) out += format_real(r.intensity) + ',' + format_real(r.accuracy) + '\n';
  return out;
}

}  // namespace mlada
