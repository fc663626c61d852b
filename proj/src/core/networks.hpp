#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "core/tensor.hpp"

namespace mlada {

enum class Activation : std::uint32_t { none = 0, relu = 1, sigmoid = 2 };

struct LayerSpec {
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  Activation activation = Activation::none;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Weight is in_dim x out_dim so a batch (rows = samples) multiplies on the left.
struct Layer {
  Tensor weight;
  Tensor bias;  // 1 x out_dim
  Activation activation = Activation::none;

  LayerSpec spec() const { return {weight.rows(), weight.cols(), activation}; }
  friend bool operator==(const Layer&, const Layer&) = default;
};

using Mlp = std::vector<Layer>;

// Widths of the desk-scale architecture. The extractor is two relu layers
// (input -> feature_hidden -> feature_dim); each head is one relu hidden layer
// of head_hidden units followed by its output layer.
struct NetworkDims {
  std::size_t input_dim = 2;
  std::size_t classes = 3;
  std::size_t feature_hidden = 64;
  std::size_t feature_dim = 32;
  std::size_t head_hidden = 32;
  std::size_t metric_dim = 16;
};

struct NetworkSpec {
  std::vector<LayerSpec> extractor;
  std::vector<LayerSpec> classifier;
  std::vector<LayerSpec> discriminator;
  std::vector<LayerSpec> metric;

  static NetworkSpec desk_default(const NetworkDims& dims);
  // Throws UsageError on zero dims, broken chains, or heads that do not
  // consume the extractor's output width.
  void validate() const;
};

// F (extractor), C (classifier), D (discriminator), G (metric generator).
struct ModelParams {
  Mlp extractor;
  Mlp classifier;
  Mlp discriminator;
  Mlp metric;

  NetworkSpec spec() const;
  std::size_t input_dim() const { return extractor.front().weight.rows(); }
  std::size_t classes() const { return classifier.back().weight.cols(); }
  // Same shapes, all values zero.
  ModelParams zeros_like() const;
  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Visits every weight and bias in declaration order: F, C, D, G, and within
// each layer the weight before the bias.
void for_each_tensor(ModelParams& params, const std::function<void(Tensor&)>& fn);
void for_each_tensor(const ModelParams& params, const std::function<void(const Tensor&)>& fn);
// Visits matching tensors of two same-shaped parameter sets.
void for_each_tensor_pair(ModelParams& a, const ModelParams& b,
                          const std::function<void(Tensor&, const Tensor&)>& fn);

// Weights uniform in +-sqrt(6 / (in + out)), biases zero.
ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed);

struct BoundLayer {
  Var weight;
  Var bias;
  Activation activation = Activation::none;
};

using BoundMlp = std::vector<BoundLayer>;

struct BoundModel {
  BoundMlp extractor;
  BoundMlp classifier;
  BoundMlp discriminator;
  BoundMlp metric;
};

// Places parameter leaves on the graph.
BoundMlp bind(Graph& graph, const Mlp& mlp, bool requires_grad);
BoundModel bind(Graph& graph, const ModelParams& params, bool requires_grad);

Var forward_mlp(std::span<const BoundLayer> layers, Var x);

// Collects the adjoints of a bound model into parameter-shaped tensors.
// Parameters the backward pass did not reach come back as zeros.
ModelParams gradients(const BoundModel& bound, const ModelParams& like);

// Inference helpers (no gradient tracking).
Tensor extract_features(const ModelParams& params, const Tensor& x);
Tensor class_probabilities(const ModelParams& params, const Tensor& x);
Tensor metric_embedding(const ModelParams& params, const Tensor& x);
std::vector<int> predict_labels(const ModelParams& params, const Tensor& x);

// Binary snapshot: "MLAD1", u32 sub-network count, then per sub-network a u32
// layer count and per layer (u32 in, u32 out, u32 activation); then every
// tensor of for_each_tensor order as little-endian IEEE-754 doubles.
void save_params(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_params(const std::filesystem::path& path);

}  // namespace mlada
