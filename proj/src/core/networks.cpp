#include "core/networks.hpp"

#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <random>

#include "core/error.hpp"

namespace mlada {

namespace {

constexpr std::array<char, 5> kMagic = {'M', 'L', 'A', 'D', '1'};

void validate_chain(const std::vector<LayerSpec>& layers, const char* name) {
  if (layers.empty()) throw UsageError(std::string(name) + " has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].in_dim == 0 || layers[i].out_dim == 0) {
      throw UsageError(std::string(name) + " layer " + std::to_string(i) + " has a zero dimension");
    }
    if (i > 0 && layers[i].in_dim != layers[i - 1].out_dim) {
      throw UsageError(std::string(name) + " layer " + std::to_string(i) + " expects " +
                       std::to_string(layers[i].in_dim) + " inputs but receives " +
                       std::to_string(layers[i - 1].out_dim));
    }
  }
}

std::vector<LayerSpec> specs_of(const Mlp& mlp) {
  std::vector<LayerSpec> out;
  out.reserve(mlp.size());
  for (const Layer& l : mlp) out.push_back(l.spec());
  return out;
}

Mlp init_mlp(const std::vector<LayerSpec>& specs, std::mt19937_64& rng) {
  Mlp mlp;
  for (const LayerSpec& s : specs) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.in_dim + s.out_dim));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Layer layer{Tensor(s.in_dim, s.out_dim), Tensor(1, s.out_dim), s.activation};
    for (double& w : layer.weight.values()) w = dist(rng);
    mlp.push_back(std::move(layer));
  }
  return mlp;
}

template <typename P, typename F>
void visit(P& params, F&& fn) {
  for (auto* mlp : {&params.extractor, &params.classifier, &params.discriminator, &params.metric}) {
    for (auto& layer : *mlp) {
      fn(layer.weight);
      fn(layer.bias);
    }
  }
}

}  // namespace

NetworkSpec NetworkSpec::desk_default(const NetworkDims& d) {
  NetworkSpec s;
  s.extractor = {{d.input_dim, d.feature_hidden, Activation::relu},
                 {d.feature_hidden, d.feature_dim, Activation::relu}};
  s.classifier = {{d.feature_dim, d.head_hidden, Activation::relu},
                  {d.head_hidden, d.classes, Activation::none}};
  s.discriminator = {{d.feature_dim, d.head_hidden, Activation::relu},
                     {d.head_hidden, 1, Activation::sigmoid}};
  s.metric = {{d.feature_dim, d.head_hidden, Activation::relu},
              {d.head_hidden, d.metric_dim, Activation::none}};
  return s;
}

void NetworkSpec::validate() const {
  validate_chain(extractor, "extractor");
  validate_chain(classifier, "classifier");
  validate_chain(discriminator, "discriminator");
  validate_chain(metric, "metric generator");
  const std::size_t feat = extractor.back().out_dim;
  for (const auto* head : {&classifier, &discriminator, &metric}) {
    if (head->front().in_dim != feat) {
      throw UsageError("head input width " + std::to_string(head->front().in_dim) +
                       " does not match feature width " + std::to_string(feat));
    }
  }
  if (discriminator.back().out_dim != 1) throw UsageError("discriminator must emit one logit");
  if (classifier.back().out_dim < 2) throw UsageError("classifier needs at least two classes");
}

NetworkSpec ModelParams::spec() const {
  return {specs_of(extractor), specs_of(classifier), specs_of(discriminator), specs_of(metric)};
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z = *this;
  for_each_tensor(z, [](Tensor& t) { std::fill(t.values().begin(), t.values().end(), 0.0); });
  return z;
}

void for_each_tensor(ModelParams& params, const std::function<void(Tensor&)>& fn) {
  visit(params, fn);
}

void for_each_tensor(const ModelParams& params, const std::function<void(const Tensor&)>& fn) {
  visit(params, fn);
}

void for_each_tensor_pair(ModelParams& a, const ModelParams& b,
                          const std::function<void(Tensor&, const Tensor&)>& fn) {
  std::vector<const Tensor*> rhs;
  for_each_tensor(b, [&](const Tensor& t) { rhs.push_back(&t); });
  std::size_t i = 0;
  for_each_tensor(a, [&](Tensor& t) {
    if (i >= rhs.size() || !t.same_shape(*rhs[i])) throw ShapeError("parameter sets differ in shape");
    fn(t, *rhs[i++]);
  });
  if (i != rhs.size()) throw ShapeError("parameter sets differ in tensor count");
}

ModelParams init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  ModelParams p;
  p.extractor = init_mlp(spec.extractor, rng);
  p.classifier = init_mlp(spec.classifier, rng);
  p.discriminator = init_mlp(spec.discriminator, rng);
  p.metric = init_mlp(spec.metric, rng);
  return p;
}

BoundMlp bind(Graph& graph, const Mlp& mlp, bool requires_grad) {
  BoundMlp out;
  out.reserve(mlp.size());
  for (const Layer& l : mlp) {
    out.push_back({graph.leaf(l.weight, requires_grad), graph.leaf(l.bias, requires_grad), l.activation});
  }
  return out;
}

BoundModel bind(Graph& graph, const ModelParams& params, bool requires_grad) {
  return {bind(graph, params.extractor, requires_grad), bind(graph, params.classifier, requires_grad),
          bind(graph, params.discriminator, requires_grad), bind(graph, params.metric, requires_grad)};
}

Var forward_mlp(std::span<const BoundLayer> layers, Var x) {
  if (layers.empty()) throw UsageError("forward_mlp: no layers");
  if (x.cols() != layers.front().weight.rows()) {
    throw ShapeError("forward_mlp: input has " + std::to_string(x.cols()) +
                     " columns, first layer expects " + std::to_string(layers.front().weight.rows()));
  }
  Var h = x;
  for (const BoundLayer& l : layers) {
    h = add_row(matmul(h, l.weight), l.bias);
    switch (l.activation) {
      case Activation::relu: h = relu(h); break;
      case Activation::sigmoid: h = sigmoid(h); break;
      case Activation::none: break;
    }
  }
  return h;
}

ModelParams gradients(const BoundModel& bound, const ModelParams& like) {
  ModelParams g = like.zeros_like();
  std::vector<Var> vars;
  for (const auto* mlp : {&bound.extractor, &bound.classifier, &bound.discriminator, &bound.metric}) {
    for (const BoundLayer& l : *mlp) {
      vars.push_back(l.weight);
      vars.push_back(l.bias);
    }
  }
  std::size_t i = 0;
  for_each_tensor(g, [&](Tensor& t) {
    const Tensor& adj = vars.at(i++).adjoint();
    if (!adj.empty()) t = adj;
  });
  return g;
}

Tensor extract_features(const ModelParams& params, const Tensor& x) {
  Graph g;
  return forward_mlp(bind(g, params.extractor, false), g.constant(x)).value();
}

Tensor class_probabilities(const ModelParams& params, const Tensor& x) {
  Graph g;
  Var f = forward_mlp(bind(g, params.extractor, false), g.constant(x));
  return softmax_rows(forward_mlp(bind(g, params.classifier, false), f).value());
}

Tensor metric_embedding(const ModelParams& params, const Tensor& x) {
  Graph g;
  Var f = forward_mlp(bind(g, params.extractor, false), g.constant(x));
  return forward_mlp(bind(g, params.metric, false), f).value();
}

std::vector<int> predict_labels(const ModelParams& params, const Tensor& x) {
  const Tensor probs = class_probabilities(params, x);
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out[r] = static_cast<int>(argmax(probs.row(r)));
  return out;
}

namespace {

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& os, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw DataError("params file truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) throw DataError("params file truncated");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace

void save_params(const ModelParams& params, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kMagic.data(), kMagic.size());
  put_u32(os, 4);
  for (const Mlp* mlp : {&params.extractor, &params.classifier, &params.discriminator, &params.metric}) {
    put_u32(os, static_cast<std::uint32_t>(mlp->size()));
    for (const Layer& l : *mlp) {
      put_u32(os, static_cast<std::uint32_t>(l.weight.rows()));
      put_u32(os, static_cast<std::uint32_t>(l.weight.cols()));
      put_u32(os, static_cast<std::uint32_t>(l.activation));
    }
  }
  for_each_tensor(params, [&](const Tensor& t) {
    for (double v : t.values()) put_f64(os, v);
  });
  if (!os) throw IoError("failed writing " + path.string());
}

ModelParams load_params(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  std::array<char, 5> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw DataError(path.string() + " is not an MLAD1 parameter file");
  }
  if (get_u32(is) != 4) throw DataError("params file must hold four sub-networks");
  NetworkSpec spec;
  for (auto* layers : {&spec.extractor, &spec.classifier, &spec.discriminator, &spec.metric}) {
    const std::uint32_t n = get_u32(is);
    if (n == 0 || n > 1024) throw DataError("implausible layer count in params file");
    for (std::uint32_t i = 0; i < n; ++i) {
      LayerSpec s;
      s.in_dim = get_u32(is);
      s.out_dim = get_u32(is);
      const std::uint32_t act = get_u32(is);
      if (act > 2) throw DataError("unknown activation code in params file");
      s.activation = static_cast<Activation>(act);
      layers->push_back(s);
    }
  }
  try {
    spec.validate();
  } catch (const UsageError& e) {
    throw DataError(std::string("params file: ") + e.what());
  }
  ModelParams p = init_params(spec, 0);
  for_each_tensor(p, [&](Tensor& t) {
    for (double& v : t.values()) v = get_f64(is);
  });
  if (is.peek() != std::char_traits<char>::eof()) throw DataError("trailing bytes in params file");
  return p;
}

}  // namespace mlada
