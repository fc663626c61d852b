#include "core/trainer.hpp"

#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "core/io.hpp"

namespace mlada {

void TrainConfig::validate() const {
  if (!(gamma >= 0.0)) throw UsageError("gamma must be non-negative");
  if (!(lambda >= 0.0)) throw UsageError("lambda must be non-negative");
  if (!(alpha0 > 0.0)) throw UsageError("alpha0 must be positive");
  if (mu && !(*mu >= 0.0)) throw UsageError("mu must be non-negative");
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw UsageError("momentum must lie in [0, 1)");
  if (!(base_lr > 0.0)) throw UsageError("base_lr must be positive");
  if (!(head_lr_multiplier > 0.0)) throw UsageError("head_lr_multiplier must be positive");
  if (max_iters == 0) throw UsageError("max_iters must be at least 1");
  if (!(reversal_scale >= 0.0)) throw UsageError("reversal_scale must be non-negative");
}

double TrainConfig::reversal_at(double progress) const {
  if (reversal_schedule == ReversalSchedule::constant) return reversal_scale;
  return reversal_scale * (2.0 / (1.0 + std::exp(-10.0 * progress)) - 1.0);
}

TrainState TrainState::fresh(ModelParams params) {
  TrainState s;
  s.velocities = params.zeros_like();
  s.params = std::move(params);
  return s;
}

namespace {

// Re-labels numeric failures with the loss component they occurred in.
template <typename F>
auto guarded(const char* component, F&& compute) {
  try {
    return compute();
  } catch (const NumericError& e) {
    throw NumericError(std::string(component) + " is non-finite: " + e.what());
  }
}

void notify(const StepObserver& observer, std::string_view step) {
  if (observer) observer(step);
}

}  // namespace

Objective build_objective(const BoundModel& model, const Batch& batch, const TrainConfig& cfg,
                          std::size_t classes, double reversal, const MarginTable* frozen_margins,
                          const StepObserver& observer) {
  Graph& graph = model.extractor.front().weight.graph();
  Objective obj;

  notify(observer, "classification_loss");
  Var f_s = guarded("l_class", [&] { return forward_mlp(model.extractor, graph.constant(batch.source_x)); });
  obj.l_class = guarded("l_class", [&] {
    return cross_entropy_logits(forward_mlp(model.classifier, f_s), batch.source_y);
  });

  notify(observer, "target_predictions");
  Var f_t = guarded("target predictions", [&] {
    return forward_mlp(model.extractor, graph.constant(batch.target_x));
  });
  Var logits_t = guarded("target predictions", [&] { return forward_mlp(model.classifier, f_t); });

  if (cfg.enable_domain) {
    notify(observer, "domain_loss");
    obj.l_domain = guarded("l_domain", [&] {
      Var d_s = forward_mlp(model.discriminator, grad_reverse(f_s, reversal));
      Var d_t = forward_mlp(model.discriminator, grad_reverse(f_t, reversal));
      return domain_loss(d_s, d_t);
    });
  }

  if (cfg.enable_entropy) {
    notify(observer, "entropy_loss");
    obj.l_entropy = guarded("l_entropy", [&] { return entropy_loss_logits(logits_t); });
  }

  if (cfg.enable_triplet) {
    notify(observer, "margins");
    if (frozen_margins) {
      obj.margins = *frozen_margins;
    } else {
      // Predictions enter the margin as plain data, not as a gradient path.
      const Tensor probs = softmax_rows(logits_t.value());
      obj.margins = dynamic_margins(probs, cfg.alpha0, cfg.mu_for(classes), classes, cfg.margin_mode);
    }
    notify(observer, "triplet_loss");
    obj.l_triplet = guarded("l_triplet", [&] {
      return triplet_loss(forward_mlp(model.metric, f_s), batch.source_y, obj.margins);
    });
  }

  notify(observer, "total_loss");
  obj.total = guarded("total", [&] {
    Var t = *obj.l_class;
    if (obj.l_domain) t = add(t, *obj.l_domain);
    if (obj.l_triplet) t = add(t, mul_scalar(*obj.l_triplet, cfg.gamma));
    if (obj.l_entropy) t = add(t, mul_scalar(*obj.l_entropy, cfg.lambda));
    return t;
  });
  auto value_of = [](const std::optional<Var>& v) { return v ? v->item() : 0.0; };
  obj.breakdown = total_loss(value_of(obj.l_class), value_of(obj.l_domain), value_of(obj.l_triplet),
                             value_of(obj.l_entropy), cfg.gamma, cfg.lambda);
  obj.breakdown.total = obj.total.item();
  return obj;
}

double lr_schedule(double base_lr, double progress) {
  if (!(progress >= 0.0 && progress <= 1.0)) throw UsageError("lr_schedule: progress outside [0, 1]");
  return base_lr / std::pow(1.0 + 10.0 * progress, 0.75);
}

void sgd_momentum(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum) {
  if (!param.same_shape(grad) || !param.same_shape(velocity)) {
    throw ShapeError("sgd_momentum: parameter " + param.shape_string() + ", gradient " +
                     grad.shape_string() + ", velocity " + velocity.shape_string());
  }
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i];
    param[i] -= lr * velocity[i];
  }
}

namespace {

void update_mlp(Mlp& params, const Mlp& grads, Mlp& velocities, double lr, double momentum) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    sgd_momentum(params[i].weight, grads[i].weight, velocities[i].weight, lr, momentum);
    sgd_momentum(params[i].bias, grads[i].bias, velocities[i].bias, lr, momentum);
  }
}

}  // namespace

StepResult train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg,
                      const StepObserver& observer) {
  const std::size_t classes = state.params.classes();
  if (batch.source_x.cols() != state.params.input_dim() || batch.target_x.cols() != state.params.input_dim()) {
    throw ShapeError("batch feature width does not match the extractor input");
  }
  const double progress =
      std::min(1.0, static_cast<double>(state.iteration) / static_cast<double>(cfg.max_iters));

  Graph graph;
  const BoundModel bound = bind(graph, state.params, true);
  const Objective obj =
      build_objective(bound, batch, cfg, classes, cfg.reversal_at(progress), nullptr, observer);

  notify(observer, "update");
  graph.backward(obj.total);
  const ModelParams grads = gradients(bound, state.params);
  const double lr = lr_schedule(cfg.base_lr, progress);
  const double head_lr = lr * cfg.head_lr_multiplier;
  update_mlp(state.params.extractor, grads.extractor, state.velocities.extractor, lr, cfg.momentum);
  update_mlp(state.params.classifier, grads.classifier, state.velocities.classifier, head_lr, cfg.momentum);
  update_mlp(state.params.discriminator, grads.discriminator, state.velocities.discriminator, head_lr,
             cfg.momentum);
  update_mlp(state.params.metric, grads.metric, state.velocities.metric, head_lr, cfg.momentum);

  bool finite = true;
  for_each_tensor(state.params, [&](const Tensor& t) { finite = finite && t.all_finite(); });
  if (!finite) throw NumericError("parameter update produced non-finite values");

  ++state.iteration;
  return {obj.breakdown, obj.margins};
}

std::string MetricsLog::losses_csv() const {
  std::string out = "iter,l_class,l_domain,l_triplet,l_entropy,total\n";
  for (const StepRecord& r : steps) {
    out += std::to_string(r.iter);
    for (double v : {r.losses.l_class, r.losses.l_domain, r.losses.l_triplet, r.losses.l_entropy,
                     r.losses.total}) {
      out += ',';
      out += format_real(v);
    }
    out += '\n';
  }
  return out;
}

std::string MetricsLog::evals_csv() const {
  std::string out = "iter,source_acc,target_acc\n";
  for (const EvalRecord& r : evals) {
    out += std::to_string(r.iter) + ',' + format_real(r.source_acc) + ',' + format_real(r.target_acc) + '\n';
  }
  return out;
}

void MetricsLog::write_losses_csv(const std::filesystem::path& path) const {
  write_text_file(path, losses_csv());
}

void MetricsLog::write_evals_csv(const std::filesystem::path& path) const {
  write_text_file(path, evals_csv());
}

NetworkSpec network_spec_for(const TrainConfig& cfg, std::size_t input_dim, std::size_t classes) {
  NetworkDims dims = cfg.arch;
  dims.input_dim = input_dim;
  dims.classes = classes;
  return NetworkSpec::desk_default(dims);
}

FitResult fit(const TrainConfig& cfg, const Dataset& source, const Dataset& target,
              std::size_t eval_every, const StepObserver& observer) {
  cfg.validate();
  source.validate();
  target.validate();
  if (!source.labeled()) throw UsageError("fit: source dataset must be labeled");
  if (source.classes < 2) throw UsageError("fit: need at least two source classes");
  if (target.held_out_labels && target.classes > source.classes) {
    throw DataError("target carries classes the source does not have");
  }

  FitResult result;
  TrainState state = TrainState::fresh(init_params(network_spec_for(cfg, source.dim(), source.classes), cfg.seed));
  BatchIterator batches(source, target, cfg.batch_size, cfg.seed + 1);
  const std::vector<int>* target_truth = target.scoring_labels();

  for (std::size_t t = 0; t < cfg.max_iters; ++t) {
    const Batch batch = batches.next();
    StepResult step = train_step(state, batch, cfg, observer);
    result.log.steps.push_back({state.iteration, step.losses, std::move(step.margins)});
    if (eval_every > 0 && state.iteration % eval_every == 0) {
      EvalRecord rec;
      rec.iter = state.iteration;
      rec.source_acc = evaluate_accuracy(state.params, source);
      rec.target_acc = target_truth ? evaluate_accuracy(state.params, target.features, *target_truth)
                                    : std::numeric_limits<double>::quiet_NaN();
      result.log.evals.push_back(rec);
    }
  }
  result.params = std::move(state.params);
  return result;
}

double evaluate_accuracy(const ModelParams& params, const Tensor& x, std::span<const int> labels) {
  if (x.rows() == 0) throw UsageError("evaluate_accuracy: empty dataset");
  if (labels.size() != x.rows()) throw ShapeError("evaluate_accuracy: label count differs from rows");
  const std::vector<int> predicted = predict_labels(params, x);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

double evaluate_accuracy(const ModelParams& params, const Dataset& ds) {
  const std::vector<int>* labels = ds.scoring_labels();
  if (!labels) throw UsageError("evaluate_accuracy: dataset carries no labels");
  return evaluate_accuracy(params, ds.features, *labels);
}

}  // namespace mlada
