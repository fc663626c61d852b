#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "core/data.hpp"
#include "core/losses.hpp"
#include "core/networks.hpp"

namespace mlada {

enum class ReversalSchedule {
  constant,   // reversal_scale throughout
  dann_ramp,  // reversal_scale * (2 / (1 + exp(-10 p)) - 1)
};

struct TrainConfig {
  double gamma = 0.08;
  double lambda = 0.1;
  double alpha0 = 5.0;
  std::optional<double> mu;  // unset: number of classes
  std::size_t batch_size = 32;
  double momentum = 0.9;
  double base_lr = 0.01;
  double head_lr_multiplier = 10.0;
  std::size_t max_iters = 2000;
  std::uint64_t seed = 0;
  ReversalSchedule reversal_schedule = ReversalSchedule::constant;
  double reversal_scale = 1.0;
  MarginMode margin_mode = MarginMode::per_group;
  bool enable_domain = true;
  bool enable_triplet = true;
  bool enable_entropy = true;
  // input_dim and classes are taken from the data by fit().
  NetworkDims arch;

  void validate() const;
  double mu_for(std::size_t classes) const { return mu.value_or(static_cast<double>(classes)); }
  double reversal_at(double progress) const;
};

struct TrainState {
  ModelParams params;
  ModelParams velocities;
  std::size_t iteration = 0;

  static TrainState fresh(ModelParams params);
};

// Receives the name of each training step as it starts, in execution order.
using StepObserver = std::function<void(std::string_view)>;

// The loss terms of one batch, built on a caller-owned graph.
struct Objective {
  Var total;
  std::optional<Var> l_class, l_domain, l_triplet, l_entropy;
  LossBreakdown breakdown;
  MarginTable margins;
};

// Builds L_Total for a batch. The margin table is computed from detached
// target predictions unless frozen_margins is given, in which case it is used
// as-is (gradient checks hold margins fixed this way).
Objective build_objective(const BoundModel& model, const Batch& batch, const TrainConfig& cfg,
                          std::size_t classes, double reversal,
                          const MarginTable* frozen_margins = nullptr,
                          const StepObserver& observer = {});

struct StepResult {
  LossBreakdown losses;
  MarginTable margins;
};

// One iteration: loss terms, one backward pass, one momentum-SGD update of all
// four sub-networks, iteration incremented.
StepResult train_step(TrainState& state, const Batch& batch, const TrainConfig& cfg,
                      const StepObserver& observer = {});

// base_lr / (1 + 10 p)^0.75, p in [0, 1].
double lr_schedule(double base_lr, double progress);

// velocity = momentum * velocity + grad; param -= lr * velocity.
void sgd_momentum(Tensor& param, const Tensor& grad, Tensor& velocity, double lr, double momentum);

struct StepRecord {
  std::size_t iter = 0;
  LossBreakdown losses;
  MarginTable margins;
};

struct EvalRecord {
  std::size_t iter = 0;
  double source_acc = 0.0;
  double target_acc = 0.0;  // NaN when the target carries no labels
};

struct MetricsLog {
  std::vector<StepRecord> steps;
  std::vector<EvalRecord> evals;

  std::string losses_csv() const;
  std::string evals_csv() const;
  void write_losses_csv(const std::filesystem::path& path) const;
  void write_evals_csv(const std::filesystem::path& path) const;
};

struct FitResult {
  ModelParams params;
  MetricsLog log;
};

// Sub-seeds: parameter init uses seed, batch sampling uses seed + 1.
FitResult fit(const TrainConfig& cfg, const Dataset& source, const Dataset& target,
              std::size_t eval_every, const StepObserver& observer = {});

NetworkSpec network_spec_for(const TrainConfig& cfg, std::size_t input_dim, std::size_t classes);

// Fraction of rows whose argmax prediction equals the scoring label.
double evaluate_accuracy(const ModelParams& params, const Dataset& ds);
double evaluate_accuracy(const ModelParams& params, const Tensor& x, std::span<const int> labels);

}  // namespace mlada
