#include "mlada/mlada.h"

#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "core/analysis.hpp"
#include "core/config.hpp"
#include "core/error.hpp"
#include "core/experiments.hpp"
#include "core/io.hpp"
#include "core/robustness.hpp"
#include "core/trainer.hpp"

struct mlada_config {
  mlada::RunConfig value;
};

struct mlada_dataset {
  mlada::Dataset value;
};

struct mlada_model {
  mlada::ModelParams value;
};

struct mlada_metrics {
  mlada::MetricsLog value;
};

struct mlada_grid_result {
  std::vector<mlada::SettingSummary> rows;
  std::string table;
};

namespace {

thread_local std::string last_error;

template <typename F>
mlada_status guard(F&& body) {
  try {
    body();
    return MLADA_OK;
  } catch (const mlada::Error& e) {
    last_error = e.what();
    return static_cast<mlada_status>(static_cast<int>(e.kind()));
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
  } catch (const std::exception& e) {
    last_error = e.what();
  } catch (...) {
    last_error = "unknown error";
  }
  return MLADA_ERR_INTERNAL;
}

template <typename T>
void require(const T* p, const char* what) {
  if (p == nullptr) throw mlada::UsageError(std::string(what) + " must not be null");
}

}  // namespace

extern "C" {

const char* mlada_version(void) { return "0.1.0"; }

const char* mlada_last_error(void) { return last_error.c_str(); }

mlada_status mlada_config_create(mlada_config** out) {
  return guard([&] {
    require(out, "out");
    *out = new mlada_config{};
  });
}

void mlada_config_destroy(mlada_config* cfg) { delete cfg; }

mlada_status mlada_config_load_file(mlada_config* cfg, const char* path) {
  return guard([&] {
    require(cfg, "cfg");
    require(path, "path");
    mlada::load_config_file(cfg->value, path);
  });
}

mlada_status mlada_config_set(mlada_config* cfg, const char* key, const char* value) {
  return guard([&] {
    require(cfg, "cfg");
    require(key, "key");
    require(value, "value");
    cfg->value.set(key, value);
  });
}

mlada_status mlada_config_get(const mlada_config* cfg, const char* key, char* buf, size_t buf_len,
                              size_t* needed) {
  return guard([&] {
    require(cfg, "cfg");
    require(key, "key");
    const std::string v = cfg->value.get(key);
    if (needed) *needed = v.size() + 1;
    if (buf == nullptr || buf_len < v.size() + 1) {
      throw mlada::UsageError("buffer too small for config key '" + std::string(key) + "'");
    }
    std::memcpy(buf, v.c_str(), v.size() + 1);
  });
}

mlada_status mlada_config_validate(const mlada_config* cfg) {
  return guard([&] {
    require(cfg, "cfg");
    cfg->value.validate();
  });
}

mlada_status mlada_config_write_manifest(const mlada_config* cfg, const char* command, const char* path) {
  return guard([&] {
    require(cfg, "cfg");
    require(command, "command");
    require(path, "path");
    mlada::write_text_file(path, mlada::manifest_json(cfg->value, command));
  });
}

mlada_status mlada_data_load(const mlada_config* cfg, mlada_dataset** source, mlada_dataset** target) {
  return guard([&] {
    require(cfg, "cfg");
    require(source, "source");
    require(target, "target");
    cfg->value.validate();
    mlada::DomainPair pair = mlada::load_domains(cfg->value, cfg->value.train.seed);
    auto* s = new mlada_dataset{std::move(pair.source)};
    *source = s;
    *target = new mlada_dataset{std::move(pair.target)};
  });
}

mlada_status mlada_dataset_load_csv(const char* path, int labeled, int skip_header, mlada_dataset** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new mlada_dataset{mlada::load_csv(path, labeled != 0, skip_header != 0)};
  });
}

mlada_status mlada_dataset_save_csv(const mlada_dataset* ds, const char* path) {
  return guard([&] {
    require(ds, "ds");
    require(path, "path");
    mlada::save_csv(ds->value, path);
  });
}

mlada_status mlada_dataset_downsample(const mlada_dataset* ds, size_t divisor, uint64_t seed,
                                      mlada_dataset** out) {
  return guard([&] {
    require(ds, "ds");
    require(out, "out");
    *out = new mlada_dataset{mlada::downsample_source(ds->value, divisor, seed)};
  });
}

mlada_status mlada_dataset_info(const mlada_dataset* ds, size_t* rows, size_t* cols, size_t* classes,
                                int* labeled) {
  return guard([&] {
    require(ds, "ds");
    if (rows) *rows = ds->value.size();
    if (cols) *cols = ds->value.dim();
    if (classes) *classes = ds->value.classes;
    if (labeled) *labeled = ds->value.labeled() ? 1 : 0;
  });
}

void mlada_dataset_destroy(mlada_dataset* ds) { delete ds; }

mlada_status mlada_fit(const mlada_config* cfg, const mlada_dataset* source, const mlada_dataset* target,
                       mlada_model** model, mlada_metrics** metrics) {
  return guard([&] {
    require(cfg, "cfg");
    require(source, "source");
    require(target, "target");
    require(model, "model");
    cfg->value.validate();
    mlada::FitResult r = mlada::fit(cfg->value.train, source->value, target->value, cfg->value.eval_every);
    auto* m = new mlada_model{std::move(r.params)};
    if (metrics) {
      try {
        *metrics = new mlada_metrics{std::move(r.log)};
      } catch (...) {
        delete m;
        throw;
      }
    }
    *model = m;
  });
}

mlada_status mlada_metrics_counts(const mlada_metrics* metrics, size_t* steps, size_t* evals) {
  return guard([&] {
    require(metrics, "metrics");
    if (steps) *steps = metrics->value.steps.size();
    if (evals) *evals = metrics->value.evals.size();
  });
}

mlada_status mlada_metrics_write_losses_csv(const mlada_metrics* metrics, const char* path) {
  return guard([&] {
    require(metrics, "metrics");
    require(path, "path");
    metrics->value.write_losses_csv(path);
  });
}

mlada_status mlada_metrics_write_evals_csv(const mlada_metrics* metrics, const char* path) {
  return guard([&] {
    require(metrics, "metrics");
    require(path, "path");
    metrics->value.write_evals_csv(path);
  });
}

void mlada_metrics_destroy(mlada_metrics* metrics) { delete metrics; }

mlada_status mlada_model_save(const mlada_model* model, const char* path) {
  return guard([&] {
    require(model, "model");
    require(path, "path");
    mlada::save_params(model->value, path);
  });
}

mlada_status mlada_model_load(const char* path, mlada_model** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new mlada_model{mlada::load_params(path)};
  });
}

void mlada_model_destroy(mlada_model* model) { delete model; }

mlada_status mlada_evaluate_accuracy(const mlada_model* model, const mlada_dataset* ds, double* accuracy) {
  return guard([&] {
    require(model, "model");
    require(ds, "ds");
    require(accuracy, "accuracy");
    *accuracy = mlada::evaluate_accuracy(model->value, ds->value);
  });
}

mlada_status mlada_evaluate_noisy(const mlada_model* model, const mlada_dataset* target,
                                  const double* intensities, size_t count, uint64_t seed,
                                  size_t batch_size, double* accuracies) {
  return guard([&] {
    require(model, "model");
    require(target, "target");
    if (count > 0) {
      require(intensities, "intensities");
      require(accuracies, "accuracies");
    }
    const auto rows = mlada::evaluate_noisy(model->value, target->value, {intensities, count}, seed, batch_size);
    for (std::size_t i = 0; i < rows.size(); ++i) accuracies[i] = rows[i].accuracy;
  });
}

mlada_status mlada_perturb(const mlada_model* model, const mlada_dataset* target, const mlada_config* cfg,
                           const char* csv_path) {
  return guard([&] {
    require(model, "model");
    require(target, "target");
    require(cfg, "cfg");
    require(csv_path, "csv_path");
    const mlada::RunConfig& c = cfg->value;
    const auto rows = mlada::evaluate_noisy(model->value, target->value, c.intensities, c.train.seed + 4,
                                            c.train.batch_size);
    mlada::write_text_file(csv_path, mlada::robustness_csv(rows));
  });
}

mlada_status mlada_analyze(const mlada_model* model, const mlada_dataset* target, const mlada_config* cfg,
                           const char* report_json_path, const char* report_text_path,
                           const char* embeddings_path) {
  return guard([&] {
    require(model, "model");
    require(target, "target");
    require(cfg, "cfg");
    const mlada::TargetAnalysis a =
        mlada::analyze_target(model->value, target->value, cfg->value.pair_space, cfg->value.pair_labels);
    if (report_json_path) mlada::write_text_file(report_json_path, mlada::report_json(a.report));
    if (report_text_path) mlada::write_text_file(report_text_path, mlada::report_table(a.report));
    if (embeddings_path) mlada::export_embeddings(a.embedding, a.truth, a.predictions, embeddings_path);
  });
}

mlada_status mlada_run_grid(const mlada_config* cfg, mlada_grid grid, mlada_grid_result** out) {
  return guard([&] {
    require(cfg, "cfg");
    require(out, "out");
    std::vector<mlada::Setting> settings;
    switch (grid) {
      case MLADA_GRID_ABLATION: settings = mlada::loss_combinations(); break;
      case MLADA_GRID_MARGINS: settings = mlada::margin_settings(cfg->value.margin_sweep); break;
      default: throw mlada::UsageError("unknown grid kind");
    }
    auto result = std::make_unique<mlada_grid_result>();
    result->rows = mlada::run_grid(cfg->value, settings);
    result->table = mlada::summary_table(result->rows);
    *out = result.release();
  });
}

size_t mlada_grid_size(const mlada_grid_result* result) { return result ? result->rows.size() : 0; }

mlada_status mlada_grid_row(const mlada_grid_result* result, size_t index, const char** name,
                            double* median_source_acc, double* median_target_acc, size_t* diverged) {
  return guard([&] {
    require(result, "result");
    if (index >= result->rows.size()) throw mlada::UsageError("grid row index out of range");
    const mlada::SettingSummary& row = result->rows[index];
    if (name) *name = row.name.c_str();
    if (median_source_acc) *median_source_acc = row.median_source;
    if (median_target_acc) *median_target_acc = row.median_target;
    if (diverged) *diverged = row.diverged_count();
  });
}

mlada_status mlada_grid_write(const mlada_grid_result* result, const char* grid_csv_path,
                              const char* summary_csv_path) {
  return guard([&] {
    require(result, "result");
    if (grid_csv_path) mlada::write_text_file(grid_csv_path, mlada::grid_csv(result->rows));
    if (summary_csv_path) mlada::write_text_file(summary_csv_path, mlada::summary_csv(result->rows));
  });
}

const char* mlada_grid_table(const mlada_grid_result* result) { return result ? result->table.c_str() : ""; }

void mlada_grid_destroy(mlada_grid_result* result) { delete result; }

}  // extern "C"
