#include "core/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numbers>

#include "core/error.hpp"
#include "core/io.hpp"

namespace mlada {

DomainPair load_domains(const RunConfig& cfg, std::uint64_t seed) {
  DomainPair pair;
  if (cfg.uses_csv()) {
    pair.source = load_csv(cfg.source_csv, true, cfg.csv_header);
    pair.target = as_unlabeled_target(load_csv(cfg.target_csv, true, cfg.csv_header));
    pair.target.classes = std::max(pair.target.classes, pair.source.classes);
  } else {
    ShiftSpec shift;
    shift.rotation = cfg.rotation_deg * std::numbers::pi / 180.0;
    shift.translation = cfg.translation;
    shift.scale = cfg.scale;
    shift.noise_sigma = cfg.noise_sigma;
    pair = gen_shifted_blobs(cfg.classes, cfg.n_per_class, cfg.dim, shift, seed + 2);
  }
  if (cfg.downsample > 1) pair.source = downsample_source(pair.source, cfg.downsample, seed + 3);
  return pair;
}

std::vector<Setting> loss_combinations() {
  auto combo = [](std::string name, bool domain, bool triplet, bool entropy) {
    return Setting{std::move(name), [=](TrainConfig& c) {
                     c.enable_domain = domain;
                     c.enable_triplet = triplet;
                     c.enable_entropy = entropy;
                   }};
  };
  return {
      combo("L_C", false, false, false),
      combo("L_C+L_D", true, false, false),
      combo("L_C+gamma*L_T", false, true, false),
      combo("L_C+L_D+gamma*L_T", true, true, false),
      combo("L_C+L_D+lambda*L_E", true, false, true),
      combo("L_C+L_D+gamma*L_T+lambda*L_E", true, true, true),
  };
}

std::vector<Setting> margin_settings(std::span<const double> constants) {
  std::vector<Setting> out;
  for (double a : constants) {
    out.push_back({"constant alpha=" + format_real(a), [a](TrainConfig& c) {
                     c.alpha0 = a;
                     c.mu = 0.0;
                   }});
  }
  out.push_back({"dynamic", [](TrainConfig&) {}});
  return out;
}

double median(std::vector<double> values) {
  if (values.empty()) throw UsageError("median of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::size_t SettingSummary::diverged_count() const {
  return static_cast<std::size_t>(std::count(diverged.begin(), diverged.end(), true));
}

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double finite_median(const std::vector<double>& values) {
  std::vector<double> kept;
  for (double v : values) {
    if (!std::isnan(v)) kept.push_back(v);
  }
  return kept.empty() ? kNaN : median(std::move(kept));
}

}  // namespace

std::vector<SettingSummary> run_grid(const RunConfig& cfg, std::span<const Setting> settings) {
  cfg.validate();
  std::vector<SettingSummary> rows(settings.size());
  for (std::size_t s = 0; s < settings.size(); ++s) rows[s].name = settings[s].name;

  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = cfg.train.seed + 100 * r;
    const DomainPair data = load_domains(cfg, seed);
    for (std::size_t s = 0; s < settings.size(); ++s) {
      TrainConfig tc = cfg.train;
      tc.seed = seed;
      settings[s].apply(tc);
      rows[s].seeds.push_back(seed);
      try {
        const FitResult fitted = fit(tc, data.source, data.target, 0);
        rows[s].source_acc.push_back(evaluate_accuracy(fitted.params, data.source));
        rows[s].target_acc.push_back(evaluate_accuracy(fitted.params, data.target));
        rows[s].diverged.push_back(false);
      } catch (const NumericError&) {
        rows[s].source_acc.push_back(kNaN);
        rows[s].target_acc.push_back(kNaN);
        rows[s].diverged.push_back(true);
      }
    }
  }
  for (SettingSummary& row : rows) {
    row.median_source = finite_median(row.source_acc);
    row.median_target = finite_median(row.target_acc);
  }
  return rows;
}

std::string grid_csv(std::span<const SettingSummary> rows) {
  std::string out = "setting,repeat,seed,source_acc,target_acc,diverged\n";
  for (const SettingSummary& row : rows) {
    for (std::size_t r = 0; r < row.seeds.size(); ++r) {
      out += row.name + ',' + std::to_string(r) + ',' + std::to_string(row.seeds[r]) + ',' +
             format_real(row.source_acc[r]) + ',' + format_real(row.target_acc[r]) + ',' +
             (row.diverged[r] ? "1" : "0") + '\n';
    }
  }
  return out;
}

std::string summary_csv(std::span<const SettingSummary> rows) {
  std::string out = "setting,median_source_acc,median_target_acc,min_target_acc,max_target_acc,diverged\n";
  for (const SettingSummary& row : rows) {
    double lo = kNaN;
    double hi = kNaN;
    for (double v : row.target_acc) {
      if (std::isnan(v)) continue;
      lo = std::isnan(lo) ? v : std::min(lo, v);
      hi = std::isnan(hi) ? v : std::max(hi, v);
    }
    out += row.name + ',' + format_real(row.median_source) + ',' + format_real(row.median_target) + ',' +
           format_real(lo) + ',' + format_real(hi) + ',' + std::to_string(row.diverged_count()) + '\n';
  }
  return out;
}

std::string summary_table(std::span<const SettingSummary> rows) {
  char buf[200];
  std::snprintf(buf, sizeof buf, "%-32s %12s %12s %9s\n", "setting", "source_acc", "target_acc", "diverged");
  std::string out = buf;
  for (const SettingSummary& row : rows) {
    std::snprintf(buf, sizeof buf, "%-32s %11.2f%% %11.2f%% %5zu/%zu\n", row.name.c_str(),
                  100.0 * row.median_source, 100.0 * row.median_target, row.diverged_count(),
                  row.diverged.size());
    out += buf;
  }
  return out;
}

}  // namespace mlada
