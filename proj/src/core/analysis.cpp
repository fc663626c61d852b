#include "core/analysis.hpp"

#include <cmath>
#include <cstdio>
#include <json.hpp>

#include "core/error.hpp"
#include "core/io.hpp"
#include "core/losses.hpp"

namespace mlada {

std::size_t most_uncertain(const Tensor& probs) {
  if (probs.rows() == 0) throw UsageError("most_uncertain: no rows");
  std::size_t best = 0;
  double best_prob = second_peak(probs.row(0)).second_prob;
  for (std::size_t r = 1; r < probs.rows(); ++r) {
    const double p = second_peak(probs.row(r)).second_prob;
    if (p > best_prob) {
      best = r;
      best_prob = p;
    }
  }
  return best;
}

CriticalPairReport critical_pairs(const Tensor& features, std::span<const int> labels,
                                  std::size_t anchor) {
  if (labels.size() != features.rows()) throw ShapeError("critical_pairs: label count differs from rows");
  if (anchor >= features.rows()) throw UsageError("critical_pairs: anchor out of range");
  for (std::size_t r = 0; r < features.rows(); ++r) {
    double norm = 0.0;
    for (double v : features.row(r)) norm += v * v;
    if (norm == 0.0) throw NumericError("critical_pairs: feature row " + std::to_string(r) + " has zero norm");
  }

  CriticalPairReport report;
  report.anchor_index = anchor;
  report.anchor_label = labels[anchor];
  report.anchor_second_prob = std::nan("");
  const auto a = features.row(anchor);
  for (std::size_t r = 0; r < features.rows(); ++r) {
    if (r == anchor) continue;
    const double d = cosine_distance(a, features.row(r));
    if (labels[r] == labels[anchor]) {
      if (!report.farthest_positive || d > report.farthest_positive->distance) {
        report.farthest_positive = PairHit{r, labels[r], d};
      }
    } else if (!report.nearest_negative || d < report.nearest_negative->distance) {
      report.nearest_negative = PairHit{r, labels[r], d};
    }
  }
  return report;
}

std::string report_json(const CriticalPairReport& report) {
  using nlohmann::json;
  auto hit = [](const std::optional<PairHit>& h) -> json {
    if (!h) return nullptr;
    return {{"index", h->index}, {"label", h->label}, {"cosine_distance", h->distance}};
  };
  json j;
  j["anchor"] = {{"index", report.anchor_index},
                 {"label", report.anchor_label},
                 {"second_prob", std::isnan(report.anchor_second_prob) ? json(nullptr)
                                                                       : json(report.anchor_second_prob)}};
  j["farthest_positive"] = hit(report.farthest_positive);
  j["nearest_negative"] = hit(report.nearest_negative);
  return j.dump(2) + "\n";
}

std::string report_table(const CriticalPairReport& report) {
  char buf[160];
  std::string out = "role               index  label  cosine_distance\n";
  std::snprintf(buf, sizeof buf, "anchor          %8zu  %5d  second_prob=%.6f\n", report.anchor_index,
                report.anchor_label, report.anchor_second_prob);
  out += buf;
  auto row = [&](const char* role, const std::optional<PairHit>& h) {
    if (h) {
      std::snprintf(buf, sizeof buf, "%-16s%8zu  %5d  %.6f\n", role, h->index, h->label, h->distance);
    } else {
      std::snprintf(buf, sizeof buf, "%-16s%8s  %5s  %s\n", role, "-", "-", "absent");
    }
    out += buf;
  };
  row("farthest_pos", report.farthest_positive);
  row("nearest_neg", report.nearest_negative);
  return out;
}

void export_embeddings(const Tensor& features, std::span<const int> labels,
                       std::span<const int> predictions, const std::filesystem::path& path) {
  if (labels.size() != features.rows() || predictions.size() != features.rows()) {
    throw ShapeError("export_embeddings: labels, predictions and rows must have equal length");
  }
  std::string out;
  for (std::size_t c = 0; c < features.cols(); ++c) out += 'f' + std::to_string(c) + ',';
  out += "true_label,predicted_label\n";
  for (std::size_t r = 0; r < features.rows(); ++r) {
    for (double v : features.row(r)) out += format_real(v) + ',';
    out += std::to_string(labels[r]) + ',' + std::to_string(predictions[r]) + '\n';
  }
  write_text_file(path, out);
}

TargetAnalysis analyze_target(const ModelParams& params, const Dataset& target, PairSpace space,
                              PairLabels grouping) {
  if (target.size() == 0) throw UsageError("analyze: empty target set");
  TargetAnalysis out;
  const Tensor probs = class_probabilities(params, target.features);
  out.predictions.resize(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) out.predictions[r] = static_cast<int>(argmax(probs.row(r)));

  const std::vector<int>* truth = target.scoring_labels();
  out.truth = truth ? *truth : std::vector<int>(target.size(), -1);
  if (grouping == PairLabels::truth && !truth) {
    throw UsageError("analyze: true-label grouping needs a labeled target");
  }

  out.embedding = space == PairSpace::feature ? extract_features(params, target.features)
                                              : metric_embedding(params, target.features);
  const std::size_t anchor = most_uncertain(probs);
  const std::vector<int>& groups = grouping == PairLabels::pseudo ? out.predictions : *truth;
  out.report = critical_pairs(out.embedding, groups, anchor);
  out.report.anchor_second_prob = second_peak(probs.row(anchor)).second_prob;
  return out;
}

}  // namespace mlada
