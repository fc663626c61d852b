#include "core/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>
#include <string>

#include "core/error.hpp"
#include "core/io.hpp"

namespace mlada {

const std::vector<int>* Dataset::scoring_labels() const {
  if (labels) return &*labels;
  if (held_out_labels) return &*held_out_labels;
  return nullptr;
}

void Dataset::validate() const {
  for (const auto* ls : {&labels, &held_out_labels}) {
    if (!*ls) continue;
    if ((*ls)->size() != size()) throw DataError("label count differs from row count");
    for (int y : **ls) {
      if (y < 0 || static_cast<std::size_t>(y) >= classes) {
        throw DataError("label " + std::to_string(y) + " outside [0, " + std::to_string(classes) + ")");
      }
    }
  }
}

Dataset as_unlabeled_target(Dataset ds) {
  if (ds.labels) {
    ds.held_out_labels = std::move(ds.labels);
    ds.labels.reset();
  }
  ds.domain = Domain::target;
  return ds;
}

DomainPair gen_shifted_blobs(std::size_t classes, std::size_t n_per_class, std::size_t dim,
                             const ShiftSpec& shift, std::uint64_t seed) {
  if (classes < 2) throw UsageError("blobs need at least 2 classes");
  if (dim < 2) throw UsageError("blobs need at least 2 dimensions");
  if (n_per_class == 0) throw UsageError("n_per_class must be positive");
  if (!(shift.scale > 0.0)) throw UsageError("shift scale must be positive");
  if (!(shift.noise_sigma >= 0.0)) throw UsageError("noise_sigma must be non-negative");
  if (!shift.translation.empty() && shift.translation.size() != dim) {
    throw UsageError("translation has " + std::to_string(shift.translation.size()) +
                     " components for dimension " + std::to_string(dim));
  }

  constexpr double kRadius = 4.0;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = classes * n_per_class;
  const double cos_r = std::cos(shift.rotation);
  const double sin_r = std::sin(shift.rotation);

  auto centre = [&](std::size_t c, std::size_t k) {
    const double angle = 2.0 * std::numbers::pi * static_cast<double>(c) / static_cast<double>(classes);
    if (k == 0) return kRadius * std::cos(angle);
    if (k == 1) return kRadius * std::sin(angle);
    return 0.0;
  };

  DomainPair out;
  for (Dataset* ds : {&out.source, &out.target}) {
    ds->features = Tensor(n, dim);
    ds->classes = classes;
    std::vector<int> labels(n);
    for (std::size_t c = 0; c < classes; ++c) {
      for (std::size_t i = 0; i < n_per_class; ++i) {
        const std::size_t r = c * n_per_class + i;
        labels[r] = static_cast<int>(c);
        auto row = ds->features.row(r);
        for (std::size_t k = 0; k < dim; ++k) row[k] = centre(c, k) + normal(rng);
      }
    }
    if (ds == &out.source) {
      ds->labels = std::move(labels);
      ds->domain = Domain::source;
    } else {
      ds->held_out_labels = std::move(labels);
      ds->domain = Domain::target;
    }
  }

  Tensor& t = out.target.features;
  for (std::size_t r = 0; r < n; ++r) {
    auto row = t.row(r);
    const double x = row[0], y = row[1];
    row[0] = cos_r * x - sin_r * y;
    row[1] = sin_r * x + cos_r * y;
    for (std::size_t k = 0; k < dim; ++k) {
      row[k] *= shift.scale;
      if (!shift.translation.empty()) row[k] += shift.translation[k];
      if (shift.noise_sigma > 0.0) row[k] += shift.noise_sigma * normal(rng);
    }
  }
  return out;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto not_space = [](char c) { return c != ' ' && c != '\t' && c != '\r'; };
  while (!s.empty() && !not_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && !not_space(s.back())) s.remove_suffix(1);
  return s;
}

double parse_real(std::string_view tok, std::size_t line) {
  tok = trim(tok);
  double v = 0.0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (tok.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw ParseError("'" + std::string(tok) + "' is not a finite number", line);
  }
  return v;
}

int parse_label(std::string_view tok, std::size_t line) {
  tok = trim(tok);
  int v = 0;
  const char* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(tok.data(), end, v);
  if (tok.empty() || ec != std::errc() || ptr != end || v < 0) {
    throw ParseError("'" + std::string(tok) + "' is not a non-negative integer label", line);
  }
  return v;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, bool labeled, bool skip_header) {
  const std::string text = read_text_file(path);
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  std::size_t width = 0;
  std::vector<double> values;
  std::vector<int> labels;
  std::vector<std::string_view> fields;

  while (std::getline(in, raw)) {
    ++line_no;
    if (skip_header && line_no == 1) continue;
    const std::string_view line = trim(raw);
    if (line.empty()) continue;
    fields.clear();
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    const std::size_t feature_count = labeled ? fields.size() - 1 : fields.size();
    if (feature_count == 0) throw ParseError("row has no feature columns", line_no);
    if (width == 0) {
      width = fields.size();
    } else if (fields.size() != width) {
      throw ParseError("expected " + std::to_string(width) + " columns, found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (std::size_t i = 0; i < feature_count; ++i) values.push_back(parse_real(fields[i], line_no));
    if (labeled) labels.push_back(parse_label(fields.back(), line_no));
  }
  if (width == 0) throw UsageError(path.string() + " contains no data rows");

  Dataset ds;
  const std::size_t dim = labeled ? width - 1 : width;
  const std::size_t rows = values.size() / dim;
  ds.features = Tensor(rows, dim, std::move(values));
  if (labeled) {
    ds.classes = static_cast<std::size_t>(*std::max_element(labels.begin(), labels.end())) + 1;
    ds.labels = std::move(labels);
  }
  return ds;
}

void save_csv(const Dataset& ds, const std::filesystem::path& path) {
  const std::vector<int>* labels = ds.scoring_labels();
  std::string out;
  for (std::size_t r = 0; r < ds.size(); ++r) {
    auto row = ds.features.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      out += format_real(row[c]);
    }
    if (labels) {
      out += ',';
      out += std::to_string((*labels)[r]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

Dataset downsample_source(const Dataset& ds, std::size_t divisor, std::uint64_t seed) {
  if (!ds.labels) throw UsageError("downsample_source needs a labeled dataset");
  if (divisor == 0) throw UsageError("downsample divisor must be at least 1");
  const std::vector<int>& labels = *ds.labels;
  std::vector<std::vector<std::size_t>> by_class(ds.classes);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class.at(static_cast<std::size_t>(labels[i])).push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (auto& members : by_class) {
    const std::size_t quota = (members.size() + divisor - 1) / divisor;
    std::shuffle(members.begin(), members.end(), rng);
    keep.insert(keep.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(quota));
  }
  std::sort(keep.begin(), keep.end());

  Dataset out;
  out.features = ds.features.select_rows(keep);
  out.domain = ds.domain;
  out.classes = ds.classes;
  std::vector<int> kept_labels(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) kept_labels[i] = labels[keep[i]];
  out.labels = std::move(kept_labels);
  if (ds.held_out_labels) {
    std::vector<int> held(keep.size());
    for (std::size_t i = 0; i < keep.size(); ++i) held[i] = (*ds.held_out_labels)[keep[i]];
    out.held_out_labels = std::move(held);
  }
  return out;
}

namespace {

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), stream};
  return std::mt19937_64(seq);
}

}  // namespace

BatchIterator::BatchIterator(const Dataset& source, const Dataset& target, std::size_t batch_size,
                             std::uint64_t seed)
    : source_(&source),
      target_(&target),
      batch_size_(batch_size),
      source_rng_(seeded(seed, 0)),
      target_rng_(seeded(seed, 1)),
      source_order_(source.size()),
      target_order_(target.size()),
      source_pos_(source.size()),
      target_pos_(target.size()) {
  if (batch_size == 0) throw UsageError("batch size must be positive");
  if (batch_size > source.size() || batch_size > target.size()) {
    throw UsageError("batch size " + std::to_string(batch_size) + " exceeds dataset size (source " +
                     std::to_string(source.size()) + ", target " + std::to_string(target.size()) + ")");
  }
  if (!source.labels) throw UsageError("source dataset must be labeled");
  if (source.dim() != target.dim()) throw ShapeError("source and target feature widths differ");
}

Batch BatchIterator::next() {
  const std::size_t b = batch_size_;
  if (source_pos_ + b > source_order_.size()) {
    std::iota(source_order_.begin(), source_order_.end(), std::size_t{0});
    std::shuffle(source_order_.begin(), source_order_.end(), source_rng_);
    source_pos_ = 0;
  }
  if (target_pos_ + b > target_order_.size()) {
    std::iota(target_order_.begin(), target_order_.end(), std::size_t{0});
    std::shuffle(target_order_.begin(), target_order_.end(), target_rng_);
    target_pos_ = 0;
  }
  Batch batch;
  batch.source_indices.assign(source_order_.begin() + static_cast<std::ptrdiff_t>(source_pos_),
                              source_order_.begin() + static_cast<std::ptrdiff_t>(source_pos_ + b));
  batch.target_indices.assign(target_order_.begin() + static_cast<std::ptrdiff_t>(target_pos_),
                              target_order_.begin() + static_cast<std::ptrdiff_t>(target_pos_ + b));
  source_pos_ += b;
  target_pos_ += b;
  batch.source_x = source_->features.select_rows(batch.source_indices);
  batch.target_x = target_->features.select_rows(batch.target_indices);
  batch.source_y.reserve(b);
  for (std::size_t i : batch.source_indices) batch.source_y.push_back((*source_->labels)[i]);
  return batch;
}

}  // namespace mlada
