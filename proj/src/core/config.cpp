#include "core/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <json.hpp>
#include <sstream>

#include "core/error.hpp"
#include "core/io.hpp"

namespace mlada {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

[[noreturn]] void type_error(std::string_view key, const char* expected, std::string_view value) {
  throw UsageError("config key '" + std::string(key) + "' expects " + expected + ", got '" +
                   std::string(value) + "'");
}

double to_real(std::string_view key, std::string_view v) {
  v = trim(v);
  double out = 0.0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    type_error(key, "a real number", v);
  }
  return out;
}

std::uint64_t to_count(std::string_view key, std::string_view v) {
  v = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    type_error(key, "a non-negative integer", v);
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  v = trim(v);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  type_error(key, "a boolean", v);
}

std::vector<double> to_reals(std::string_view key, std::string_view v) {
  std::vector<double> out;
  v = trim(v);
  if (v.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = v.find(',', start);
    out.push_back(to_real(key, v.substr(start, comma == v.npos ? v.npos : comma - start)));
    if (comma == v.npos) break;
    start = comma + 1;
  }
  return out;
}

std::string join(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i > 0) out += ',';
    out += format_real(xs[i]);
  }
  return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

enum class Group { train, blobs, csv, run };

struct Key {
  const char* name;
  Group group;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Key real_key(const char* name, Group g, T RunConfig::*member) {
  return {name, g, [=](RunConfig& c, std::string_view v) { c.*member = to_real(name, v); },
          [=](const RunConfig& c) { return format_real(c.*member); }};
}

Key train_real(const char* name, double TrainConfig::*member) {
  return {name, Group::train, [=](RunConfig& c, std::string_view v) { c.train.*member = to_real(name, v); },
          [=](const RunConfig& c) { return format_real(c.train.*member); }};
}

Key train_count(const char* name, std::size_t TrainConfig::*member) {
  return {name, Group::train,
          [=](RunConfig& c, std::string_view v) { c.train.*member = static_cast<std::size_t>(to_count(name, v)); },
          [=](const RunConfig& c) { return std::to_string(c.train.*member); }};
}

Key train_flag(const char* name, bool TrainConfig::*member) {
  return {name, Group::train, [=](RunConfig& c, std::string_view v) { c.train.*member = to_bool(name, v); },
          [=](const RunConfig& c) { return bool_text(c.train.*member); }};
}

Key arch_count(const char* name, std::size_t NetworkDims::*member) {
  return {name, Group::train,
          [=](RunConfig& c, std::string_view v) { c.train.arch.*member = static_cast<std::size_t>(to_count(name, v)); },
          [=](const RunConfig& c) { return std::to_string(c.train.arch.*member); }};
}

Key run_count(const char* name, Group g, std::size_t RunConfig::*member) {
  return {name, g, [=](RunConfig& c, std::string_view v) { c.*member = static_cast<std::size_t>(to_count(name, v)); },
          [=](const RunConfig& c) { return std::to_string(c.*member); }};
}

Key run_text(const char* name, Group g, std::string RunConfig::*member) {
  return {name, g, [=](RunConfig& c, std::string_view v) { c.*member = std::string(trim(v)); },
          [=](const RunConfig& c) { return c.*member; }};
}

Key run_reals(const char* name, Group g, std::vector<double> RunConfig::*member) {
  return {name, g, [=](RunConfig& c, std::string_view v) { c.*member = to_reals(name, v); },
          [=](const RunConfig& c) { return join(c.*member); }};
}

const std::vector<Key>& key_table() {
  static const std::vector<Key> keys = [] {
    std::vector<Key> k;
    k.push_back(train_real("gamma", &TrainConfig::gamma));
    k.push_back(train_real("lambda", &TrainConfig::lambda));
    k.push_back(train_real("alpha0", &TrainConfig::alpha0));
    k.push_back({"mu", Group::train,
                 [](RunConfig& c, std::string_view v) {
                   if (trim(v) == "auto") {
                     c.train.mu.reset();
                   } else {
                     c.train.mu = to_real("mu", v);
                   }
                 },
                 [](const RunConfig& c) { return c.train.mu ? format_real(*c.train.mu) : std::string("auto"); }});
    k.push_back(train_count("batch_size", &TrainConfig::batch_size));
    k.push_back(train_real("momentum", &TrainConfig::momentum));
    k.push_back(train_real("base_lr", &TrainConfig::base_lr));
    k.push_back(train_real("head_lr_multiplier", &TrainConfig::head_lr_multiplier));
    k.push_back(train_count("max_iters", &TrainConfig::max_iters));
    k.push_back({"seed", Group::train,
                 [](RunConfig& c, std::string_view v) { c.train.seed = to_count("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.train.seed); }});
    k.push_back({"reversal_schedule", Group::train,
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v == "constant") {
                     c.train.reversal_schedule = ReversalSchedule::constant;
                   } else if (v == "dann_ramp") {
                     c.train.reversal_schedule = ReversalSchedule::dann_ramp;
                   } else {
                     type_error("reversal_schedule", "constant or dann_ramp", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.reversal_schedule == ReversalSchedule::constant ? "constant"
                                                                                              : "dann_ramp");
                 }});
    k.push_back(train_real("reversal_scale", &TrainConfig::reversal_scale));
    k.push_back({"margin_mode", Group::train,
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v == "per_group") {
                     c.train.margin_mode = MarginMode::per_group;
                   } else if (v == "batch_mean") {
                     c.train.margin_mode = MarginMode::batch_mean;
                   } else {
                     type_error("margin_mode", "per_group or batch_mean", v);
                   }
                 },
                 [](const RunConfig& c) {
                   return std::string(c.train.margin_mode == MarginMode::per_group ? "per_group" : "batch_mean");
                 }});
    k.push_back(train_flag("enable_domain", &TrainConfig::enable_domain));
    k.push_back(train_flag("enable_triplet", &TrainConfig::enable_triplet));
    k.push_back(train_flag("enable_entropy", &TrainConfig::enable_entropy));
    k.push_back(arch_count("feature_hidden", &NetworkDims::feature_hidden));
    k.push_back(arch_count("feature_dim", &NetworkDims::feature_dim));
    k.push_back(arch_count("head_hidden", &NetworkDims::head_hidden));
    k.push_back(arch_count("metric_dim", &NetworkDims::metric_dim));
    k.push_back(run_count("eval_every", Group::train, &RunConfig::eval_every));

    k.push_back(run_count("classes", Group::blobs, &RunConfig::classes));
    k.push_back(run_count("n_per_class", Group::blobs, &RunConfig::n_per_class));
    k.push_back(run_count("dim", Group::blobs, &RunConfig::dim));
    k.push_back(real_key("rotation_deg", Group::blobs, &RunConfig::rotation_deg));
    k.push_back(run_reals("translation", Group::blobs, &RunConfig::translation));
    k.push_back(real_key("scale", Group::blobs, &RunConfig::scale));
    k.push_back(real_key("noise_sigma", Group::blobs, &RunConfig::noise_sigma));

    k.push_back(run_text("source_csv", Group::csv, &RunConfig::source_csv));
    k.push_back(run_text("target_csv", Group::csv, &RunConfig::target_csv));
    k.push_back({"csv_header", Group::csv,
                 [](RunConfig& c, std::string_view v) { c.csv_header = to_bool("csv_header", v); },
                 [](const RunConfig& c) { return bool_text(c.csv_header); }});

    k.push_back(run_count("downsample", Group::run, &RunConfig::downsample));
    k.push_back(run_text("out_dir", Group::run, &RunConfig::out_dir));
    k.push_back(run_text("params", Group::run, &RunConfig::params));
    k.push_back(run_reals("intensities", Group::run, &RunConfig::intensities));
    k.push_back(run_count("repeats", Group::run, &RunConfig::repeats));
    k.push_back(run_reals("margin_sweep", Group::run, &RunConfig::margin_sweep));
    k.push_back({"pair_space", Group::run,
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v == "feature") {
                     c.pair_space = PairSpace::feature;
                   } else if (v == "metric") {
                     c.pair_space = PairSpace::metric;
                   } else {
                     type_error("pair_space", "feature or metric", v);
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.pair_space == PairSpace::feature ? "feature" : "metric"); }});
    k.push_back({"pair_labels", Group::run,
                 [](RunConfig& c, std::string_view v) {
                   v = trim(v);
                   if (v == "pseudo") {
                     c.pair_labels = PairLabels::pseudo;
                   } else if (v == "truth") {
                     c.pair_labels = PairLabels::truth;
                   } else {
                     type_error("pair_labels", "pseudo or truth", v);
                   }
                 },
                 [](const RunConfig& c) { return std::string(c.pair_labels == PairLabels::pseudo ? "pseudo" : "truth"); }});
    return k;
  }();
  return keys;
}

const Key& find_key(std::string_view name) {
  const auto& keys = key_table();
  auto it = std::find_if(keys.begin(), keys.end(), [&](const Key& k) { return name == k.name; });
  if (it == keys.end()) throw UsageError("unknown config key '" + std::string(name) + "'");
  return *it;
}

}  // namespace

void RunConfig::set(std::string_view key, std::string_view value) {
  const Key& k = find_key(trim(key));
  k.set(*this, value);
  explicit_keys.insert(k.name);
}

std::string RunConfig::get(std::string_view key) const { return find_key(trim(key)).get(*this); }

void RunConfig::validate() const {
  train.validate();
  if (source_csv.empty() != target_csv.empty()) {
    throw UsageError("source_csv and target_csv must be given together");
  }
  if (uses_csv()) {
    for (const Key& k : key_table()) {
      if (k.group == Group::blobs && explicit_keys.count(k.name)) {
        throw UsageError("config key '" + std::string(k.name) +
                         "' configures generated data but CSV inputs are also given; choose one data source");
      }
    }
  }
  if (downsample == 0) throw UsageError("config key 'downsample' must be at least 1");
  if (repeats == 0) throw UsageError("config key 'repeats' must be at least 1");
  for (double in : intensities) {
    if (in < 0.0) throw UsageError("config key 'intensities' must hold non-negative values");
  }
  for (double a : margin_sweep) {
    if (!(a > 0.0)) throw UsageError("config key 'margin_sweep' must hold positive values");
  }
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Key& k : key_table()) out.emplace_back(k.name);
  return out;
}

void load_config_file(RunConfig& cfg, const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path.string());
  const std::string text = read_text_file(path);
  const std::string_view body = trim(text);
  if (!body.empty() && body.front() == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(path.string() + ": invalid manifest JSON: " + e.what());
    }
    if (!j.contains("config") || !j["config"].is_object()) {
      throw UsageError(path.string() + ": manifest has no \"config\" object");
    }
    for (const auto& [key, value] : j["config"].items()) {
      cfg.set(key, value.is_string() ? value.get<std::string>() : value.dump());
    }
    return;
  }
  std::istringstream in(text);
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != line.npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == line.npos) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      cfg.set(line.substr(0, eq), line.substr(eq + 1));
    } catch (const UsageError& e) {
      throw UsageError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RunConfig parse_config(const std::filesystem::path& path) {
  RunConfig cfg;
  load_config_file(cfg, path);
  return cfg;
}

std::string manifest_json(const RunConfig& cfg, std::string_view command) {
  nlohmann::ordered_json j;
  j["tool"] = "mlada";
  j["command"] = std::string(command);
  j["seed"] = cfg.train.seed;
  nlohmann::ordered_json values = nlohmann::ordered_json::object();
  for (const Key& k : key_table()) {
    // out_dir only says where files land; the rest determines their contents.
    if (std::string_view(k.name) == "out_dir") continue;
    if (k.group == Group::blobs && cfg.uses_csv()) continue;
    if (k.group == Group::csv && !cfg.uses_csv()) continue;
    values[k.name] = k.get(cfg);
  }
  j["config"] = std::move(values);
  return j.dump(2) + "\n";
}

}  // namespace mlada
