// mlada command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mlada/mlada.h"

namespace {

constexpr const char* kUsage =
    "usage: mlada <command> [--config FILE] [--key value]...\n"
    "commands:\n"
    "  gen-data  write source.csv and target.csv\n"
    "  train     fit a model; write losses.csv, evals.csv, params.bin\n"
    "  eval      score a model (params=FILE, or train first); write evals.csv\n"
    "  perturb   accuracy under VAT noise per intensity; write robustness.csv\n"
    "  analyze   critical pair of the most uncertain target sample; write\n"
    "            report.json, report.txt, embeddings.csv\n"
    "  ablate    loss-combination grid; write ablation.csv, ablation_summary.csv\n"
    "  margins   constant vs dynamic margin grid; write margins.csv,\n"
    "            margins_summary.csv\n"
    "every command writes manifest.json into out_dir.\n"
    "exit codes: 0 ok, 1 internal, 2 usage, 3 data, 4 numeric, 5 io\n";

// Thrown after the cause has been printed; carries the exit code.
struct Exit {
  int code;
};

void check(mlada_status s) {
  if (s != MLADA_OK) {
    std::fprintf(stderr, "mlada: %s\n", mlada_last_error());
    throw Exit{static_cast<int>(s)};
  }
}

[[noreturn]] void usage_error(const std::string& cause) {
  std::fprintf(stderr, "mlada: %s\n", cause.c_str());
  throw Exit{MLADA_ERR_USAGE};
}

template <typename T, void (*Destroy)(T*)>
class Handle {
 public:
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() { Destroy(ptr_); }
  T** out() { return &ptr_; }
  T* get() const { return ptr_; }

 private:
  T* ptr_ = nullptr;
};

using Config = Handle<mlada_config, mlada_config_destroy>;
using Dataset = Handle<mlada_dataset, mlada_dataset_destroy>;
using Model = Handle<mlada_model, mlada_model_destroy>;
using Metrics = Handle<mlada_metrics, mlada_metrics_destroy>;
using Grid = Handle<mlada_grid_result, mlada_grid_destroy>;

std::string get(const mlada_config* cfg, const char* key) {
  size_t needed = 0;
  mlada_config_get(cfg, key, nullptr, 0, &needed);
  std::string value(needed, '\0');
  check(mlada_config_get(cfg, key, value.data(), value.size(), &needed));
  value.resize(needed - 1);
  return value;
}

std::string normalize_key(std::string_view flag) {
  std::string key(flag);
  for (char& c : key) {
    if (c == '-') c = '_';
  }
  return key;
}

// --config FILE is applied first wherever it appears; other flags follow in
// order, so flags win over file values.
void apply_arguments(mlada_config* cfg, const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> overrides;
  std::string config_path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    const std::string& arg = args[i];
    if (arg.rfind("--", 0) != 0 || arg.size() == 2) usage_error("unexpected argument '" + arg + "'");
    std::string name = arg.substr(2);
    std::string value;
    if (const auto eq = name.find('='); eq != std::string::npos) {
      value = name.substr(eq + 1);
      name.resize(eq);
    } else if (name == "header") {
      value = "true";
    } else {
      if (i + 1 >= args.size()) usage_error("flag --" + name + " needs a value");
      value = args[++i];
    }
    if (name == "config") {
      config_path = value;
    } else {
      overrides.emplace_back(normalize_key(name), value);
    }
  }
  if (!config_path.empty()) check(mlada_config_load_file(cfg, config_path.c_str()));
  for (const auto& [key, value] : overrides) check(mlada_config_set(cfg, key.c_str(), value.c_str()));
  check(mlada_config_validate(cfg));
}

std::string in_dir(const std::filesystem::path& dir, const char* name) { return (dir / name).string(); }

// Loads params= when given, otherwise trains on the configured data.
void obtain_model(const mlada_config* cfg, const Dataset& source, const Dataset& target, Model& model) {
  const std::string params = get(cfg, "params");
  if (!params.empty()) {
    check(mlada_model_load(params.c_str(), model.out()));
  } else {
    check(mlada_fit(cfg, source.get(), target.get(), model.out(), nullptr));
  }
}

void run_grid(const mlada_config* cfg, mlada_grid kind, const std::filesystem::path& out, const char* grid_csv,
              const char* summary_csv) {
  Grid grid;
  check(mlada_run_grid(cfg, kind, grid.out()));
  check(mlada_grid_write(grid.get(), in_dir(out, grid_csv).c_str(), in_dir(out, summary_csv).c_str()));
  std::fputs(mlada_grid_table(grid.get()), stdout);
}

int run(const std::string& command, const std::vector<std::string>& args) {
  static const std::vector<std::string> commands = {"gen-data", "train",  "eval",   "perturb",
                                                    "analyze",  "ablate", "margins"};
  bool known = false;
  for (const auto& c : commands) known = known || c == command;
  if (!known) usage_error("unknown command '" + command + "' (try 'mlada help')");

  Config cfg;
  check(mlada_config_create(cfg.out()));
  apply_arguments(cfg.get(), args);

  const std::filesystem::path out = get(cfg.get(), "out_dir");
  std::error_code ec;
  std::filesystem::create_directories(out, ec);
  if (ec) {
    std::fprintf(stderr, "mlada: cannot create output directory '%s': %s\n", out.c_str(), ec.message().c_str());
    return MLADA_ERR_IO;
  }
  check(mlada_config_write_manifest(cfg.get(), command.c_str(), in_dir(out, "manifest.json").c_str()));

  if (command == "ablate") {
    run_grid(cfg.get(), MLADA_GRID_ABLATION, out, "ablation.csv", "ablation_summary.csv");
    return 0;
  }
  if (command == "margins") {
    run_grid(cfg.get(), MLADA_GRID_MARGINS, out, "margins.csv", "margins_summary.csv");
    return 0;
  }

  Dataset source;
  Dataset target;
  check(mlada_data_load(cfg.get(), source.out(), target.out()));

  if (command == "gen-data") {
    check(mlada_dataset_save_csv(source.get(), in_dir(out, "source.csv").c_str()));
    check(mlada_dataset_save_csv(target.get(), in_dir(out, "target.csv").c_str()));
    return 0;
  }

  if (command == "train") {
    Model model;
    Metrics metrics;
    check(mlada_fit(cfg.get(), source.get(), target.get(), model.out(), metrics.out()));
    check(mlada_metrics_write_losses_csv(metrics.get(), in_dir(out, "losses.csv").c_str()));
    check(mlada_metrics_write_evals_csv(metrics.get(), in_dir(out, "evals.csv").c_str()));
    check(mlada_model_save(model.get(), in_dir(out, "params.bin").c_str()));
    double src = 0.0;
    check(mlada_evaluate_accuracy(model.get(), source.get(), &src));
    double tgt = 0.0;
    if (mlada_evaluate_accuracy(model.get(), target.get(), &tgt) == MLADA_OK) {
      std::printf("source_acc %.4f target_acc %.4f\n", src, tgt);
    } else {
      std::printf("source_acc %.4f\n", src);
    }
    return 0;
  }

  Model model;
  obtain_model(cfg.get(), source, target, model);

  if (command == "eval") {
    double src = 0.0;
    double tgt = 0.0;
    check(mlada_evaluate_accuracy(model.get(), source.get(), &src));
    check(mlada_evaluate_accuracy(model.get(), target.get(), &tgt));
    const std::string path = in_dir(out, "evals.csv");
    std::FILE* f = std::fopen(path.c_str(), "w");
    if (f == nullptr) {
      std::fprintf(stderr, "mlada: cannot write '%s'\n", path.c_str());
      return MLADA_ERR_IO;
    }
    std::fprintf(f, "iter,source_acc,target_acc\n0,%.17g,%.17g\n", src, tgt);
    std::fclose(f);
    std::printf("source_acc %.4f target_acc %.4f\n", src, tgt);
    return 0;
  }
  if (command == "perturb") {
    check(mlada_perturb(model.get(), target.get(), cfg.get(), in_dir(out, "robustness.csv").c_str()));
    return 0;
  }
  // analyze
  check(mlada_analyze(model.get(), target.get(), cfg.get(), in_dir(out, "report.json").c_str(),
                      in_dir(out, "report.txt").c_str(), in_dir(out, "embeddings.csv").c_str()));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::fputs(kUsage, stderr);
    return MLADA_ERR_USAGE;
  }
  const std::string command = argv[1];
  if (command == "help" || command == "--help" || command == "-h") {
    std::fputs(kUsage, stdout);
    return 0;
  }
  if (command == "--version") {
    std::printf("mlada %s\n", mlada_version());
    return 0;
  }
  try {
    return run(command, std::vector<std::string>(argv + 2, argv + argc));
  } catch (const Exit& e) {
    return e.code;
  }
}
