#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kv_config.hpp"
#include "unlearn/data.hpp"
#include "unlearn/eval.hpp"
#include "unlearn/unlearn.hpp"

namespace unlearn::tools {

enum class Method { retrain, ft, ga, rl, cl, ws_cl, wss_cl };

std::string to_string(Method method);
Method parse_method(const std::string& name);
// cl, ws-cl and wss-cl are one algorithm with different masks.
std::optional<MaskMode> mask_mode_for(Method method);

struct DatasetChoice {
  enum class Kind { cifar10, cifar100, toy_subset };
  Kind kind = Kind::cifar10;
  std::size_t toy_size = 0;

  std::string name() const;  // "cifar10", "cifar100", "toy-subset(5000)"
  static DatasetChoice parse(const std::string& text);
};

struct ExperimentConfig {
  DatasetChoice dataset;
  Architecture architecture = Architecture::small_cnn;
  std::filesystem::path data_dir;  // empty: UNLEARN_DATA_DIR
  // Generates CIFAR-10-format files into data_dir when none are present.
  bool synthetic = false;
  SyntheticCifarOptions synthetic_options;
  std::uint64_t toy_seed = 0;
  SplitSpec split;
  Method method = Method::wss_cl;
  std::filesystem::path output_dir;
  std::int64_t run_seed = 0;
  TrainConfig train;
  UnlearnConfig unlearn;
  std::uint64_t mia_seed = 0;

  // Relative paths resolve against `base_dir`. Unknown keys are errors.
  static ExperimentConfig from(const KeyValues& kv, const std::filesystem::path& base_dir = {});
  // Every effective setting, suitable for config.lock.
  KeyValues resolved() const;
  // The settings that fix data, split and the original model.
  KeyValues identity() const;
  void validate() const;
  ArchitectureSpec architecture_spec(int num_classes) const;
};

using Logger = std::function<void(const std::string&)>;

struct MethodOutcome {
  Classifier model;
  MetricsReport report;
  std::vector<PhaseReport> phases;
  bool reused = false;  // loaded from an earlier run's checkpoint
};

struct PerClassRow {
  int target_class = 0;
  MetricsReport report;
};

// One output directory = one experiment. Data, split, original model,
// masks and method checkpoints are persisted on first use and reloaded
// afterwards.
class Experiment {
 public:
  explicit Experiment(ExperimentConfig cfg, Logger log = {});

  const ExperimentConfig& config() const { return cfg_; }
  std::filesystem::path path(const std::string& relative) const { return cfg_.output_dir / relative; }

  const DatasetPair& data();
  const ForgetSplit& split();
  // Trains on the full train set unless a checkpoint exists.
  const Classifier& original();
  double original_seconds();

  // Runs (or reloads) a method, evaluates it and writes its checkpoint and
  // report. Reports get gaps when reports/retrain.json exists.
  MethodOutcome run(Method method, const PhaseHooks& hooks = {});
  // Evaluates checkpoints/<name>.ckpt ("original" included) into reports/<name>.json.
  MetricsReport evaluate(const std::string& name);
  // Class-wise forgetting of each class in turn, sharing this experiment's
  // original model. Each class gets its own sub-directory.
  std::vector<PerClassRow> per_class(Method method);

  // Shares the original model checkpoint of another experiment.
  void use_original_from(std::filesystem::path checkpoint) { original_override_ = std::move(checkpoint); }

 private:
  void log(const std::string& line) const;
  void write_lock();
  std::filesystem::path original_checkpoint() const;
  std::optional<MetricsReport> reference_report() const;
  MetricsReport evaluate_model(const Classifier& model, double rte, const std::string& name);

  ExperimentConfig cfg_;
  Logger log_;
  std::optional<DatasetPair> data_;
  std::optional<ForgetSplit> split_;
  std::optional<Classifier> original_;
  double original_seconds_ = 0.0;
  std::filesystem::path original_override_;
};

// Data directory from the config or UNLEARN_DATA_DIR. Throws InputError
// when neither is set.
std::filesystem::path resolve_data_dir(const ExperimentConfig& cfg);
DatasetPair load_dataset(const ExperimentConfig& cfg);

}  // namespace unlearn::tools
