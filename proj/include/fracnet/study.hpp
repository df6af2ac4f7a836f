#pragma once

#include "fracnet/dataset.hpp"
#include "fracnet/dfn.hpp"
#include "fracnet/forest.hpp"
#include "fracnet/reactive.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fracnet {

struct StudyConfig {
  GenerationParams generation;
  int n_networks = 40;
  std::uint64_t seed = 1;
  bool include_terminals = false;

  ChemistryConstants chemistry;
  PermeabilityLaw law;
  SimulationControls controls;
  double viscosity = kWaterViscosity;
  std::vector<double> rate_constants{1e-9, 1e-10, 1e-11, 1e-12};

  ForestParams base_forest;
  ForestParams optimized_forest;
  bool run_grid_search = false;
  ParamGrid grid;
  int cv_folds = 3;
  bool split_by_network = false;
  double train_fraction = 2.0 / 3.0;
  int importance_repeats = 5;
  std::uint64_t forest_seed = 7;

  std::filesystem::path output_dir = "fracnet_out";
  int workers = 1;

  StudyConfig();

  /// Flat `key = value` text; `#` starts a comment. Unknown keys are errors.
  static StudyConfig parse(const std::string& text);
  static StudyConfig load(const std::filesystem::path& path);
  void set(const std::string& key, const std::string& value);
  /// FRACNET_OUT_DIR and FRACNET_WORKERS override the file.
  void apply_environment();
  void validate() const;

  /// Canonical text of every setting, in a fixed key order.
  std::string canonical() const;
  /// Digest of the settings that change simulation outputs.
  std::string simulation_hash() const;
  /// Digest of the settings that change the dataset.
  std::string dataset_hash() const;
  HydroConstants hydro() const;
};

/// FNV-1a 64-bit digest as 16 hex digits.
std::string fnv1a_hex(const std::string& text);

struct SimulationRecord {
  int network_id = 0;
  std::uint64_t seed = 0;
  double rate_constant = 0.0;
  bool ok = false;
  bool reused = false;
  std::string error;
  std::size_t steps = 0;
  bool reached_quasi_steady = false;
  double final_time_years = 0.0;
  double ledger_error = 0.0;
  double ledger_max_step_error = 0.0;
  double seconds = 0.0;
};

struct EnsembleSummary {
  std::vector<int> network_ids;
  std::vector<std::uint64_t> network_seeds;
  std::vector<std::uint64_t> skipped_seeds; ///< no inlet-outlet cluster
  std::vector<SimulationRecord> simulations;
  std::filesystem::path dataset_path;
  std::size_t dataset_rows = 0;
  double seconds = 0.0;

  std::size_t failures() const;
};

/// Network seed for attempt `index`.
std::uint64_t network_seed(const StudyConfig& config, int index);
std::filesystem::path network_dir(const StudyConfig& config, int network_id);
std::filesystem::path simulation_dir(const StudyConfig& config, int network_id, double rate_constant);

enum class EnsembleStage {
  all,          ///< generate, simulate and assemble dataset.csv
  generate,     ///< networks and their features only
  simulate,     ///< generate and simulate only
  assemble,     ///< dataset.csv from existing artifacts; missing runs count as failures
};

/// Runs the ensemble under output_dir, reusing artifacts whose config hash matches.
EnsembleSummary run_ensemble(const StudyConfig& config, EnsembleStage stage = EnsembleStage::all);

struct ModelScore {
  std::string name;    ///< RF-1, RF-2, RF-3 or k=...
  std::string variant; ///< base or optimized
  std::vector<std::string> features;
  ForestParams params;
  double r2_train = 0.0;
  double r2_test = 0.0;
  double oob = 0.0;
  FeatureImportance importance;
  Eigen::VectorXd y_train, p_train, y_test, p_test;
  std::optional<double> rate_constant;
};

struct StudyReport {
  std::vector<ModelScore> models;
  std::vector<std::string> skipped; ///< model: reason
  CorrelationMatrix correlation;
  std::optional<GridSearchResult> grid;
  std::string config_hash;
  std::uint64_t forest_seed = 0;
  std::map<std::string, double> timings;

  const ModelScore* find(const std::string& name, const std::string& variant) const;
};

/// Base and optimized RF-1/2/3 on all rates plus one optimized all-feature
/// model per rate constant.
StudyReport train_models(const Dataset& data, const StudyConfig& config);

/// Fits one model on a train/test split of `table` and scores it.
ModelScore score_model(const FeatureTable& table, const TrainTestSplit& split, const ForestParams& params,
                       int importance_repeats, std::uint64_t importance_seed);

/// CSV tables, SVG plots and summary.txt under `dir`.
void write_report(const StudyReport& report, const std::filesystem::path& dir);

/// Every number in the report, predictions included.
void write_study_json(const StudyReport& report, const std::filesystem::path& path);
StudyReport read_study_json(const std::filesystem::path& path);

} // namespace fracnet
